fn main() {
    std::process::exit(mici::cli::run_cli(std::env::args_os()));
}
