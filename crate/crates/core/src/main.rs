fn main() {
    std::process::exit(lpg::cli::run_cli(std::env::args_os()));
}
