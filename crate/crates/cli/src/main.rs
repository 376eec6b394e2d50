fn main() {
    std::process::exit(rcert_cli::cli::run_from(std::env::args_os()));
}
