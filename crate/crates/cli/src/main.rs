fn main() {
    std::process::exit(acp_cli::run_cli(std::env::args_os()));
}
