fn main() {
    std::process::exit(ose_cli::run_cli(std::env::args_os()));
}
