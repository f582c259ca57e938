fn main() {
    std::process::exit(spod_cli::run_cli(std::env::args_os()));
}
