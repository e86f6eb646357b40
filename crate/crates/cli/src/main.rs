fn main() {
    std::process::exit(tabtext::run_cli(std::env::args_os()));
}
