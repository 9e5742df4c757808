fn main() {
    std::process::exit(chipower_cli::run(std::env::args_os()));
}
