fn main() {
    std::process::exit(dexter_cli::run(std::env::args_os()));
}
