fn main() {
    std::process::exit(paramred_cli::run(std::env::args_os()));
}
