fn main() {
    std::process::exit(tzlab::cli::run(std::env::args_os()));
}
