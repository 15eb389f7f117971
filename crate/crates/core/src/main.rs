fn main() {
    std::process::exit(prospect::cli::run(std::env::args_os()));
}
