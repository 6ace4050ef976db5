fn main() {
    std::process::exit(bilip::cli::run(std::env::args_os()));
}
