fn main() {
    std::process::exit(synthdetect::cli::run(std::env::args_os()));
}
