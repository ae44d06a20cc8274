fn main() {
    std::process::exit(litkg::cli::run(std::env::args_os()));
}
