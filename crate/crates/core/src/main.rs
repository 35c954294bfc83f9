fn main() {
    std::process::exit(halpern::cli::run(std::env::args_os()));
}
