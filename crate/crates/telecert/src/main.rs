fn main() {
    std::process::exit(telecert::cli::run(std::env::args_os()));
}
