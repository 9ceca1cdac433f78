fn main() {
    std::process::exit(deeptime::cli::run(std::env::args_os()));
}
