fn main() {
    std::process::exit(epitrace::cli::run(std::env::args_os()));
}
