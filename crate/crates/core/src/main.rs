fn main() {
    std::process::exit(sha_core::cli::run(std::env::args_os()));
}
