fn main() {
    std::process::exit(predpack_core::cli::run(std::env::args_os()));
}
