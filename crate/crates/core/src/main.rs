fn main() {
    std::process::exit(hydrodyn::cli::run_command(std::env::args_os()));
}
