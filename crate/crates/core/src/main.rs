fn main() {
    std::process::exit(euopt::cli::main_with(std::env::args_os()));
}
