fn main() {
    std::process::exit(edgeorch::cli::main_with_args(std::env::args_os()));
}
