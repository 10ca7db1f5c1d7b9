fn main() {
    std::process::exit(causalkg::cli::main_with_args(std::env::args_os()));
}
