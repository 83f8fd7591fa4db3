fn main() {
    std::process::exit(zeroshape::cli::main_with_args(std::env::args_os()));
}
