fn main() {
    std::process::exit(conformal_lab::cli::main_with_args(std::env::args_os()));
}
