fn main() {
    std::process::exit(adadetect::cli::main_with_args(std::env::args_os()));
}
