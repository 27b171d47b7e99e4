fn main() {
    std::process::exit(holdline::cli::main_with_args(std::env::args_os()));
}
