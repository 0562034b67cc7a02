fn main() {
    std::process::exit(tsact::cli::main_with_args(std::env::args_os()));
}
