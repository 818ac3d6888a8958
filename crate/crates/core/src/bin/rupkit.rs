fn main() {
    std::process::exit(rupkit::cli::main_with_args(std::env::args_os()));
}
