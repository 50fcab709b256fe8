fn main() {
    std::process::exit(dampkit::cli::main_with_args(std::env::args_os()));
}
