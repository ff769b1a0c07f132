fn main() {
    std::process::exit(pbal::cli::main_with_args(std::env::args_os()));
}
