fn main() {
    std::process::exit(poplotto::cli::main_with_args(std::env::args_os()));
}
