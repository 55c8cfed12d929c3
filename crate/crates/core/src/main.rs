fn main() {
    std::process::exit(treeclust::cli::main_with_args(std::env::args_os()));
}
