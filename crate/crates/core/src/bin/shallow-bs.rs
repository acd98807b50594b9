fn main() {
    std::process::exit(shallow_bs::cli::main_with_args(std::env::args_os()));
}
