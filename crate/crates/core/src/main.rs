fn main() {
    std::process::exit(fvrf::cli::main_with_args(std::env::args_os()));
}
