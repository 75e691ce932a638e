fn main() {
    std::process::exit(ccqa_core::cli::main_with_args(std::env::args_os()));
}
