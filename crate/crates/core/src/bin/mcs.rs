fn main() {
    std::process::exit(mcs_core::cli::main_with_args(std::env::args_os()));
}
