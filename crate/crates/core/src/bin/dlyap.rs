fn main() {
    std::process::exit(dlyap::cli::main_with_args(std::env::args_os()));
}
