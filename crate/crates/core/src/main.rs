fn main() {
    std::process::exit(wakeotp::cli::main_with_args(std::env::args_os()));
}
