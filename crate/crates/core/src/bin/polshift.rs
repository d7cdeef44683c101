fn main() {
    std::process::exit(polshift::cli::main_with_args(std::env::args_os()));
}
