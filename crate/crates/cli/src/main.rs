fn main() {
    std::process::exit(vline_cli::main_with_args(std::env::args_os()));
}
