fn main() {
    std::process::exit(spanshap_cli::main_with_args(std::env::args_os()));
}
