fn main() {
    std::process::exit(scale_opt_cli::main_with_args(std::env::args_os()));
}
