fn main() {
    std::process::exit(stss::cli::main_with_args(std::env::args_os()));
}
