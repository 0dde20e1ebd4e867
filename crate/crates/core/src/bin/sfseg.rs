fn main() {
    std::process::exit(sfseg::cli::main_with_args(std::env::args_os()));
}
