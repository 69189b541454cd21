fn main() {
    std::process::exit(ieh::cli::main_with(std::env::args_os()));
}
