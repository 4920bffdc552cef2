fn main() {
    std::process::exit(opsys::cli::main_with(std::env::args_os()));
}
