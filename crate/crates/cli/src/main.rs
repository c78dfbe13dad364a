fn main() {
    std::process::exit(relfk_cli::main_with(std::env::args_os()));
}
