fn main() {
    std::process::exit(thinjulia_cli::run(std::env::args_os()));
}
