fn main() {
    std::process::exit(axisym_cli::run(std::env::args_os()));
}
