fn main() {
    std::process::exit(conveyor_cli::run(std::env::args_os()));
}
