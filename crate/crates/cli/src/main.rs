fn main() {
    std::process::exit(fracwell_cli::run(std::env::args_os()));
}
