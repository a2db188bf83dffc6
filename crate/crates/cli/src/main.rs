fn main() {
    std::process::exit(uniar_cli::run(std::env::args_os()));
}
