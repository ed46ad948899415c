fn main() {
    std::process::exit(relbound::cli::run(std::env::args_os()));
}
