fn main() {
    std::process::exit(solicit_cli::run(std::env::args().collect()));
}
