fn main() {
    std::process::exit(rasch_pairing::cli::run(std::env::args_os()));
}
