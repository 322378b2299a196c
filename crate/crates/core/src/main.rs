fn main() {
    std::process::exit(dynparafac::cli::run_from_args(std::env::args_os()));
}
