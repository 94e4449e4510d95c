fn main() {
    std::process::exit(sf_compose::cli::run());
}
