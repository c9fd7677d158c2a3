fn main() {
    std::process::exit(zxm::cli::run(std::env::args().collect()));
}
