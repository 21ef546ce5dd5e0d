fn main() {
    std::process::exit(taubound::cli::run());
}
