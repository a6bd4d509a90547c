fn main() {
    std::process::exit(pev_stability::cli::run(std::env::args_os()));
}
