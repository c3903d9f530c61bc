fn main() {
    std::process::exit(novelty_rl::harness::cli::run(std::env::args_os()));
}
