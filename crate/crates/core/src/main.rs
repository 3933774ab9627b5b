fn main() {
    std::process::exit(noisy_qae::cli::run(std::env::args_os()));
}
