fn main() {
    std::process::exit(koopman_pde::cli::run(std::env::args_os()));
}
