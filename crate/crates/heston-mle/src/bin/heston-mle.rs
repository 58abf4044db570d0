fn main() {
    std::process::exit(heston_mle::cli::main_with_args(std::env::args_os()));
}
