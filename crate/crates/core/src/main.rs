fn main() { std::process::exit(toeplitz_fixpoint::cli::run(std::env::args_os())) }
