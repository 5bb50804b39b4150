fn main() {
    std::process::exit(monotone_spde::cli::main_with_args(std::env::args_os()));
}
