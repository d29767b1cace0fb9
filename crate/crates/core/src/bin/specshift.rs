fn main() {
    std::process::exit(specshift::cli::run_from(std::env::args_os()));
}
