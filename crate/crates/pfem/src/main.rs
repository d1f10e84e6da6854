fn main() {
    std::process::exit(pfem::cli::run(std::env::args_os()));
}
