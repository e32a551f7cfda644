fn main() {
    std::process::exit(vem::cli::run(std::env::args_os()));
}
