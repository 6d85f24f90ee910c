fn main() {
    std::process::exit(sparse_eie::cli::run(std::env::args_os()));
}
