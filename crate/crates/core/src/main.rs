fn main() {
    std::process::exit(nsfit::cli::run(std::env::args_os()));
}
