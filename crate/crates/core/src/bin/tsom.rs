fn main() {
    std::process::exit(tsom::cli::run(std::env::args_os()));
}
