fn main() {
    std::process::exit(twin::cli::run(std::env::args_os()));
}
