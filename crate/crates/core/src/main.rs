fn main() {
    std::process::exit(hetsync::cli::dispatch(std::env::args_os()));
}
