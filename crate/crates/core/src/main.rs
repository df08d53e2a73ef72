fn main() {
    std::process::exit(grapheye::cli::dispatch(std::env::args_os()));
}
