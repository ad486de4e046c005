fn main() {
    std::process::exit(sse_unravel::cli::run(std::env::args_os()));
}
