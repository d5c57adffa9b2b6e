fn main() {
    std::process::exit(simready::harness::cli::dispatch(std::env::args_os()));
}
