fn main() {
    std::process::exit(urnkit::cli::dispatch(std::env::args()));
}
