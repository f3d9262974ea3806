fn main() {
    std::process::exit(kepler_unfold::cli::run(std::env::args_os()));
}
