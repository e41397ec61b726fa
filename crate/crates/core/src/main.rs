fn main() {
    std::process::exit(dyniter::cli::run(std::env::args_os()));
}
