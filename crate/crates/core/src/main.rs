fn main() {
    std::process::exit(homog::cli::run(std::env::args_os()));
}
