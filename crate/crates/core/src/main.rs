fn main() {
    std::process::exit(twoline::cli::run(std::env::args_os()));
}
