fn main() {
    std::process::exit(autownet::cli::run(std::env::args_os()));
}
