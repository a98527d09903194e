fn main() {
    std::process::exit(cuneilid::cli::run(std::env::args_os()));
}
