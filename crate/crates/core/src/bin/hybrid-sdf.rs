fn main() {
    std::process::exit(hybrid_sdf::cli::run(std::env::args_os()));
}
