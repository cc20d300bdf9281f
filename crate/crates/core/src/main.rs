fn main() {
    std::process::exit(algebroid::cli::run(std::env::args_os()));
}
