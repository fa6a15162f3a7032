fn main() {
    std::process::exit(bevharmonize::cli::run(std::env::args_os()));
}
