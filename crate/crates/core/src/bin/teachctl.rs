fn main() {
    std::process::exit(teaching_control::cli::run(std::env::args_os()));
}
