fn main() {
    let code = minitest::cli::run(std::env::args_os());
    std::process::exit(code);
}
