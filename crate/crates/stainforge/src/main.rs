fn main() {
    std::process::exit(stainforge::cli::run(std::env::args_os()));
}
