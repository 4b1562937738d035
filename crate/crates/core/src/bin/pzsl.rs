fn main() {
    std::process::exit(placeholder_zsl::cli::run(std::env::args_os()));
}
