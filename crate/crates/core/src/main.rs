fn main() {
    std::process::exit(viso::cli::run(std::env::args_os()));
}
