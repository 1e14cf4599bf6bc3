fn main() {
    std::process::exit(labelproj::cli::run(std::env::args_os()));
}
