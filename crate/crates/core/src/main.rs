fn main() {
    std::process::exit(polysketch::cli::run(std::env::args_os()));
}
