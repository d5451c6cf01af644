fn main() {
    std::process::exit(annulus_cli::run(std::env::args_os()));
}
