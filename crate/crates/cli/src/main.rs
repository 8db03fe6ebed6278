fn main() {
    std::process::exit(epiboot_cli::run(std::env::args_os()));
}
