fn main() {
    std::process::exit(cmm_cli::run(std::env::args_os()));
}
