fn main() {
    std::process::exit(sbl_cli::run(std::env::args_os()));
}
