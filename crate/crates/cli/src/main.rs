fn main() {
    std::process::exit(effcond_cli::run(std::env::args_os()));
}
