fn main() {
    std::process::exit(dwd_cli::run(std::env::args_os()));
}
