fn main() {
    std::process::exit(cqabot_cli::dispatch(std::env::args_os()));
}
