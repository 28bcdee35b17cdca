fn main() {
    std::process::exit(homog_cli::app::run_from_args(std::env::args_os()));
}
