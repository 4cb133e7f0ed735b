fn main() {
    std::process::exit(malt_kit::cli::run_subcommand(std::env::args_os()));
}
