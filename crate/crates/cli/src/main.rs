fn main() {
    std::process::exit(pollisim_cli::cli_main(std::env::args_os()));
}
