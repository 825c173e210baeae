fn main() {
    std::process::exit(audiolrp_cli::main_with(std::env::args_os()));
}
