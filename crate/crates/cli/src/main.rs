fn main() {
    std::process::exit(wtfbf_cli::app::main_with(std::env::args_os()));
}
