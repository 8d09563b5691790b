fn main() {
    std::process::exit(liqlab_cli::main_entry(std::env::args_os()));
}
