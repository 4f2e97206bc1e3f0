fn main() {
    std::process::exit(coldrec_cli::main_with(std::env::args_os().collect()));
}
