fn main() {
    std::process::exit(vgne::cli::main_with(std::env::args_os()));
}
