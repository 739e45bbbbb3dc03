fn main() {
    std::process::exit(macrobell::cli::run(std::env::args_os()));
}
