fn main() {
    std::process::exit(yb_ion_cli::run(std::env::args_os()));
}
