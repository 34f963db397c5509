fn main() {
    env_logger::init();
    std::process::exit(wavelab::cli::main_with(std::env::args_os()));
}
