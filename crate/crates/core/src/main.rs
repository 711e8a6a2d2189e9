fn main() {
    env_logger::init();
    std::process::exit(tikhoflow::cli::main());
}
