fn main() {
    std::process::exit(voltstab::cli::main());
}
