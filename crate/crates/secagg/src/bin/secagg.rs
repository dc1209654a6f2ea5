fn main() {
    std::process::exit(secagg::cli::main());
}
