fn main() {
    std::process::exit(randmv::cli::main());
}
