fn main() {
    std::process::exit(tikflow::cli::main());
}
