fn main() {
    std::process::exit(recgnn::cli::main());
}
