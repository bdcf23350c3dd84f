fn main() {
    std::process::exit(ropedna::cli::main());
}
