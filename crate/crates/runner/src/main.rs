fn main() {
    std::process::exit(qxe_runner::cli::main());
}
