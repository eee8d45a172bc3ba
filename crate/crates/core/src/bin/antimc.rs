fn main() {
    std::process::exit(antimc::cli::main())
}
