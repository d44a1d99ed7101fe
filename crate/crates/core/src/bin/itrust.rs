fn main() {
    std::process::exit(itrust::cli::main());
}
