fn main() {
    std::process::exit(fracsemi::cli::main_entry());
}
