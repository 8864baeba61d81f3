fn main() {
    std::process::exit(mismatch_bounds::cli::main_entry());
}
