fn main() {
    std::process::exit(vinehedge_core::harness::cli::main_entry());
}
