fn main() {
    std::process::exit(fuchs_core::cli::main_with(std::env::args_os()));
}
