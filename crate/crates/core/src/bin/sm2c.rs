fn main() {
    std::process::exit(sm2c::cli::main_with_exit_code());
}
