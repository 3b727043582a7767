fn main() {
    std::process::exit(jetlift::cli::main_with_env());
}
