fn main() {
    std::process::exit(rapidgate::main_with_args(std::env::args_os()));
}
