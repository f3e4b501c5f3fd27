fn main() {
    std::process::exit(sphere_flow::cli::main_with_args(std::env::args_os()));
}
