fn main() -> std::process::ExitCode {
    wheelcon::cli::main_with(std::env::args())
}
