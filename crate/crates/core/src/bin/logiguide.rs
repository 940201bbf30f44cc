fn main() -> std::process::ExitCode {
    logiguide::cli::main()
}
