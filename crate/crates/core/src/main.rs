fn main() -> std::process::ExitCode {
    competing_risks::cli::main()
}
