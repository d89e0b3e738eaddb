fn main() -> std::process::ExitCode {
    eightcount_gateway::cli::main()
}
