fn main() -> std::process::ExitCode {
    treealign::cli::main()
}
