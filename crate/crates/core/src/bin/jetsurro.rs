fn main() -> std::process::ExitCode {
    jetsurro::cli::main()
}
