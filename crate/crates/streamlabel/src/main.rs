fn main() -> std::process::ExitCode {
    streamlabel::cli::main()
}
