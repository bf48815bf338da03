fn main() -> std::process::ExitCode {
    stretchy_cli::main_entry()
}
