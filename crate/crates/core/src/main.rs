fn main() -> std::process::ExitCode {
    heavysum::cli::main_entry()
}
