use std::process::ExitCode;

fn main() -> ExitCode {
    lusin::cli::main()
}
