use std::process::ExitCode;

fn main() -> ExitCode {
    gendensity::cli::main()
}
