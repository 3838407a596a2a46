use std::process::ExitCode;

fn main() -> ExitCode {
    qfool::cli::run()
}
