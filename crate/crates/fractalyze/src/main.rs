use std::process::ExitCode;

fn main() -> ExitCode {
    let out = &mut std::io::stdout().lock();
    let err = &mut std::io::stderr().lock();
    let code = fractalyze::cli::run(std::env::args_os(), out, err);
    ExitCode::from(code as u8)
}
