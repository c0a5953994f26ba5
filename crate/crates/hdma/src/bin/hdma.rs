use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
    let mut out = std::io::stdout().lock();
    ExitCode::from(hdma::cli::execute_command(&refs, &mut out) as u8)
}
