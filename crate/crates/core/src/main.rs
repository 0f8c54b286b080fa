use std::io;
use std::process::ExitCode;

use fpp::cli;

fn main() -> ExitCode {
    if let Err(e) = cli::init_threads_from_env() {
        let rec = cli::ErrorRecord { error: e.kind().to_string(), message: e.to_string() };
        eprintln!("{}", serde_json::to_string(&rec).unwrap_or_default());
        return ExitCode::from(cli::exit_code(&e) as u8);
    }
    let code = cli::main_with(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
