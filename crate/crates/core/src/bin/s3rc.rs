use std::process::ExitCode;

use clap::Parser;
use s3rc::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("s3rc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
