use std::process::ExitCode;

use clap::Parser;
use mgeo_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors, matching our configuration code.
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mgeo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
