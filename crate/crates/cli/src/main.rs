use clap::Parser;
use std::process::ExitCode;
use tracer_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{}", serde_json::to_string(&out).expect("outcome serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
