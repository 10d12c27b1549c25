use std::process::ExitCode;

use augtree_cli::{run, Config};
use clap::Parser;

fn main() -> ExitCode {
    let cfg = Config::parse();
    match run(&cfg) {
        Ok(report) => {
            print!("{}", report.render());
            for f in &report.failures {
                eprintln!("error: {f}");
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
