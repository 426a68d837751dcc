use std::process::ExitCode;

use clap::Parser;
use ordsel_cli::{run, Cli, EXIT_CONFIG};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(&cli) {
        Ok(manifest) => {
            if let Some(dir) = match &cli.command {
                ordsel_cli::Command::Simulate { out, .. }
                | ordsel_cli::Command::Bounds { out, .. }
                | ordsel_cli::Command::Calibrate { out, .. } => Some(out.clone()),
                ordsel_cli::Command::Verify { out, .. } => out.clone(),
            } {
                println!("{}", dir.join(ordsel_cli::manifest::RunManifest::FILE).display());
            }
            log::info!("{} finished in {} ms", manifest.command, manifest.wall_time_ms);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
