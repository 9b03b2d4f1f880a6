use std::process::ExitCode;

use clap::Parser;
use fundus_tk::cli::{run, threads_from_env, Cli};
use fundus_tk::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Batch { total, failures }) => {
            for f in &failures {
                eprintln!("error: {f}");
            }
            eprintln!("error: {} of {total} inputs failed", failures.len());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
