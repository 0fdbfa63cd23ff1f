use std::io::{self, Write};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;

use clap::Parser;
use compound_bo_cli::cli::{run, Cli};
use compound_bo_cli::ApiError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    panic::set_hook(Box::new(|info| log::error!("{info}")));
    let cli = Cli::parse();
    let stdout = io::stdout();
    let result = panic::catch_unwind(AssertUnwindSafe(|| run(cli, &mut stdout.lock())))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(ApiError::internal(msg))
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "{}", e.to_json());
            ExitCode::from(e.code.exit_code() as u8)
        }
    }
}
