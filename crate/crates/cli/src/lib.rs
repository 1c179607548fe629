//! Command-line front end: argument parsing, run manifests and CSV/JSON output.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;

pub use args::{Cli, Command, Format};
pub use commands::{execute, Output};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

/// Runs one invocation, honoring the worker-count override, and writes its output.
pub fn run(cli: &Cli) -> CliResult<()> {
    let out = match cli.threads {
        Some(0) => return Err(CliError::Usage("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(|| execute(&cli.command))?,
        None => execute(&cli.command)?,
    };
    let common = commands::common_of(&cli.command);
    let format = common.format.unwrap_or(out.default_format);
    let bytes = output::render(&out.manifest, &out.table, format);
    output::emit(&bytes, common.out.as_deref())
}
