//! Command-line front end, HTTP service and latency bench over the
//! artifacts produced by the `coldrec` pipeline.

pub mod args;
pub mod bundle;
pub mod commands;
pub mod error;
pub mod latency;
pub mod layout;
pub mod manifest;
pub mod server;
pub mod settings;

pub use bundle::{EngineBundle, RecommendResponse};
pub use error::{CliError, Result};
pub use latency::LatencyReport;
pub use manifest::Manifest;

use std::ffi::OsString;

/// Parses `args` and runs the command. Returns the process exit code;
/// failures go to stderr as a single JSON line.
pub fn main_with(args: Vec<OsString>) -> i32 {
    let outcome = settings::parse(args).and_then(|p| match p {
        settings::Parsed::Display(text) => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
        settings::Parsed::Run(cli) => commands::dispatch(&cli),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            if e.kind() == "usage" {
                2
            } else {
                1
            }
        }
    }
}
