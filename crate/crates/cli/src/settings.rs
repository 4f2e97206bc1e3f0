//! Setting resolution. A value comes from, in order: the command-line flag,
//! the `COLDREC_<FLAG>` environment variable, the `--config` file, the
//! built-in default.
//!
//! Config files hold `key=value` lines; `#` starts a comment. Keys are flag
//! names without the leading dashes (`n-authors` or `n_authors`).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches};

use crate::args::Cli;
use crate::error::{CliError, Result};

pub const ENV_PREFIX: &str = "COLDREC_";

pub fn env_name(long: &str) -> String {
    format!("{ENV_PREFIX}{}", long.to_uppercase().replace('-', "_"))
}

pub fn parse_config(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Malformed {
            what: format!("config {}", path.display()),
            detail: format!("line {}: expected key=value", i + 1),
        })?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Malformed {
                what: format!("config {}", path.display()),
                detail: format!("line {}: empty key", i + 1),
            });
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    std::env::var_os(env_name("config")).map(PathBuf::from)
}

fn layer(cmd: clap::Command, file: &BTreeMap<String, String>) -> clap::Command {
    let longs: Vec<(String, String)> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (a.get_id().to_string(), l.to_string())))
        .filter(|(id, _)| id != "help" && id != "version")
        .collect();
    let mut cmd = cmd;
    for (id, long) in longs {
        let default = file.get(&long).cloned();
        cmd = cmd.mut_arg(id, |a| {
            let a = a.env(env_name(&long));
            match default {
                Some(v) => a.default_value(v),
                None => a,
            }
        });
    }
    cmd
}

/// The full command tree with env and config-file layers applied.
pub fn command(file: &BTreeMap<String, String>) -> Result<clap::Command> {
    let mut cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for key in file.keys() {
        let known = cmd
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
        if !known {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
    }
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| layer(s, file));
    }
    Ok(cmd)
}

pub enum Parsed {
    Run(Cli),
    /// Help or version text, printed as-is with a zero exit.
    Display(String),
}

pub fn parse(args: Vec<OsString>) -> Result<Parsed> {
    let file = match config_path(&args) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io("config file", &p, e))?;
            parse_config(&text, &p)?
        }
        None => BTreeMap::new(),
    };
    let matches = match command(&file)?.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    Ok(Parsed::Display(e.render().to_string()))
                }
                _ => Err(CliError::Usage(first_line(&e.render().to_string()))),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(first_line(&e.to_string())))?;
    Ok(Parsed::Run(cli))
}

fn first_line(s: &str) -> String {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("invalid arguments")
        .trim_start_matches("error: ")
        .to_string()
}
