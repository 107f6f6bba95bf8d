//! Flat `key = value` defaults files.
//!
//! Keys are long flag names (`d-grid` or `d_grid`); repeat a key for
//! repeatable flags; `true`/`false` toggle switches. Lines starting with
//! `#` are comments.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{io_at, CliError, CliResult};

pub const SUBCOMMANDS: [&str; 7] = [
    "fit",
    "frontier",
    "certify",
    "transform",
    "disparity",
    "synth",
    "experiment",
];

pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::usage(format!("config line {}: invalid key `{}`", i + 1, k.trim())));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn given_on_command_line(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("--{key}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_eq)
    })
}

/// Splices config entries into `args` right after the subcommand, skipping
/// keys already given on the command line.
pub fn expand_args(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(io_at(Path::new(&path)))?;
    let entries = parse_config(&text)?;
    let mut extra = Vec::new();
    for (key, value) in entries {
        if given_on_command_line(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(value));
            }
        }
    }
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
        .unwrap_or(args.len());
    let mut out = args;
    out.splice(at..at, extra);
    Ok(out)
}
