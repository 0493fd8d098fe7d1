//! Flat `key=value` config files.
//!
//! Every long flag doubles as a config key. Config entries are spliced into
//! the argument list ahead of the user's own flags, and later occurrences
//! of a flag win, so the command line always takes precedence.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("--config needs a path")]
    MissingPath,
}

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Turns config entries into flags. `true` / `false` values toggle switches.
pub fn to_flags(entries: &[(String, String)]) -> Vec<OsString> {
    let mut flags = Vec::new();
    for (key, value) in entries {
        match value.as_str() {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                flags.push(format!("--{key}").into());
                flags.push(value.into());
            }
        }
    }
    flags
}

/// Finds `--config PATH` or `--config=PATH` and returns the argument list
/// with the config's flags inserted right after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--config" {
            path = Some(args.get(i + 1).ok_or(ConfigError::MissingPath)?.clone());
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let flags = to_flags(&parse(&text)?);
    // program name and subcommand come first
    let split = args.len().min(2);
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[split..]);
    Ok(out)
}
