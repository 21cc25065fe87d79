//! Flat-key TOML configuration. Each key names a long flag of the chosen
//! subcommand (`d-limit` or `d_limit`); values are strings, numbers,
//! booleans (switches) or arrays (comma-joined). The expanded flags are
//! placed before those on the command line, so explicit flags win.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::error::{CliError, CliResult};

/// Path given to `--config`, if any.
fn config_path(args: &[OsString]) -> CliResult<Option<PathBuf>> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let Some(s) = arg.to_str() else { continue };
        if s == "--" {
            break;
        }
        if s == "--config" {
            return match iter.next() {
                Some(p) => Ok(Some(PathBuf::from(p))),
                None => Err(CliError::input("--config needs a path")),
            };
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

fn scalar(key: &str, value: &toml::Value) -> CliResult<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Datetime(d) => Ok(d.to_string()),
        _ => Err(CliError::input(format!(
            "config key `{key}` must be a string, number or date"
        ))),
    }
}

/// Flags equivalent to the contents of a config file.
pub fn flags_from_toml(text: &str) -> CliResult<Vec<OsString>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::input(format!("config: {}", e.message())))?;
    let mut out = Vec::new();
    for (key, value) in &table {
        if key == "config" {
            return Err(CliError::input("config files cannot include other configs"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(|v| scalar(key, v))
                    .collect::<CliResult<Vec<_>>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            toml::Value::Table(_) => {
                return Err(CliError::input(format!(
                    "config key `{key}`: nested tables are not supported"
                )))
            }
            v => {
                out.push(flag.into());
                out.push(scalar(key, v)?.into());
            }
        }
    }
    Ok(out)
}

/// Insert flags from `--config` right after the subcommand name.
pub fn expand(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let extra = flags_from_toml(&text).map_err(|e| e.context(path.display()))?;
    // args[0] is the program, args[1] the subcommand.
    if args.len() < 2 || args[1].to_str().is_some_and(|s| s.starts_with('-')) {
        return Err(CliError::input("--config must follow a subcommand"));
    }
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
