//! `key = value` config files, merged into the argument list ahead of the
//! command-line flags so that the latter win.

use std::path::Path;

use clap::Command;

use crate::error::CliError;

/// Flag arguments read from `path` for subcommand `sub` of `cmd`.
pub fn file_args(cmd: &Command, sub: &str, path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse(cmd, sub, &text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse(cmd: &Command, sub: &str, text: &str) -> Result<Vec<String>, String> {
    let sub = cmd
        .find_subcommand(sub)
        .ok_or_else(|| format!("unknown command '{sub}'"))?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("line {}: expected 'key = value'", n + 1))?;
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key) && key != "config")
            .ok_or_else(|| {
                format!(
                    "line {}: unknown key '{key}' for '{}'",
                    n + 1,
                    sub.get_name()
                )
            })?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}={value}"));
        } else {
            match value {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(format!(
                        "line {}: '{key}' takes true or false, not '{other}'",
                        n + 1
                    ))
                }
            }
        }
    }
    Ok(out)
}

/// `argv` with `extra` spliced in right after the subcommand token.
pub fn splice(argv: &[String], sub: &str, extra: Vec<String>) -> Vec<String> {
    let at = argv
        .iter()
        .skip(1)
        .position(|a| a == sub)
        .map_or(argv.len(), |p| p + 2);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}
