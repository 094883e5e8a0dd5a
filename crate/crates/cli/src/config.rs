//! Config files: `key = value` lines whose keys are long flag names.
//!
//! The file is turned into ordinary command-line tokens inserted right
//! after the subcommand, so anything given on the real command line comes
//! later and wins.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;
use rrsplit::harness::parse_key_values;

use crate::Cli;

/// Flags that take no value; `true`/`false` in a config file.
const SWITCHES: [&str; 3] = ["oracle", "emit-plot", "gradients"];

/// Splits `--config <path>` / `--config=<path>` out of `args`.
fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<PathBuf>> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file path");
            }
            let path = PathBuf::from(args.remove(i + 1));
            args.remove(i);
            return Ok(Some(path));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            args.remove(i);
            return Ok(Some(PathBuf::from(p)));
        }
        i += 1;
    }
    Ok(None)
}

/// Expands a `--config` file into flags placed after the subcommand name.
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = take_config_path(&mut args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let pairs = parse_key_values(&text)?;

    let command = Cli::command();
    let Some(pos) = args.iter().position(|a| {
        command
            .find_subcommand(a.to_string_lossy().as_ref())
            .is_some()
    }) else {
        return Ok(args);
    };
    let sub = command
        .find_subcommand(args[pos].to_string_lossy().as_ref())
        .expect("found above");
    let accepts = |key: &str| sub.get_arguments().any(|a| a.get_long() == Some(key));
    let known_anywhere = |key: &str| {
        command
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key)))
    };

    let mut injected = Vec::new();
    for (key, value) in pairs {
        if !known_anywhere(&key) {
            bail!("{}: unknown key `{key}`", path.display());
        }
        if !accepts(&key) {
            continue;
        }
        if SWITCHES.contains(&key.as_str()) {
            match value.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                other => bail!(
                    "{}: `{key}` expects true or false, got `{other}`",
                    path.display()
                ),
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    args.splice(pos + 1..pos + 1, injected);
    Ok(args)
}
