//! Optional TOML config whose keys mirror long flag names.
//!
//! Top-level keys apply to whichever command runs; a table named after the
//! command overrides them. The expanded flags are inserted right after the
//! command name, ahead of the user's own flags, so explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use toml::{Table, Value};

use crate::CliError;

pub const COMMANDS: [&str; 8] = [
    "train", "transform", "cluster", "retrieve", "theory", "distill", "scatter", "bench",
];

fn render(value: &Value) -> Result<Option<String>, CliError> {
    Ok(match value {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        Value::Boolean(_) => None,
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|v| render(v)?.ok_or_else(|| CliError::Config("arrays of booleans are not supported".into())))
                .collect::<Result<Vec<_>, _>>()?;
            Some(parts.join(","))
        }
        other => return Err(CliError::Config(format!("unsupported value {other}"))),
    })
}

fn push_flags(table: &Table, out: &mut Vec<OsString>) -> Result<(), CliError> {
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        match (render(value)?, value.as_bool()) {
            (Some(v), _) => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
            (None, Some(true)) => out.push(format!("--{key}").into()),
            (None, _) => {}
        }
    }
    Ok(())
}

/// Removes `--config FILE` from `args` and splices the file's flags in after the command name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy().into_owned();
        if text == "--config" {
            config = Some(iter.next().ok_or_else(|| CliError::Config("--config needs a file".into()))?);
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    let Some(pos) = rest.iter().position(|a| COMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(rest);
    };
    let command = rest[pos].to_string_lossy().into_owned();
    let mut injected = Vec::new();
    push_flags(&table, &mut injected)?;
    if let Some(Value::Table(section)) = table.get(&command) {
        push_flags(section, &mut injected)?;
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}
