//! `--config FILE`: a JSON object whose keys are flag names, plus
//! `"subcommand"`, expanded into command-line arguments.

use std::ffi::OsString;
use std::path::Path;

use serde_json::{Map, Value};

use crate::CliError;

/// Replaces `--config FILE` in `argv` by the arguments it describes; the
/// remaining command-line arguments follow, so explicit flags win.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config=")) else {
        return Ok(argv);
    };
    let (path, used) = match argv[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => (OsString::from(p), 1),
        None => (
            argv.get(pos + 1)
                .cloned()
                .ok_or_else(|| CliError::Config("--config needs a file".into()))?,
            2,
        ),
    };
    let (subcommand, flags) = config_args(Path::new(&path))?;
    let mut rest: Vec<OsString> = argv[1..pos].to_vec();
    rest.extend(argv[pos + used..].iter().cloned());
    let mut out = vec![argv[0].clone()];
    // an explicit subcommand on the command line replaces the file's
    if rest.first().is_some_and(|a| !a.to_string_lossy().starts_with('-')) {
        out.push(rest.remove(0));
    } else if let Some(s) = subcommand {
        out.push(s);
    }
    out.extend(flags);
    out.extend(rest);
    Ok(out)
}

type Parsed = (Option<OsString>, Vec<OsString>);

fn config_args(path: &Path) -> Result<Parsed, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    // a run manifest carries its resolved flags under "config"
    let value = match value {
        Value::Object(mut m) if m.get("config").is_some_and(Value::is_object) => m.remove("config").unwrap_or_default(),
        other => other,
    };
    let Value::Object(map) = value else {
        return Err(CliError::Config("config must be a JSON object".into()));
    };
    object_args(map)
}

/// The subcommand, if any, and the flags of a config object.
pub fn object_args(mut map: Map<String, Value>) -> Result<Parsed, CliError> {
    let subcommand = match map.remove("subcommand") {
        Some(Value::String(s)) => Some(OsString::from(s)),
        Some(_) => return Err(CliError::Config("\"subcommand\" must be a string".into())),
        None => None,
    };
    let mut out = Vec::new();
    for (key, value) in map {
        let flag = format!("--{key}");
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            _ => return Err(CliError::Config(format!("config key {key}: expected a scalar"))),
        }
    }
    Ok((subcommand, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_become_flags() {
        let map = serde_json::json!({"subcommand": "mlbound", "M": 2, "quick": true, "eps": "0.3:0.3:0.1"});
        let Value::Object(map) = map else { unreachable!() };
        let (sub, args) = object_args(map).unwrap();
        assert_eq!(sub.unwrap(), "mlbound");
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert!(args.windows(2).any(|w| w == ["--M", "2"]));
        assert!(args.contains(&"--quick".to_string()));
        assert!(args.windows(2).any(|w| w == ["--eps", "0.3:0.3:0.1"]));
    }
}
