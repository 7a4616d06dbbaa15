//! Flag resolution: built-in defaults, then a flat `key=value` config file,
//! then explicit command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use attnrec::Error;
use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

/// Parses `key=value` lines. Blank lines and `#` comments are skipped; keys
/// may use `-` or `_`.
pub fn parse_config_file(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value, got {line:?}",
                origin.display(),
                n + 1
            ))
        })?;
        let key = key.trim().replace('_', "-");
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "{}: key {key} given twice",
                origin.display()
            )));
        }
    }
    Ok(out)
}

/// Every option of `sub` with its winning value, in declaration order.
///
/// `file` keys must name options of the subcommand.
pub fn resolve(
    sub: &Command,
    matches: &ArgMatches,
    file: &BTreeMap<String, String>,
) -> Result<Vec<(String, String)>, Error> {
    let options: Vec<_> = sub
        .get_arguments()
        .filter_map(|a| {
            a.get_long()
                .map(|l| (a.get_id().as_str().to_string(), l.to_string()))
        })
        .filter(|(_, long)| long != "config" && long != "help")
        .collect();
    if let Some(unknown) = file.keys().find(|k| !options.iter().any(|(_, l)| l == *k)) {
        return Err(Error::Config(format!(
            "unknown key {unknown:?} for {}",
            sub.get_name()
        )));
    }
    let mut resolved = Vec::new();
    for (id, long) in options {
        let from_flag = matches.value_source(&id) == Some(ValueSource::CommandLine);
        let value = if from_flag {
            raw_value(matches, &id)
        } else if let Some(v) = file.get(&long) {
            Some(v.clone())
        } else {
            raw_value(matches, &id)
        };
        if let Some(v) = value {
            resolved.push((long, v));
        }
    }
    Ok(resolved)
}

fn raw_value(matches: &ArgMatches, id: &str) -> Option<String> {
    matches
        .get_raw(id)
        .and_then(|mut v| v.next())
        .map(|v| v.to_string_lossy().into_owned())
}

/// The resolved settings rendered as a loadable config file.
pub fn render(command: &str, resolved: &[(String, String)]) -> String {
    let mut s = format!("# attnrec {command}\n");
    for (k, v) in resolved {
        s.push_str(&format!("{k}={v}\n"));
    }
    s
}

/// Command-line arguments equivalent to the resolved settings.
pub fn to_argv(command: &str, resolved: &[(String, String)]) -> Vec<String> {
    let mut argv = vec!["attnrec".to_string(), command.to_string()];
    for (k, v) in resolved {
        argv.push(format!("--{k}"));
        argv.push(v.clone());
    }
    argv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let map = parse_config_file("# c\n\nhidden_dim = 8\nlambda=0.5\n", Path::new("x")).unwrap();
        assert_eq!(map["hidden-dim"], "8");
        assert_eq!(map["lambda"], "0.5");
    }

    #[test]
    fn rejects_malformed_and_duplicate_lines() {
        assert!(parse_config_file("epochs 3\n", Path::new("x")).is_err());
        assert!(parse_config_file("epochs=3\nepochs=4\n", Path::new("x")).is_err());
    }
}
