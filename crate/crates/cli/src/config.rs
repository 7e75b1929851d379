//! Config files: `key = value` lines naming long options without the
//! leading dashes. Entries become arguments placed in front of the
//! subcommand's own, so command-line flags override them. Keys that only
//! other subcommands understand are ignored; unknown keys are an error.
//! Boolean flags take `true` or `false`; multi-value options take
//! whitespace-separated values.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command};

/// Parses config text into `(key, value)` pairs, keys with dashes.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| format!("config line {}: expected `key = value`", k + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", k + 1));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Position of the subcommand token, skipping global options and values.
fn subcommand_index(argv: &[OsString], root: &Command) -> Option<usize> {
    let mut k = 1;
    while k < argv.len() {
        let s = argv[k].to_string_lossy();
        if let Some(name) = s.strip_prefix("--") {
            let takes_value = !name.contains('=')
                && root.get_arguments().any(|a| a.get_long() == Some(name) && a.get_action().takes_values());
            k += if takes_value { 2 } else { 1 };
        } else {
            return root.find_subcommand(s.as_ref()).map(|_| k);
        }
    }
    None
}

fn truthy(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("config key {key}: expected true or false, found {other:?}")),
    }
}

fn config_args(entries: &[(String, String)], root: &Command, sub: &str) -> Result<Vec<OsString>, String> {
    let sub_cmd = root.find_subcommand(sub).expect("known subcommand");
    let mut out: Vec<OsString> = Vec::new();
    for (key, value) in entries {
        let arg = sub_cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            let elsewhere =
                root.get_subcommands().any(|c| c.get_arguments().any(|a| a.get_long() == Some(key.as_str())));
            if elsewhere {
                continue;
            }
            return Err(format!("unknown config key {key:?}"));
        };
        match arg.get_action() {
            ArgAction::SetTrue => {
                if truthy(key, value)? {
                    out.push(format!("--{key}").into());
                }
            }
            action if action.takes_values() => {
                let multi = arg.get_num_args().is_some_and(|r| r.max_values() > 1);
                if multi {
                    out.push(format!("--{key}").into());
                    out.extend(value.split_whitespace().map(OsString::from));
                } else {
                    out.push(format!("--{key}={value}").into());
                }
            }
            _ => return Err(format!("config key {key:?} cannot be set from a file")),
        }
    }
    Ok(out)
}

/// Splices the entries of the `--config` file, if any, into `argv`.
pub fn expand_args(argv: Vec<OsString>, root: &Command) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| format!("cannot read config {}: {e}", Path::new(&path).display()))?;
    let entries = parse_config(&text)?;
    let mut root = root.clone();
    root.build();
    let Some(k) = subcommand_index(&argv, &root) else {
        return Ok(argv);
    };
    let sub = argv[k].to_string_lossy().into_owned();
    let extra = config_args(&entries, &root, &sub)?;
    let mut out = argv[..=k].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[k + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Cli, Command as Sub};
    use clap::{CommandFactory, Parser};

    fn expand(config: &str, args: &[&str]) -> Result<Cli, String> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, config).unwrap();
        let mut argv: Vec<OsString> = vec!["forcealign".into(), "--config".into(), path.clone().into()];
        argv.extend(args.iter().map(OsString::from));
        let argv = expand_args(argv, &Cli::command())?;
        Cli::try_parse_from(argv).map_err(|e| e.to_string())
    }

    #[test]
    fn parses_lines() {
        let got = parse_config("# comment\n\nmax_length_ratio = 4\nout=x\n").unwrap();
        assert_eq!(got, vec![("max-length-ratio".into(), "4".into()), ("out".into(), "x".into())]);
        assert!(parse_config("no equals sign").is_err());
        assert!(parse_config(" = 3").is_err());
    }

    #[test]
    fn command_line_overrides_config() {
        let cfg = "test_hours = 2\nseed = 5\njobs = 3\nbudget = 9\n";
        let cli = expand(cfg, &["split", "--in", "a.tsv", "--out", "b.tsv", "--seed", "7"]).unwrap();
        assert_eq!(cli.jobs, 3);
        let Sub::Split(s) = cli.command else { panic!() };
        assert_eq!((s.split.test_hours, s.split.seed), (2.0, 7));
    }

    #[test]
    fn flags_and_lists() {
        let cfg = "no_length_ratio = true\ndump_alignment = false\nthresholds = 0.5,0.8\n";
        let cli = expand(cfg, &["align", "--input", "d", "--out", "o"]).unwrap();
        let Sub::Align(a) = cli.command else { panic!() };
        assert!(a.align.no_length_ratio);
        assert!(!a.dump_alignment);
        let cli = expand("labels = a.jsonl b.jsonl\n", &["train-iou", "--in", "x", "y", "--out", "m"]).unwrap();
        let Sub::TrainIou(t) = cli.command else { panic!() };
        assert_eq!(t.labels.len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(expand("colour = blue\n", &["split", "--in", "a", "--out", "b", "--test-hours", "1"]).is_err());
        assert!(expand("no_length_ratio = maybe\n", &["align", "--input", "d", "--out", "o"]).is_err());
    }

    #[test]
    fn exactly_one_params_source() {
        let r = expand("preset = optimized\n", &["align", "--input", "d", "--out", "o", "--params", "p.cfg"]);
        assert!(r.is_err());
    }
}
