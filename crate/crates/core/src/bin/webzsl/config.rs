//! `key = value` config files with optional `[stage]` sections.
//!
//! Keys are long flag names (`min-count` or `min_count`). Keys outside any
//! section apply to every stage that has the flag; keys in the section
//! named after the running subcommand must exist on it. A value from the
//! file is only used when the flag came from neither the command line nor
//! the environment.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use ini::{Ini, ParseOption};

pub fn read(path: &Path) -> Result<Vec<(Option<String>, String, String)>, String> {
    let opt = ParseOption {
        enabled_quote: false,
        enabled_escape: false,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_file_opt(path, opt).map_err(|e| format!("config file {}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (section, props) in ini.iter() {
        for (k, v) in props.iter() {
            out.push((section.map(str::to_owned), k.trim().replace('_', "-"), v.trim().to_owned()));
        }
    }
    Ok(out)
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    matches!(
        m.try_get_raw(id).ok().flatten().and_then(|_| m.value_source(id)),
        Some(ValueSource::CommandLine | ValueSource::EnvVariable)
    )
}

/// Flags to append to the command line so that config values fill in
/// whatever the user left at its default.
pub fn overrides(
    cmd: &Command,
    matches: &ArgMatches,
    entries: &[(Option<String>, String, String)],
) -> Result<Vec<OsString>, String> {
    let Some((name, sub_matches)) = matches.subcommand() else {
        return Ok(Vec::new());
    };
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut extra = Vec::new();
    // section entries come after general ones so they win
    let general = entries.iter().filter(|e| e.0.is_none());
    let staged = entries.iter().filter(|e| e.0.as_deref() == Some(name));
    let mut chosen: Vec<(&str, &str)> = Vec::new();
    for (section, key, value) in general.chain(staged) {
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            if section.is_some() {
                return Err(format!("config key {key:?} is not a flag of `{name}`"));
            }
            continue;
        };
        let id = arg.get_id().as_str();
        if explicit(sub_matches, id) || explicit(matches, id) {
            continue;
        }
        match chosen.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => chosen.push((key, value)),
        }
    }
    for (k, v) in chosen {
        extra.push(OsString::from(format!("--{k}={v}")));
    }
    Ok(extra)
}
