//! Layered configuration: profile, file, environment, flags.

use std::path::PathBuf;

use stefan_core::config::KEYS;
use stefan_core::{RawConfig, SimConfig};

use crate::args::{Command, CommonArgs};
use crate::CliError;

pub const ENV_PREFIX: &str = "STEFAN_";
pub const DEFAULT_OUT: &str = "out";

/// A fully resolved run request.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    pub config: SimConfig,
    pub raw: RawConfig,
    pub jobs: usize,
    pub out: PathBuf,
}

/// Environment variable carrying `key`, e.g. `STEFAN_N_X`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase())
}

fn split_pair(pair: &str) -> Result<(&str, &str), CliError> {
    pair.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{pair}`")))
}

/// Combine every layer for `command`. `env` yields `(name, value)` pairs;
/// `read` loads the `--config` file.
pub fn resolve(
    command: Command,
    args: &CommonArgs,
    env: impl IntoIterator<Item = (String, String)>,
    read: impl FnOnce(&std::path::Path) -> std::io::Result<String>,
) -> Result<Resolved, CliError> {
    let mut env: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    env.sort();
    let from_env = |key: &str| {
        let name = env_name(key);
        env.iter().find(|(k, _)| *k == name).map(|(_, v)| v.clone())
    };

    // profiles always sit beneath the explicit layers, wherever they are named
    let mut raw = RawConfig::new();
    if let Some(p) = args.profile.clone().or_else(|| from_env("profile")) {
        raw.apply_profile(&p)?;
    }
    if let Some(path) = &args.config {
        let text = read(path).map_err(|e| CliError::io(path, e))?;
        raw.merge(&RawConfig::parse(&text)?);
    }
    for key in KEYS.iter().copied().filter(|k| *k != "profile") {
        if let Some(v) = from_env(key) {
            raw.set(key, v)?;
        }
    }
    let known: Vec<String> = KEYS.iter().map(|k| env_name(k)).collect();
    let unknown: Vec<&str> = env
        .iter()
        .map(|(k, _)| k.as_str())
        .filter(|k| !known.iter().any(|n| n == k))
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::Config(format!(
            "unknown environment override(s): {}; expected {ENV_PREFIX}<KEY> for a configuration key",
            unknown.join(", ")
        )));
    }

    for pair in &args.set {
        let (k, v) = split_pair(pair)?;
        raw.set(k, v)?;
    }
    if let Some(s) = args.seed {
        raw.set("seed", s.to_string())?;
    }
    if let Some(j) = args.jobs {
        raw.set("jobs", j.to_string())?;
    }
    if let Some(o) = &args.out {
        raw.set("out", o.display().to_string())?;
    }

    let wanted = command.model();
    match raw.get("model") {
        Some(m) if !raw.from_profile("model") && m != wanted.as_str() => {
            return Err(CliError::Config(format!(
                "model: `{m}` conflicts with subcommand {} (model {}); remove the model key",
                command.name(),
                wanted.as_str()
            )));
        }
        _ => raw.set("model", wanted.as_str())?,
    }

    let config = raw.build()?;
    let jobs = match raw.get("jobs") {
        Some(j) => j.parse().expect("validated by build"),
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = PathBuf::from(config.out.clone().unwrap_or_else(|| DEFAULT_OUT.into()));
    Ok(Resolved {
        command,
        config,
        raw,
        jobs,
        out,
    })
}
