//! Scenarios shipped with the binary. The text is embedded verbatim from
//! `scenarios/*.toml`.

use crate::config::{ConfigError, ScenarioConfig};
use std::path::Path;

pub struct Builtin {
    pub name: &'static str,
    pub file: &'static str,
    pub source: &'static str,
}

macro_rules! builtin {
    ($name:literal) => {
        Builtin {
            name: $name,
            file: concat!($name, ".toml"),
            source: include_str!(concat!("../scenarios/", $name, ".toml")),
        }
    };
}

pub const BUILTINS: &[Builtin] = &[
    builtin!("test1"),
    builtin!("test2-explicit"),
    builtin!("test2-implicit"),
    builtin!("test2-explicit-verify"),
    builtin!("test3"),
    builtin!("test4"),
    builtin!("test5"),
    builtin!("sweep-test5"),
];

/// `test2` is accepted as a short name for `test2-explicit`.
pub fn find(name: &str) -> Option<&'static Builtin> {
    let name = if name == "test2" { "test2-explicit" } else { name };
    BUILTINS.iter().find(|b| b.name == name)
}

pub fn parse(b: &Builtin) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(b.source).unwrap_or_else(|e| panic!("builtin {} is invalid: {e}", b.name))
}

/// `(name, description)` for every builtin.
pub fn list() -> Vec<(&'static str, String)> {
    BUILTINS.iter().map(|b| (b.name, parse(b).description)).collect()
}

/// Resolves a command-line scenario argument: an existing file wins over a
/// builtin of the same name.
pub fn load(arg: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        return ScenarioConfig::from_toml_str(&text);
    }
    match find(arg) {
        Some(b) => ScenarioConfig::from_toml_str(b.source),
        None => Err(ConfigError::UnknownScenario(arg.to_string())),
    }
}
