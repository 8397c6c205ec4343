use super::config::{parse_config, RunConfig};
use crate::error::{Error, Result};

/// Built-in scenarios as `(name, TOML source)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("stokes-oracle", include_str!("../../presets/stokes-oracle.toml")),
    ("powerlaw-p1.8", include_str!("../../presets/powerlaw-p1.8.toml")),
    ("powerlaw-p2.1", include_str!("../../presets/powerlaw-p2.1.toml")),
    ("heated-transient", include_str!("../../presets/heated-transient.toml")),
    ("steady-fixed-point", include_str!("../../presets/steady-fixed-point.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Error::config(format!("unknown preset `{name}`; known presets: {}", known.join(", ")))
    })?;
    parse_config(text)
}
