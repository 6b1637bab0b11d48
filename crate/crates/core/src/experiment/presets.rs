use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Bundled experiment configs, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("paper-case1", include_str!("../../presets/paper-case1.json")),
    ("paper-case2", include_str!("../../presets/paper-case2.json")),
    ("paper-case3", include_str!("../../presets/paper-case3.json")),
    ("paper-case4", include_str!("../../presets/paper-case4.json")),
    ("steady-cycle", include_str!("../../presets/steady-cycle.json")),
    ("drift-cycle", include_str!("../../presets/drift-cycle.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Parse a bundled preset; the name may carry a `.json` suffix.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let key = name.strip_suffix(".json").unwrap_or(name);
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == key)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
    ExperimentConfig::from_json(text)
}

/// The four identification cases, in order.
pub fn table2_presets() -> Vec<ExperimentConfig> {
    (1..=4)
        .map(|i| preset(&format!("paper-case{i}")).expect("bundled preset parses"))
        .collect()
}
