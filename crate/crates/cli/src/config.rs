use std::path::Path;

use serde::Deserialize;

use crate::Failure;

/// Values read from `--config`; any key may be omitted.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub k: Option<usize>,
    pub nprobe: Option<usize>,
    pub coarse_k: Option<usize>,
    pub pq_m: Option<usize>,
    pub iters: Option<usize>,
    pub p: Option<f64>,
    pub theta: Option<f32>,
    pub tau_d: Option<f64>,
    pub tau_same: Option<f64>,
    pub area_cap: Option<f64>,
    pub min_contrast: Option<f64>,
    pub grid: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            Failure::data(format!(
                "format error in {} at offset {offset}: {}",
                path.display(),
                e.message()
            ))
        })
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
