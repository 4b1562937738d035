use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::SynthConfig;
use crate::error::{Error, Result};
use crate::hallucination::HalluConfig;
use crate::numerics::derive_seed;
use crate::prototype::TrainConfig;
use crate::sof::SofConfig;

/// Calibration grid written as `"0.3"`, `"0:1:0.02"` or `"0,0.1,0.5"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub delta_grid: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            delta_grid: "0:1:0.02".into(),
        }
    }
}

/// Every tunable of the pipeline in one file.
///
/// The `[hallucination]` table is copied into the training configuration;
/// `train.hallucination` is therefore never read from the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub hallucination: HalluConfig,
    pub sof: SofConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Parses a config and fills in per-stage seeds. A `seed` written inside
    /// a section is kept; otherwise it is derived from the top-level seed.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("{origin}: {}", e.message().trim())))?;
        if table.contains_key("train") {
            if let Some(t) = table["train"].as_table() {
                if t.contains_key("hallucination") {
                    return Err(Error::Config(format!(
                        "{origin}: set hallucination parameters in the top-level [hallucination] table"
                    )));
                }
            }
        }
        let has_seed = |section: &str| {
            table
                .get(section)
                .and_then(|v| v.as_table())
                .is_some_and(|t| t.contains_key("seed"))
        };
        let explicit = [has_seed("synth"), has_seed("sof"), has_seed("train")];
        let mut cfg: RunConfig = RunConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::Config(format!("{origin}: {}", e.message().trim())))?;
        cfg.resolve_seeds(explicit);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Defaults, or the file at `path` when given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => {
                let mut cfg = RunConfig::default();
                cfg.resolve_seeds([false; 3]);
                Ok(cfg)
            }
        }
    }

    fn resolve_seeds(&mut self, explicit: [bool; 3]) {
        // TOML integers are signed
        let stage = |label| derive_seed(self.seed, label) & i64::MAX as u64;
        if !explicit[0] {
            self.synth.seed = stage("synth");
        }
        if !explicit[1] {
            self.sof.seed = stage("sof");
        }
        if !explicit[2] {
            self.train.seed = stage("train");
        }
        self.train.hallucination = self.hallucination.clone();
    }

    /// Same configuration under another top-level seed, with every stage
    /// seed re-derived.
    pub fn reseeded(&self, seed: u64) -> RunConfig {
        let mut cfg = self.clone();
        cfg.seed = seed & i64::MAX as u64;
        cfg.resolve_seeds([false; 3]);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} does not fit in a signed 64-bit integer", self.seed)));
        }
        self.synth.validate()?;
        self.hallucination.validate()?;
        self.sof.validate()?;
        self.train.validate()?;
        parse_delta_grid(&self.eval.delta_grid)?;
        Ok(())
    }

    pub fn delta_grid(&self) -> Result<Vec<f64>> {
        parse_delta_grid(&self.eval.delta_grid)
    }

    pub fn to_toml(&self) -> String {
        let mut table = toml::Table::try_from(self).expect("config serializes");
        if let Some(toml::Value::Table(train)) = table.get_mut("train") {
            train.remove("hallucination");
        }
        toml::to_string(&table).expect("config serializes")
    }

    pub(crate) fn to_table(&self) -> toml::Table {
        self.to_toml().parse().expect("own output parses")
    }
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot read `{s}` as a number in {what}")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{what} must be finite, got `{s}`")));
    }
    Ok(v)
}

/// `"a:b:step"` (inclusive), a comma list, or a single value.
pub fn parse_delta_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Config("delta grid is empty".into()));
    }
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("delta grid range `{text}` must be start:end:step")));
        }
        let (a, b, step) = (
            parse_number(parts[0], "delta grid")?,
            parse_number(parts[1], "delta grid")?,
            parse_number(parts[2], "delta grid")?,
        );
        if !(step > 0.0) || b < a {
            return Err(Error::Config(format!(
                "delta grid range `{text}` needs a positive step and end >= start"
            )));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| a + i as f64 * step).collect()
    } else {
        text.split(',')
            .map(|s| parse_number(s, "delta grid"))
            .collect::<Result<Vec<_>>>()?
    };
    if grid.iter().any(|&d| d < 0.0) {
        return Err(Error::Config(format!("delta grid `{text}` has a negative value")));
    }
    Ok(grid)
}

/// `"0..8"` (inclusive integers) or a comma list.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: i64 = a
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("range start in `{text}` is not an integer")))?;
        let b: i64 = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("range end in `{text}` is not an integer")))?;
        if b < a {
            return Err(Error::Config(format!("empty range `{text}`")));
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    let values = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_number(s, "--values"))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config("--values is empty".into()));
    }
    Ok(values)
}
