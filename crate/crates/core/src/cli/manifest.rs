use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::dataset::DatasetFormat;
use crate::error::{Error, Result};
use crate::prototype::TrainMode;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// What was asked for, minus the configuration. Enough to run it again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Synth {
        out: PathBuf,
        format: DatasetFormat,
    },
    Train {
        data: PathBuf,
        out: PathBuf,
        mode: TrainMode,
        /// Refine features even when the mode does not require it.
        sof: bool,
    },
    Eval {
        model: PathBuf,
        data: PathBuf,
        out: PathBuf,
        compare: Option<PathBuf>,
    },
    Ablate {
        data: PathBuf,
        out: PathBuf,
        seeds: usize,
    },
    Sweep {
        data: PathBuf,
        out: PathBuf,
        param: String,
        values: String,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Synth { .. } => "synth",
            Invocation::Train { .. } => "train",
            Invocation::Eval { .. } => "eval",
            Invocation::Ablate { .. } => "ablate",
            Invocation::Sweep { .. } => "sweep",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Invocation::Synth { out, .. }
            | Invocation::Train { out, .. }
            | Invocation::Eval { out, .. }
            | Invocation::Ablate { out, .. }
            | Invocation::Sweep { out, .. } => out,
        }
    }

    pub fn with_out(mut self, new_out: PathBuf) -> Self {
        match &mut self {
            Invocation::Synth { out, .. }
            | Invocation::Train { out, .. }
            | Invocation::Eval { out, .. }
            | Invocation::Ablate { out, .. }
            | Invocation::Sweep { out, .. } => *out = new_out,
        }
        self
    }
}

/// Record written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seed: u64,
    pub dataset_fingerprint: Option<String>,
    pub duration_secs: f64,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub invocation: Invocation,
    pub config: toml::Table,
}

impl RunManifest {
    pub fn resolved_config(&self) -> Result<RunConfig> {
        let text = toml::to_string(&self.config).expect("table serializes");
        RunConfig::from_toml(&text, "manifest config")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self)
            .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message().trim())))
    }
}
