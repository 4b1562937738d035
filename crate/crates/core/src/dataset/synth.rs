use serde::{Deserialize, Serialize};

use super::{AttributeTable, Split, SplitDataset};
use crate::error::{Error, Result};
use crate::numerics::{norm, Matrix, RngStream};

/// Attribute-conditioned Gaussian benchmark.
///
/// Attributes are i.i.d. standard normal rows, L2-normalized. A hidden linear
/// map `G` (feature_dim × attr_dim, standard normal entries) turns each
/// attribute row into a class mean `μ_k = G·a_k`, and every sample is
/// `μ_k + noise_scale·ε` with `ε` standard normal. Stored values are rounded
/// to `f32` so the dataset survives the file formats bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seen_count: usize,
    pub unseen_count: usize,
    pub attr_dim: usize,
    pub feat_dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seen_count: 40,
            unseen_count: 10,
            attr_dim: 16,
            feat_dim: 32,
            train_per_class: 100,
            test_per_class: 30,
            noise_scale: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("seen_count", self.seen_count),
            ("unseen_count", self.unseen_count),
            ("attr_dim", self.attr_dim),
            ("feat_dim", self.feat_dim),
            ("train_per_class", self.train_per_class),
            ("test_per_class", self.test_per_class),
        ] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::Parameter(format!(
                "noise_scale must be finite and non-negative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }

    /// Non-fatal configuration concerns.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.feat_dim < self.attr_dim {
            out.push(format!(
                "feat_dim ({}) is below attr_dim ({}); class means cannot span the attribute space",
                self.feat_dim, self.attr_dim
            ));
        }
        out
    }
}

/// A generated dataset together with the hidden quantities behind it.
#[derive(Clone, Debug)]
pub struct SyntheticBenchmark {
    pub dataset: SplitDataset,
    /// `G`, feature_dim × attr_dim.
    pub ground_truth_map: Matrix,
    /// `μ_k` per class, one row each.
    pub class_means: Matrix,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SplitDataset> {
    generate_synthetic_with_truth(cfg).map(|b| b.dataset)
}

pub fn generate_synthetic_with_truth(cfg: &SynthConfig) -> Result<SyntheticBenchmark> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let mut attr_rng = root.derive("attributes");
    let mut map_rng = root.derive("map");
    let mut noise_rng = root.derive("noise");

    let classes = cfg.seen_count + cfg.unseen_count;
    let mut attrs = Matrix::from_fn(classes, cfg.attr_dim, |_, _| attr_rng.normal());
    for k in 0..classes {
        let n = norm(attrs.row(k));
        for v in attrs.row_mut(k) {
            *v = (*v / n) as f32 as f64;
        }
    }
    let g = Matrix::from_fn(cfg.feat_dim, cfg.attr_dim, |_, _| map_rng.normal());
    let means = attrs.matmul_t(&g)?;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut split = Split {
        seen: (0..cfg.seen_count).collect(),
        unseen: (cfg.seen_count..classes).collect(),
        ..Split::default()
    };
    for k in 0..classes {
        let seen = k < cfg.seen_count;
        let count = if seen {
            cfg.train_per_class + cfg.test_per_class
        } else {
            cfg.test_per_class
        };
        for s in 0..count {
            let idx = labels.len();
            labels.push(k);
            for &mu in means.row(k) {
                let x = mu + cfg.noise_scale * noise_rng.normal();
                data.push(x as f32 as f64);
            }
            match (seen, s < cfg.train_per_class) {
                (true, true) => split.train.push(idx),
                (true, false) => split.test_seen.push(idx),
                (false, _) => split.test_unseen.push(idx),
            }
        }
    }
    let features = Matrix::from_vec(labels.len(), cfg.feat_dim, data)?;
    let dataset = SplitDataset::new(features, labels, AttributeTable::new(attrs)?, split)?;
    Ok(SyntheticBenchmark {
        dataset,
        ground_truth_map: g,
        class_means: means,
    })
}
