//! Attribute-supervised feature refinement.
//!
//! A square linear refiner `F` (initialized at identity) and a projection
//! `W` into attribute space are trained jointly so that `x·F·W` points
//! towards the attribute vector of the sample's class under a cosine
//! softmax over all seen classes. Only `F` is kept afterwards; refined
//! features are `x·F`.

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeTable, FeatureStage, SeenOnlyView, SplitDataset};
use crate::error::{Error, Result};
use crate::numerics::{cosine_cross_entropy, Matrix, OptimizerConfig, OptimizerKind, OptimizerState, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SofConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub logit_scale: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SofConfig {
    fn default() -> Self {
        SofConfig {
            epochs: 10,
            learning_rate: 0.01,
            momentum: 0.9,
            logit_scale: 10.0,
            optimizer: OptimizerKind::SgdMomentum,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl SofConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Parameter("sof batch_size must be at least 1".into()));
        }
        if !(self.logit_scale > 0.0) || !self.logit_scale.is_finite() {
            return Err(Error::Parameter(format!(
                "sof logit_scale must be positive, got {}",
                self.logit_scale
            )));
        }
        self.optimizer_config().validate()
    }

    fn optimizer_config(&self) -> OptimizerConfig {
        match self.optimizer {
            OptimizerKind::SgdMomentum => OptimizerConfig::sgd(self.learning_rate, self.momentum),
            OptimizerKind::Adam => OptimizerConfig::adam(self.learning_rate),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinerParams {
    /// `F`, C × C.
    pub refiner: Matrix,
    /// `W`, C × D. Only used while training.
    pub projection: Matrix,
}

impl RefinerParams {
    pub fn identity(feat_dim: usize, attr_dim: usize) -> Self {
        RefinerParams {
            refiner: Matrix::identity(feat_dim),
            projection: Matrix::zeros(feat_dim, attr_dim),
        }
    }

    pub fn round_to_f32(&self) -> RefinerParams {
        RefinerParams {
            refiner: self.refiner.round_to_f32(),
            projection: self.projection.round_to_f32(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SofOutcome {
    pub params: RefinerParams,
    /// Mean training loss per epoch.
    pub loss_trace: Vec<f64>,
}

/// Cosine softmax cross-entropy of projected features against the
/// attributes of `seen` classes. `labels` are global class ids and must all
/// be in `seen`. Returns the mean loss and its gradient w.r.t. `projected`.
pub fn sof_loss(
    projected: &Matrix,
    labels: &[usize],
    attributes: &AttributeTable,
    seen: &[usize],
    logit_scale: f64,
) -> Result<(f64, Matrix)> {
    let keys = attributes.select(seen)?;
    sof_loss_with_keys(projected, labels, &keys, seen, logit_scale)
}

fn sof_loss_with_keys(
    projected: &Matrix,
    labels: &[usize],
    keys: &Matrix,
    seen: &[usize],
    logit_scale: f64,
) -> Result<(f64, Matrix)> {
    let targets = labels
        .iter()
        .map(|l| {
            seen.iter().position(|s| s == l).ok_or_else(|| {
                Error::Validation(format!("label {l} is not one of the seen classes"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ce = cosine_cross_entropy(projected, keys, &targets, logit_scale)?;
    Ok((ce.loss, ce.grad_queries))
}

/// Loss and gradients of the full refiner for one batch of raw features.
pub fn sof_batch_gradients(
    params: &RefinerParams,
    features: &Matrix,
    labels: &[usize],
    keys: &Matrix,
    seen: &[usize],
    logit_scale: f64,
) -> Result<(f64, Matrix, Matrix)> {
    let refined = features.matmul(&params.refiner)?;
    let projected = refined.matmul(&params.projection)?;
    let (loss, g_proj) = sof_loss_with_keys(&projected, labels, keys, seen, logit_scale)?;
    let g_w = refined.t_matmul(&g_proj)?;
    let g_refined = g_proj.matmul_t(&params.projection)?;
    let g_f = features.t_matmul(&g_refined)?;
    Ok((loss, g_f, g_w))
}

pub fn train_sof(ds: &SplitDataset, cfg: &SofConfig) -> Result<SofOutcome> {
    train_sof_on(&SeenOnlyView::new(ds), cfg)
}

/// Training loop over a seen-only view; nothing outside the training split
/// is reachable from here.
pub fn train_sof_on(view: &SeenOnlyView<'_>, cfg: &SofConfig) -> Result<SofOutcome> {
    cfg.validate()?;
    let (c, d) = (view.feature_dim(), view.attribute_dim());
    let mut rng = RngStream::new(cfg.seed);
    let mut init_rng = rng.derive("sof-init");
    let bound = 1.0 / (c as f64).sqrt();
    let mut params = RefinerParams {
        refiner: Matrix::identity(c),
        projection: Matrix::from_fn(c, d, |_, _| init_rng.uniform_range(-bound, bound)),
    };
    let mut optimizer = OptimizerState::new(cfg.optimizer_config())?;
    let seen = view.seen_classes().to_vec();
    let keys = view.gather_attributes(&seen)?;
    let mut order = view.train_indices().to_vec();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = view.gather_features(batch)?;
            let labels = batch.iter().map(|&i| view.label(i)).collect::<Result<Vec<_>>>()?;
            let (loss, g_f, g_w) =
                sof_batch_gradients(&params, &x, &labels, &keys, &seen, cfg.logit_scale)?;
            if !loss.is_finite() || !g_f.is_finite() || !g_w.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("semantic fine-tuning loss became {loss}"),
                });
            }
            total += loss * batch.len() as f64;
            optimizer.step(
                &mut [params.refiner.as_mut_slice(), params.projection.as_mut_slice()],
                &[g_f.as_slice(), g_w.as_slice()],
            )?;
        }
        let mean = if order.is_empty() { 0.0 } else { total / order.len() as f64 };
        loss_trace.push(mean);
    }
    Ok(SofOutcome { params, loss_trace })
}

/// New dataset with features `x·F`; labels, attributes and split are shared
/// with the input.
pub fn refine_features(ds: &SplitDataset, params: &RefinerParams) -> Result<SplitDataset> {
    let f = &params.refiner;
    if f.rows() != ds.feature_dim() || f.cols() != f.rows() {
        return Err(Error::Shape(format!(
            "refiner is {}x{}, dataset features have width {}",
            f.rows(),
            f.cols(),
            ds.feature_dim()
        )));
    }
    let features = if *f == Matrix::identity(f.rows()) {
        ds.features().clone()
    } else {
        ds.features().matmul(f)?
    };
    ds.with_features(features, FeatureStage::Refined)
}
