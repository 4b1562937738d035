//! Semantic→visual prototype learning.
//!
//! A [`MappingNet`] `h` maps class attributes to visual-space prototypes and
//! is trained episodically. Each step scores episode samples against the
//! prototypes of the episode classes with a scaled-cosine softmax; with
//! hallucination enabled, the same loss is applied to placeholder classes
//! and their blended samples.

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeTable, Episode, EpisodeSampler, FeatureStage, SeenOnlyView, SplitDataset};
use crate::error::{Error, Result};
use crate::hallucination::{hallucinate, BetaPolicy, HalluConfig, HallucinatedEpisode};
use crate::numerics::{
    cosine_cross_entropy, Activation, MappingNet, Matrix, NetGradients, OptimizerConfig, OptimizerKind,
    OptimizerState, RngStream,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Real classes only.
    S2vBaseline,
    /// Placeholders from propagation alone (β = 0).
    EpOnly,
    /// Propagation plus Beta-drawn interpolation.
    EpEi,
    /// Same as `EpEi`, but the dataset must carry refined features.
    Full,
}

impl TrainMode {
    pub fn uses_hallucination(self) -> bool {
        !matches!(self, TrainMode::S2vBaseline)
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::S2vBaseline => "s2v",
            TrainMode::EpOnly => "ep",
            TrainMode::EpEi => "ep-ei",
            TrainMode::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `None` means `ceil(|train| / (M·N))`.
    pub episodes_per_epoch: Option<usize>,
    /// `M`, classes per episode.
    pub classes_per_episode: usize,
    /// `N`, samples per class.
    pub shots: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub logit_scale: f64,
    pub lambda_real: f64,
    /// Hidden width of `h`; `None` means `max(D, C)`.
    pub hidden: Option<usize>,
    pub activation: Activation,
    pub hallucination: HalluConfig,
    pub mode: TrainMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            episodes_per_epoch: None,
            classes_per_episode: 20,
            shots: 4,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            momentum: 0.0,
            logit_scale: 10.0,
            lambda_real: 1.0,
            hidden: None,
            activation: Activation::Relu,
            hallucination: HalluConfig::default(),
            mode: TrainMode::Full,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes_per_episode == 0 || self.shots == 0 {
            return Err(Error::Parameter(
                "classes_per_episode and shots must be at least 1".into(),
            ));
        }
        if self.episodes_per_epoch == Some(0) {
            return Err(Error::Parameter("episodes_per_epoch must be at least 1".into()));
        }
        if self.hidden == Some(0) {
            return Err(Error::Parameter("hidden width must be at least 1".into()));
        }
        if !(self.logit_scale > 0.0) || !self.logit_scale.is_finite() {
            return Err(Error::Parameter(format!(
                "logit_scale must be positive, got {}",
                self.logit_scale
            )));
        }
        if !(self.lambda_real >= 0.0) || !self.lambda_real.is_finite() {
            return Err(Error::Parameter(format!(
                "lambda_real must be non-negative, got {}",
                self.lambda_real
            )));
        }
        self.hallucination.validate()?;
        if self.mode.uses_hallucination()
            && self.hallucination.n > 0
            && self.hallucination.n >= self.classes_per_episode
        {
            return Err(Error::Parameter(format!(
                "hallucination n={} must be below classes_per_episode={}",
                self.hallucination.n, self.classes_per_episode
            )));
        }
        self.optimizer_config().validate()
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        match self.optimizer {
            OptimizerKind::SgdMomentum => OptimizerConfig::sgd(self.learning_rate, self.momentum),
            OptimizerKind::Adam => OptimizerConfig::adam(self.learning_rate),
        }
    }

    /// Whether placeholder classes are generated (`n = 0` disables them).
    pub fn hallucinates(&self) -> bool {
        self.mode.uses_hallucination() && self.hallucination.n > 0
    }

    fn beta_policy(&self) -> BetaPolicy {
        match self.mode {
            TrainMode::EpOnly => BetaPolicy::Fixed(0.0),
            _ => BetaPolicy::Sample,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeModel {
    pub net: MappingNet,
    pub config: TrainConfig,
    /// Mean total loss per epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: NetGradients,
}

/// Scaled-cosine softmax loss of `samples` (grouped by class, `shots` per
/// class) against the prototypes `h(class_semantics)`.
pub fn prototype_loss(
    net: &MappingNet,
    class_semantics: &Matrix,
    samples: &Matrix,
    shots: usize,
    logit_scale: f64,
) -> Result<LossOutput> {
    let classes = class_semantics.rows();
    if samples.rows() != classes * shots {
        return Err(Error::Shape(format!(
            "{} samples for {classes} classes x {shots} shots",
            samples.rows()
        )));
    }
    let (prototypes, cache) = net.forward(class_semantics)?;
    if prototypes.cols() != samples.cols() {
        return Err(Error::Shape(format!(
            "prototypes have width {}, samples {}",
            prototypes.cols(),
            samples.cols()
        )));
    }
    let targets: Vec<usize> = (0..samples.rows()).map(|r| r / shots).collect();
    let ce = cosine_cross_entropy(samples, &prototypes, &targets, logit_scale)?;
    let grads = net.backward(&cache, &ce.grad_keys)?;
    Ok(LossOutput { loss: ce.loss, grads })
}

/// Placeholder-class loss over a hallucinated episode.
pub fn place_loss(net: &MappingNet, hep: &HallucinatedEpisode, logit_scale: f64) -> Result<LossOutput> {
    prototype_loss(net, &hep.semantic, &hep.visual, hep.shots, logit_scale)
}

/// Real-class loss over an episode.
pub fn real_loss(net: &MappingNet, ep: &Episode, logit_scale: f64) -> Result<LossOutput> {
    prototype_loss(net, ep.semantic(), ep.visual(), ep.shots(), logit_scale)
}

/// Loss combination used by one training step.
pub fn episode_objective(
    net: &MappingNet,
    ep: &Episode,
    hep: Option<&HallucinatedEpisode>,
    cfg: &TrainConfig,
) -> Result<LossOutput> {
    let real = real_loss(net, ep, cfg.logit_scale)?;
    match hep {
        None => Ok(real),
        Some(hep) => {
            let place = place_loss(net, hep, cfg.logit_scale)?;
            let mut grads = place.grads;
            grads.accumulate(&real.grads, cfg.lambda_real)?;
            Ok(LossOutput {
                loss: cfg.lambda_real * real.loss + place.loss,
                grads,
            })
        }
    }
}

pub fn init_model(view: &SeenOnlyView<'_>, cfg: &TrainConfig) -> Result<MappingNet> {
    let (d, c) = (view.attribute_dim(), view.feature_dim());
    let hidden = cfg.hidden.unwrap_or(d.max(c));
    let mut rng = RngStream::new(cfg.seed).derive("prototype-init");
    MappingNet::init_uniform(d, hidden, c, cfg.activation, &mut rng)
}

pub fn train_prototypes(ds: &SplitDataset, cfg: &TrainConfig) -> Result<PrototypeModel> {
    train_prototypes_on(SeenOnlyView::new(ds), cfg).map(|(m, _)| m)
}

/// Training loop over a seen-only view. Returns the view so callers can
/// inspect its access log.
pub fn train_prototypes_on<'a>(
    view: SeenOnlyView<'a>,
    cfg: &TrainConfig,
) -> Result<(PrototypeModel, SeenOnlyView<'a>)> {
    cfg.validate()?;
    if cfg.mode == TrainMode::Full && view.stage() != FeatureStage::Refined {
        return Err(Error::Usage(
            "mode `full` needs features refined by semantic fine-tuning".into(),
        ));
    }
    let mut net = init_model(&view, cfg)?;
    let sampler = EpisodeSampler::new(view);
    let episodes = cfg.episodes_per_epoch.unwrap_or_else(|| {
        let per = cfg.classes_per_episode * cfg.shots;
        sampler.view().train_indices().len().div_ceil(per).max(1)
    });
    let root = RngStream::new(cfg.seed);
    let mut episode_rng = root.derive("episodes");
    let mut hallu_rng = root.derive("hallucination");
    let mut optimizer = OptimizerState::new(cfg.optimizer_config())?;
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..episodes {
            let ep = sampler.sample(cfg.classes_per_episode, cfg.shots, &mut episode_rng)?;
            let hep = if cfg.hallucinates() {
                Some(hallucinate(&ep, &cfg.hallucination, cfg.beta_policy(), &mut hallu_rng)?)
            } else {
                None
            };
            let out = episode_objective(&net, &ep, hep.as_ref(), cfg)?;
            if !out.loss.is_finite() || !out.grads.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("prototype loss became {}", out.loss),
                });
            }
            total += out.loss;
            net.apply_gradients(&mut optimizer, &out.grads)?;
        }
        loss_trace.push(total / episodes as f64);
    }
    Ok((
        PrototypeModel {
            net,
            config: cfg.clone(),
            loss_trace,
        },
        sampler.into_view(),
    ))
}

/// `h(a_k)` for each requested class, one row per id.
pub fn project_prototypes(
    model: &PrototypeModel,
    attributes: &AttributeTable,
    class_ids: &[usize],
) -> Result<Matrix> {
    project_with_net(&model.net, attributes, class_ids)
}

pub fn project_with_net(
    net: &MappingNet,
    attributes: &AttributeTable,
    class_ids: &[usize],
) -> Result<Matrix> {
    let a = attributes.select(class_ids)?;
    net.predict(&a)
}
