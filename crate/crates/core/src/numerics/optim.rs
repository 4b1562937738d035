use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::SgdMomentum,
            learning_rate,
            momentum,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            momentum: 0.0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Parameter(format!(
                    "adam {name} must lie in (0, 1), got {b}"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Parameter(format!(
                "adam eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// First-order optimizer over a fixed list of flat parameter buffers.
///
/// Moment buffers are allocated on the first step and their shapes are
/// frozen from then on.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    config: OptimizerConfig,
    step_count: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(OptimizerState {
            config,
            step_count: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter buffers but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::Shape(format!(
                    "parameter {i} has {} entries, gradient {}",
                    p.len(),
                    g.len()
                )));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if self.config.kind == OptimizerKind::Adam {
                self.second = params.iter().map(|p| vec![0.0; p.len()]).collect();
            }
        } else if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(b, p)| b.len() != p.len())
        {
            return Err(Error::Shape(
                "parameter shapes changed since the first optimizer step".into(),
            ));
        }

        self.step_count += 1;
        let c = self.config;
        match c.kind {
            OptimizerKind::SgdMomentum => {
                for ((p, g), vel) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((p, g), v) in p.iter_mut().zip(g.iter()).zip(vel.iter_mut()) {
                        *v = c.momentum * *v - c.learning_rate * g;
                        *p += *v;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let bias1 = 1.0 - c.beta1.powi(t);
                let bias2 = 1.0 - c.beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((p, g), m), v) in
                        p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        for cfg in [OptimizerConfig::sgd(0.1, 0.9), OptimizerConfig::adam(0.01)] {
            let mut opt = OptimizerState::new(cfg).unwrap();
            let mut p = vec![1.5, -2.0];
            opt.step(&mut [&mut p], &[&[0.0, 0.0]]).unwrap();
            assert_eq!(p, vec![1.5, -2.0]);
            assert_eq!(opt.step_count(), 1);
        }
    }

    #[test]
    fn plain_sgd_step() {
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(0.1, 0.0)).unwrap();
        let mut p = vec![0.0];
        opt.step(&mut [&mut p], &[&[1.0]]).unwrap();
        assert_eq!(p[0], -0.1);
    }

    #[test]
    fn adam_matches_hand_trace_on_square() {
        // hand-stepped reference for f(x) = x², f'(x) = 2x
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let mut x_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut trace = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * x_ref;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x_ref -= lr * mh / (vh.sqrt() + eps);
            trace.push(x_ref);
        }
        let mut opt = OptimizerState::new(OptimizerConfig::adam(lr)).unwrap();
        let mut x = vec![1.0];
        for expected in trace {
            let g = [2.0 * x[0]];
            opt.step(&mut [&mut x], &[&g]).unwrap();
            assert!((x[0] - expected).abs() < 1e-12);
        }
        // first Adam step moves by almost exactly lr
        assert_eq!(opt.step_count(), 3);
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = OptimizerState::new(OptimizerConfig::adam(0.1)).unwrap();
        let mut p = vec![0.0, 0.0];
        assert!(matches!(
            opt.step(&mut [&mut p], &[&[1.0]]),
            Err(Error::Shape(_))
        ));
        opt.step(&mut [&mut p], &[&[1.0, 1.0]]).unwrap();
        let mut q = vec![0.0; 3];
        assert!(matches!(
            opt.step(&mut [&mut q], &[&[1.0, 1.0, 1.0]]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(OptimizerState::new(OptimizerConfig::sgd(-1.0, 0.0)).is_err());
        assert!(OptimizerState::new(OptimizerConfig::sgd(0.1, 1.0)).is_err());
    }
}
