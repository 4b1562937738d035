//! Placeholder classes built from an episode.
//!
//! Class nodes live on two synchronized graphs, one over visual centroids
//! and one over class attributes. Edge weights are a temperature softmax of
//! cosine similarity in each space, averaged across the two spaces, then
//! restricted to a random neighbour subset of size `n` and renormalized.
//! The same weights blend both spaces (propagation); each class is then
//! mixed with its blended counterpart using a Beta-distributed coefficient
//! (interpolation).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::Episode;
use crate::error::{Error, Result};
use crate::numerics::{cosine_matrix, softmax, Matrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HalluConfig {
    /// Softmax temperature over neighbour similarities.
    pub sigma: f64,
    /// Size of the random neighbour subset each class blends from.
    pub n: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub similarity: Similarity,
}

impl Default for HalluConfig {
    fn default() -> Self {
        HalluConfig {
            sigma: 0.2,
            n: 4,
            alpha1: 5.0,
            alpha2: 1.0,
            similarity: Similarity::Cosine,
        }
    }
}

impl HalluConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive, got {a}")));
            }
        }
        Ok(())
    }

    fn check_neighbors(&self, classes: usize) -> Result<()> {
        if self.n == 0 || self.n + 1 > classes {
            return Err(Error::Parameter(format!(
                "neighbour subset size n={} must lie in 1..={} for an episode of {classes} classes",
                self.n,
                classes.saturating_sub(1)
            )));
        }
        Ok(())
    }
}

/// How interpolation coefficients are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaPolicy {
    /// One draw from `Beta(alpha1, alpha2)` per class.
    Sample,
    /// The same coefficient for every class (`0.0` = propagation only).
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationWeights {
    /// Harmonized weights over all neighbours, before subset masking.
    pub harmonized: Matrix,
    /// Final weights: zero outside each row's chosen subset, rows sum to 1.
    pub w: Matrix,
    /// Chosen neighbour subset per row, in draw order.
    pub chosen: Vec<Vec<usize>>,
}

/// Row-wise softmax of `similarity / sigma` over `j ≠ i`, zero diagonal.
pub fn neighbor_softmax(similarity: &Matrix, sigma: f64) -> Result<Matrix> {
    let m = similarity.rows();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        let scores: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| similarity[(i, j)]).collect();
        if scores.is_empty() {
            continue;
        }
        let p = softmax(&scores, sigma)?;
        for (j, v) in (0..m).filter(|&j| j != i).zip(p) {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Mean of the per-space weight matrices.
pub fn harmonize(visual: &Matrix, semantic: &Matrix) -> Result<Matrix> {
    if visual.shape() != semantic.shape() {
        return Err(Error::Shape("weight matrices differ in shape".into()));
    }
    Ok(Matrix::from_fn(visual.rows(), visual.cols(), |i, j| {
        (visual[(i, j)] + semantic[(i, j)]) / 2.0
    }))
}

pub fn propagation_weights(
    ep: &Episode,
    cfg: &HalluConfig,
    rng: &mut RngStream,
) -> Result<PropagationWeights> {
    cfg.validate()?;
    let m = ep.num_classes();
    cfg.check_neighbors(m)?;
    let centroids = ep.centroids();
    let wv = neighbor_softmax(&cosine_matrix(&centroids, &centroids)?, cfg.sigma)?;
    let wa = neighbor_softmax(&cosine_matrix(ep.semantic(), ep.semantic())?, cfg.sigma)?;
    let harmonized = harmonize(&wv, &wa)?;

    let mut w = Matrix::zeros(m, m);
    let mut chosen = Vec::with_capacity(m);
    for i in 0..m {
        let neighbours: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let subset = rng.choose_distinct(&neighbours, cfg.n);
        let total: f64 = subset.iter().map(|&j| harmonized[(i, j)]).sum();
        for &j in &subset {
            w[(i, j)] = if total > 0.0 {
                harmonized[(i, j)] / total
            } else {
                1.0 / cfg.n as f64
            };
        }
        chosen.push(subset);
    }
    Ok(PropagationWeights {
        harmonized,
        w,
        chosen,
    })
}

/// Evidence that both spaces were blended with the same weights: the bit
/// pattern hash of the weight matrix each blend consumed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncRecord {
    pub visual_weights: u64,
    pub semantic_weights: u64,
}

impl SyncRecord {
    pub fn is_synchronized(&self) -> bool {
        self.visual_weights == self.semantic_weights
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagated {
    /// `v′`, one row per class.
    pub visual: Matrix,
    /// `a′`, one row per class.
    pub semantic: Matrix,
    pub sync: SyncRecord,
}

fn weights_hash(w: &Matrix) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in w.as_slice() {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// `out_i = Σ_{j ∈ chosen_i} w_ij · nodes_j`, plus the hash of `w`.
fn blend(w: &PropagationWeights, nodes: &Matrix) -> (Matrix, u64) {
    let mut out = Matrix::zeros(w.w.rows(), nodes.cols());
    for (i, subset) in w.chosen.iter().enumerate() {
        let dst = out.row_mut(i);
        for &j in subset {
            let wij = w.w[(i, j)];
            for (d, v) in dst.iter_mut().zip(nodes.row(j)) {
                *d += wij * v;
            }
        }
    }
    (out, weights_hash(&w.w))
}

pub fn propagate(ep: &Episode, w: &PropagationWeights) -> Result<Propagated> {
    let m = ep.num_classes();
    if w.w.shape() != (m, m) || w.chosen.len() != m {
        return Err(Error::Shape(format!(
            "weights are {}x{} for an episode of {m} classes",
            w.w.rows(),
            w.w.cols()
        )));
    }
    let (visual, vh) = blend(w, &ep.centroids());
    let (semantic, ah) = blend(w, ep.semantic());
    Ok(Propagated {
        visual,
        semantic,
        sync: SyncRecord {
            visual_weights: vh,
            semantic_weights: ah,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HallucinatedEpisode {
    /// `v″`, grouped by class like the source episode.
    pub visual: Matrix,
    /// `a″`, one row per class.
    pub semantic: Matrix,
    pub betas: Vec<f64>,
    pub elementary_visual: Matrix,
    pub elementary_semantic: Matrix,
    pub shots: usize,
    pub weights: Option<PropagationWeights>,
    pub sync: Option<SyncRecord>,
}

impl HallucinatedEpisode {
    pub fn num_classes(&self) -> usize {
        self.semantic.rows()
    }

    pub fn local_labels(&self) -> Vec<usize> {
        (0..self.visual.rows()).map(|r| r / self.shots).collect()
    }

    /// Plain-text dump of weights, elementary embeddings and coefficients.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let write_matrix = |s: &mut String, name: &str, m: &Matrix| {
            writeln!(s, "[{name}] {}x{}", m.rows(), m.cols()).unwrap();
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
                writeln!(s, "{}", cells.join(" ")).unwrap();
            }
        };
        if let Some(w) = &self.weights {
            write_matrix(&mut s, "weights", &w.w);
            writeln!(s, "[chosen]").unwrap();
            for (i, c) in w.chosen.iter().enumerate() {
                writeln!(s, "{i}: {c:?}").unwrap();
            }
        }
        write_matrix(&mut s, "elementary_visual", &self.elementary_visual);
        write_matrix(&mut s, "elementary_semantic", &self.elementary_semantic);
        let betas: Vec<String> = self.betas.iter().map(|b| format!("{b:.9e}")).collect();
        writeln!(s, "[betas]\n{}", betas.join(" ")).unwrap();
        s
    }
}

/// `β·x + (1−β)·y`, returning the endpoints themselves (signed zeros
/// included) at β = 1 and β = 0.
fn mix(beta: f64, x: f64, y: f64) -> f64 {
    if beta == 1.0 {
        x
    } else if beta == 0.0 {
        y
    } else {
        beta * x + (1.0 - beta) * y
    }
}

pub fn interpolate(
    ep: &Episode,
    elementary_visual: &Matrix,
    elementary_semantic: &Matrix,
    cfg: &HalluConfig,
    policy: BetaPolicy,
    rng: &mut RngStream,
) -> Result<HallucinatedEpisode> {
    let m = ep.num_classes();
    let n = ep.shots();
    if elementary_visual.shape() != (m, ep.visual().cols())
        || elementary_semantic.shape() != (m, ep.semantic().cols())
    {
        return Err(Error::Shape(format!(
            "elementary embeddings are {}x{} / {}x{}, episode needs {m}x{} / {m}x{}",
            elementary_visual.rows(),
            elementary_visual.cols(),
            elementary_semantic.rows(),
            elementary_semantic.cols(),
            ep.visual().cols(),
            ep.semantic().cols()
        )));
    }
    let betas = match policy {
        BetaPolicy::Sample => (0..m)
            .map(|_| rng.beta(cfg.alpha1, cfg.alpha2))
            .collect::<Result<Vec<_>>>()?,
        BetaPolicy::Fixed(b) if (0.0..=1.0).contains(&b) => vec![b; m],
        BetaPolicy::Fixed(b) => {
            return Err(Error::Parameter(format!("fixed beta {b} is outside [0, 1]")))
        }
    };

    let mut visual = Matrix::zeros(m * n, ep.visual().cols());
    for r in 0..m * n {
        let (class, beta) = (r / n, betas[r / n]);
        for ((d, v), e) in visual
            .row_mut(r)
            .iter_mut()
            .zip(ep.visual().row(r))
            .zip(elementary_visual.row(class))
        {
            *d = mix(beta, *v, *e);
        }
    }
    let semantic = Matrix::from_fn(m, ep.semantic().cols(), |i, d| {
        mix(betas[i], ep.semantic()[(i, d)], elementary_semantic[(i, d)])
    });
    Ok(HallucinatedEpisode {
        visual,
        semantic,
        betas,
        elementary_visual: elementary_visual.clone(),
        elementary_semantic: elementary_semantic.clone(),
        shots: n,
        weights: None,
        sync: None,
    })
}

/// Propagation followed by interpolation.
pub fn hallucinate(
    ep: &Episode,
    cfg: &HalluConfig,
    policy: BetaPolicy,
    rng: &mut RngStream,
) -> Result<HallucinatedEpisode> {
    let weights = propagation_weights(ep, cfg, rng)?;
    let prop = propagate(ep, &weights)?;
    let mut out = interpolate(ep, &prop.visual, &prop.semantic, cfg, policy, rng)?;
    out.weights = Some(weights);
    out.sync = Some(prop.sync);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(visual_rows: &[Vec<f64>], semantic_rows: &[Vec<f64>], shots: usize) -> Episode {
        let m = semantic_rows.len();
        Episode::from_parts(
            (0..m).collect(),
            shots,
            (0..m * shots).collect(),
            Matrix::from_rows(visual_rows).unwrap(),
            Matrix::from_rows(semantic_rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn two_classes_single_neighbour() {
        let ep = episode(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![1.0, 0.0], vec![0.6, 0.8]],
            1,
        );
        let cfg = HalluConfig { n: 1, ..HalluConfig::default() };
        let w = propagation_weights(&ep, &cfg, &mut RngStream::new(0)).unwrap();
        assert_eq!(w.w.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn equidistant_neighbours_split_evenly() {
        // class 0 at the origin direction, 1 and 2 symmetric around it
        let s = 0.5f64.sqrt();
        let rows = vec![vec![1.0, 0.0], vec![s, s], vec![s, -s]];
        let ep = episode(&rows, &rows, 1);
        let cfg = HalluConfig { n: 2, ..HalluConfig::default() };
        let w = propagation_weights(&ep, &cfg, &mut RngStream::new(1)).unwrap();
        assert_eq!(w.w[(0, 0)], 0.0);
        assert!((w.w[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((w.w[(0, 2)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn too_many_neighbours_is_an_error() {
        let ep = episode(&[vec![1.0], vec![2.0]], &[vec![1.0], vec![0.5]], 1);
        let cfg = HalluConfig { n: 2, ..HalluConfig::default() };
        assert!(matches!(
            propagation_weights(&ep, &cfg, &mut RngStream::new(0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn single_neighbour_copies() {
        let ep = episode(
            &[vec![1.0, 0.0], vec![3.0, 1.0], vec![0.0, 2.0], vec![0.0, 4.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            2,
        );
        let cfg = HalluConfig { n: 1, ..HalluConfig::default() };
        let w = propagation_weights(&ep, &cfg, &mut RngStream::new(0)).unwrap();
        let p = propagate(&ep, &w).unwrap();
        assert_eq!(p.visual.row(0), &[0.0, 3.0]);
        assert_eq!(p.visual.row(1), &[2.0, 0.5]);
        assert_eq!(p.semantic.row(0), &[0.0, 1.0]);
        assert!(p.sync.is_synchronized());
    }

    #[test]
    fn uniform_weights_give_plain_mean() {
        let ep = episode(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]],
            1,
        );
        let w = PropagationWeights {
            harmonized: Matrix::zeros(3, 3),
            w: Matrix::from_rows(&[
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
                vec![0.5, 0.5, 0.0],
            ])
            .unwrap(),
            chosen: vec![vec![1, 2], vec![0, 2], vec![0, 1]],
        };
        let p = propagate(&ep, &w).unwrap();
        assert_eq!(p.visual.row(0), &[1.0, 1.5]);
        assert_eq!(p.visual.row(2), &[0.5, 0.5]);
    }

    #[test]
    fn midpoint_interpolation() {
        let ep = episode(&[vec![2.0], vec![4.0]], &[vec![1.0], vec![-1.0]], 1);
        let v = Matrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let a = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let h = interpolate(
            &ep,
            &v,
            &a,
            &HalluConfig::default(),
            BetaPolicy::Fixed(0.5),
            &mut RngStream::new(0),
        )
        .unwrap();
        assert_eq!(h.visual.as_slice(), &[1.0, 2.0]);
        assert_eq!(h.semantic.as_slice(), &[0.5, 0.0]);
        assert!(interpolate(&ep, &v, &a, &HalluConfig::default(), BetaPolicy::Fixed(1.5), &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn dump_contains_sections() {
        let ep = episode(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]],
            1,
        );
        let cfg = HalluConfig { n: 1, ..HalluConfig::default() };
        let h = hallucinate(&ep, &cfg, BetaPolicy::Sample, &mut RngStream::new(3)).unwrap();
        let d = h.dump();
        for section in ["[weights]", "[chosen]", "[elementary_visual]", "[elementary_semantic]", "[betas]"] {
            assert!(d.contains(section), "{section}");
        }
    }
}
