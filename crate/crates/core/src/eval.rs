//! ZSL / GZSL inference and metrics.
//!
//! Accuracies are per-class top-1 averaged over classes, in `[0, 1]`.
//! GZSL scores use calibrated stacking: seen-class cosine scores are
//! lowered by `delta` before the argmax.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::SplitDataset;
use crate::error::{Error, Result};
use crate::numerics::{cosine_matrix, norm, MappingNet, Matrix};
use crate::prototype::project_with_net;

/// Argmax over columns of `scores` row `r`, ties to the smallest class id.
fn argmax_row(scores: &[f64], class_ids: &[usize], penalty: impl Fn(usize) -> f64) -> usize {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for (j, (&s, &id)) in scores.iter().zip(class_ids).enumerate() {
        let v = s - penalty(j);
        if v > best.0 || (v == best.0 && id < best.1) {
            best = (v, id);
        }
    }
    best.1
}

/// Cosine between every feature row and every prototype row.
pub fn cosine_scores(prototypes: &Matrix, features: &Matrix) -> Result<Matrix> {
    if prototypes.cols() != features.cols() {
        return Err(Error::Shape(format!(
            "prototypes have width {}, features {}",
            prototypes.cols(),
            features.cols()
        )));
    }
    cosine_matrix(features, prototypes)
}

pub fn zsl_predict(prototypes: &Matrix, class_ids: &[usize], features: &Matrix) -> Result<Vec<usize>> {
    if prototypes.rows() == 0 {
        return Err(Error::Parameter("no prototypes to predict from".into()));
    }
    if class_ids.len() != prototypes.rows() {
        return Err(Error::Validation(format!(
            "{} class ids for {} prototypes",
            class_ids.len(),
            prototypes.rows()
        )));
    }
    let scores = cosine_scores(prototypes, features)?;
    Ok(scores.row_iter().map(|row| argmax_row(row, class_ids, |_| 0.0)).collect())
}

pub fn gzsl_predict(
    prototypes: &Matrix,
    class_ids: &[usize],
    seen_mask: &[bool],
    features: &Matrix,
    delta: f64,
) -> Result<Vec<usize>> {
    if seen_mask.len() != prototypes.rows() || class_ids.len() != prototypes.rows() {
        return Err(Error::Validation(format!(
            "{} prototypes, {} class ids, {} mask entries",
            prototypes.rows(),
            class_ids.len(),
            seen_mask.len()
        )));
    }
    if prototypes.rows() == 0 {
        return Err(Error::Parameter("no prototypes to predict from".into()));
    }
    let scores = cosine_scores(prototypes, features)?;
    Ok(stacked_predictions(&scores, class_ids, seen_mask, delta))
}

fn stacked_predictions(scores: &Matrix, class_ids: &[usize], seen_mask: &[bool], delta: f64) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| argmax_row(row, class_ids, |j| if seen_mask[j] { delta } else { 0.0 }))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassAccuracy {
    /// Unweighted mean over classes with at least one sample.
    pub mean: f64,
    pub per_class: BTreeMap<usize, f64>,
}

pub fn per_class_accuracy(preds: &[usize], labels: &[usize], classes: &[usize]) -> Result<ClassAccuracy> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &l) in preds.iter().zip(labels) {
        if !classes.contains(&l) {
            return Err(Error::Validation(format!("label {l} is outside the evaluated class set")));
        }
        let e = tally.entry(l).or_default();
        e.1 += 1;
        if p == l {
            e.0 += 1;
        }
    }
    let per_class: BTreeMap<usize, f64> = tally
        .into_iter()
        .map(|(c, (hit, total))| (c, hit as f64 / total as f64))
        .collect();
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    Ok(ClassAccuracy { mean, per_class })
}

/// `2·U·S / (U + S)`, or 0 when both are 0.
pub fn harmonic_mean(u: f64, s: f64) -> f64 {
    if u + s == 0.0 {
        0.0
    } else {
        2.0 * u * s / (u + s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// ZSL accuracy on unseen test samples over unseen prototypes.
    pub t: Option<f64>,
    /// GZSL accuracy on unseen test samples.
    pub u: Option<f64>,
    /// GZSL accuracy on seen test samples.
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub delta: f64,
    pub per_class_zsl: BTreeMap<usize, f64>,
    pub per_class_gzsl: BTreeMap<usize, f64>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "delta,T,U,S,H";

    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
        format!("{:.4},{},{},{},{}", self.delta, f(self.t), f(self.u), f(self.s), f(self.h))
    }

    /// Percent with one decimal, for terminal output.
    pub fn summary(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "n/a".into(), |v| format!("{:.1}", 100.0 * v));
        format!(
            "T={} U={} S={} H={} (delta={:.2})",
            f(self.t),
            f(self.u),
            f(self.s),
            f(self.h),
            self.delta
        )
    }
}

/// Everything needed to score one dataset with one set of prototypes.
/// Cosine scores are computed once and reused across calibration values.
pub struct Scorer {
    class_ids: Vec<usize>,
    seen_mask: Vec<bool>,
    unseen_cols: Vec<usize>,
    unseen_ids: Vec<usize>,
    seen: Vec<usize>,
    unseen: Vec<usize>,
    test_seen_scores: Matrix,
    test_seen_labels: Vec<usize>,
    test_unseen_scores: Matrix,
    test_unseen_labels: Vec<usize>,
}

impl Scorer {
    pub fn new(net: &MappingNet, ds: &SplitDataset) -> Result<Self> {
        if net.input_dim() != ds.attribute_dim() || net.output_dim() != ds.feature_dim() {
            return Err(Error::Shape(format!(
                "model maps {} -> {}, dataset has attributes of width {} and features of width {}",
                net.input_dim(),
                net.output_dim(),
                ds.attribute_dim(),
                ds.feature_dim()
            )));
        }
        let split = ds.split();
        let class_ids: Vec<usize> = split.seen.iter().chain(&split.unseen).copied().collect();
        let seen_mask: Vec<bool> = (0..class_ids.len()).map(|j| j < split.seen.len()).collect();
        let prototypes = project_with_net(net, ds.attributes(), &class_ids)?;
        let (seen_x, test_seen_labels) = ds.subset(&split.test_seen);
        let (unseen_x, test_unseen_labels) = ds.subset(&split.test_unseen);
        Ok(Scorer {
            unseen_cols: (split.seen.len()..class_ids.len()).collect(),
            unseen_ids: split.unseen.clone(),
            seen: split.seen.clone(),
            unseen: split.unseen.clone(),
            test_seen_scores: cosine_scores(&prototypes, &seen_x)?,
            test_unseen_scores: cosine_scores(&prototypes, &unseen_x)?,
            class_ids,
            seen_mask,
            test_seen_labels,
            test_unseen_labels,
        })
    }

    pub fn report(&self, delta: f64) -> Result<EvalReport> {
        let (t, per_class_zsl) = if self.test_unseen_labels.is_empty() || self.unseen_ids.is_empty() {
            (None, BTreeMap::new())
        } else {
            let preds: Vec<usize> = self
                .test_unseen_scores
                .row_iter()
                .map(|row| {
                    let sub: Vec<f64> = self.unseen_cols.iter().map(|&j| row[j]).collect();
                    argmax_row(&sub, &self.unseen_ids, |_| 0.0)
                })
                .collect();
            let acc = per_class_accuracy(&preds, &self.test_unseen_labels, &self.unseen)?;
            (Some(acc.mean), acc.per_class)
        };
        let mut per_class_gzsl = BTreeMap::new();
        let u = if self.test_unseen_labels.is_empty() {
            None
        } else {
            let preds = stacked_predictions(&self.test_unseen_scores, &self.class_ids, &self.seen_mask, delta);
            let acc = per_class_accuracy(&preds, &self.test_unseen_labels, &self.unseen)?;
            per_class_gzsl.extend(acc.per_class);
            Some(acc.mean)
        };
        let s = if self.test_seen_labels.is_empty() {
            None
        } else {
            let preds = stacked_predictions(&self.test_seen_scores, &self.class_ids, &self.seen_mask, delta);
            let acc = per_class_accuracy(&preds, &self.test_seen_labels, &self.seen)?;
            per_class_gzsl.extend(acc.per_class);
            Some(acc.mean)
        };
        let h = match (u, s) {
            (Some(u), Some(s)) => Some(harmonic_mean(u, s)),
            _ => None,
        };
        Ok(EvalReport {
            t,
            u,
            s,
            h,
            delta,
            per_class_zsl,
            per_class_gzsl,
        })
    }
}

pub fn evaluate(net: &MappingNet, ds: &SplitDataset, delta: f64) -> Result<EvalReport> {
    Scorer::new(net, ds)?.report(delta)
}

/// `0.00, 0.02, …, 1.00`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 * 0.02).collect()
}

#[derive(Clone, Debug)]
pub struct CsSweep {
    pub reports: Vec<EvalReport>,
    pub best_index: usize,
}

impl CsSweep {
    pub fn best(&self) -> &EvalReport {
        &self.reports[self.best_index]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,U,S,H\n");
        let f = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
        for r in &self.reports {
            writeln!(s, "{:.4},{},{},{}", r.delta, f(r.u), f(r.s), f(r.h)).unwrap();
        }
        s
    }
}

/// Evaluates every calibration value and picks the one with the highest H
/// (ties to the smallest delta; missing H counts as lowest).
pub fn cs_sweep(net: &MappingNet, ds: &SplitDataset, grid: &[f64]) -> Result<CsSweep> {
    if grid.is_empty() {
        return Err(Error::Parameter("calibration grid is empty".into()));
    }
    let scorer = Scorer::new(net, ds)?;
    let reports = grid.iter().map(|&d| scorer.report(d)).collect::<Result<Vec<_>>>()?;
    let mut best_index = 0;
    for (i, r) in reports.iter().enumerate() {
        let better = match (r.h, reports[best_index].h) {
            (Some(h), Some(b)) => h > b || (h == b && r.delta < reports[best_index].delta),
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best_index = i;
        }
    }
    Ok(CsSweep { reports, best_index })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub class_ids: Vec<usize>,
    pub values: Matrix,
    /// Prototypes with zero norm; their off-diagonal similarities are 0.
    pub zero_norm: Vec<bool>,
}

impl SimilarityMatrix {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class_id");
        for id in &self.class_ids {
            write!(s, ",c{id}").unwrap();
        }
        s.push('\n');
        for (i, row) in self.values.row_iter().enumerate() {
            write!(s, "{}", self.class_ids[i]).unwrap();
            for v in row {
                write!(s, ",{v:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Mean of the off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> f64 {
        let k = self.values.rows();
        if k < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    total += self.values[(i, j)];
                }
            }
        }
        total / (k * (k - 1)) as f64
    }
}

pub fn prototype_similarity(prototypes: &Matrix, class_ids: &[usize]) -> Result<SimilarityMatrix> {
    let k = prototypes.rows();
    if k == 0 {
        return Err(Error::Parameter("no prototypes".into()));
    }
    if class_ids.len() != k {
        return Err(Error::Validation(format!("{} class ids for {k} prototypes", class_ids.len())));
    }
    let raw = cosine_matrix(prototypes, prototypes)?;
    let zero_norm: Vec<bool> = prototypes.row_iter().map(|r| norm(r) == 0.0).collect();
    let mut values = Matrix::zeros(k, k);
    for i in 0..k {
        values[(i, i)] = if zero_norm[i] { 0.0 } else { 1.0 };
        for j in i + 1..k {
            values[(i, j)] = raw[(i, j)];
            values[(j, i)] = raw[(i, j)];
        }
    }
    Ok(SimilarityMatrix {
        class_ids: class_ids.to_vec(),
        values,
        zero_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_class_examples() {
        // A = 0: 2/2, B = 1: 1/3
        let acc = per_class_accuracy(&[0, 0, 1, 0, 0], &[0, 0, 1, 1, 1], &[0, 1]).unwrap();
        assert!((acc.mean - 2.0 / 3.0).abs() < 1e-15);
        let imbalanced = per_class_accuracy(&[0, 0, 0, 0], &[0, 0, 0, 1], &[0, 1]).unwrap();
        assert_eq!(imbalanced.mean, 0.5);
        let perfect = per_class_accuracy(&[0, 1, 1, 1], &[0, 1, 1, 1], &[0, 1]).unwrap();
        assert_eq!(perfect.mean, 1.0);
        assert!(per_class_accuracy(&[0], &[5], &[0, 1]).is_err());
    }

    #[test]
    fn harmonic_mean_values() {
        assert!((harmonic_mean(74.6, 82.6) - 78.4).abs() < 0.05);
        assert!((harmonic_mean(76.0, 79.2) - 77.6).abs() < 0.05);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
        assert!((harmonic_mean(0.3, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn calibration_flips_to_unseen() {
        // seen class 0 scores 0.9, unseen class 1 scores 0.7
        let protos = Matrix::from_rows(&[vec![0.9, (1.0f64 - 0.81).sqrt()], vec![0.7, -(1.0f64 - 0.49).sqrt()]]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(gzsl_predict(&protos, &[0, 1], &[true, false], &x, 0.0).unwrap(), vec![0]);
        assert_eq!(gzsl_predict(&protos, &[0, 1], &[true, false], &x, 0.3).unwrap(), vec![1]);
        assert_eq!(gzsl_predict(&protos, &[0, 1], &[true, false], &x, 2.0).unwrap(), vec![1]);
        assert!(gzsl_predict(&protos, &[0, 1], &[true], &x, 0.0).is_err());
    }

    #[test]
    fn zsl_ties_and_edges() {
        let protos = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(zsl_predict(&protos, &[7, 3], &x).unwrap(), vec![3]);
        assert!(zsl_predict(&Matrix::zeros(0, 2), &[], &x).is_err());
        let single = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(zsl_predict(&single, &[4], &x).unwrap(), vec![4]);
    }

    #[test]
    fn similarity_of_orthogonal_prototypes_is_identity() {
        let s = prototype_similarity(&Matrix::identity(3), &[0, 1, 2]).unwrap();
        assert_eq!(s.values, Matrix::identity(3));
        let z = prototype_similarity(&Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap(), &[0, 1]).unwrap();
        assert_eq!(z.zero_norm, vec![true, false]);
        assert_eq!(z.values[(0, 1)], 0.0);
    }

    #[test]
    fn default_grid_has_51_points() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[50], 1.0);
    }
}
