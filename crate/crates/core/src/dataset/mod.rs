//! ZSL datasets: features, labels, class attributes and the seen/unseen
//! split, plus file formats, episode sampling and a synthetic benchmark.

mod episode;
mod io;
mod synth;

use std::collections::BTreeSet;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{norm, Matrix};

pub use episode::{sample_episode, AccessLog, Episode, EpisodeSampler, SeenOnlyView};
pub use io::{
    decode_matrix, encode_matrix, load_dataset, load_dataset_dir, read_matrix, save_dataset,
    write_matrix, DatasetFormat, DatasetPaths, MATRIX_MAGIC,
};
pub use synth::{generate_synthetic, generate_synthetic_with_truth, SynthConfig, SyntheticBenchmark};

/// Rows whose norm is within this distance of 1 are treated as already
/// normalized and kept bit-for-bit (covers `f32` rounding of unit rows).
const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// One L2-normalized attribute row per class id `0..L`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeTable {
    values: Matrix,
}

impl AttributeTable {
    pub fn new(values: Matrix) -> Result<Self> {
        let mut values = values;
        for k in 0..values.rows() {
            let n = norm(values.row(k));
            if n == 0.0 {
                return Err(Error::Validation(format!(
                    "attribute row for class {k} has zero norm"
                )));
            }
            if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                for v in values.row_mut(k) {
                    *v /= n;
                }
            }
        }
        Ok(AttributeTable { values })
    }

    pub fn num_classes(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, class: usize) -> &[f64] {
        self.values.row(class)
    }

    /// Attribute rows for `class_ids`, in order.
    pub fn select(&self, class_ids: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = class_ids.iter().find(|&&c| c >= self.num_classes()) {
            return Err(Error::Validation(format!(
                "class id {bad} is not in the attribute table ({} classes)",
                self.num_classes()
            )));
        }
        Ok(self.values.select_rows(class_ids))
    }
}

/// Class and sample partition of a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub train: Vec<usize>,
    pub test_seen: Vec<usize>,
    pub test_unseen: Vec<usize>,
}

/// Whether features are raw embeddings or have passed through a refiner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureStage {
    Raw,
    Refined,
}

/// Validated, immutable dataset. Labels, attributes and split are shared so
/// that derived datasets (see [`SplitDataset::with_features`]) reuse them.
#[derive(Clone, Debug)]
pub struct SplitDataset {
    features: Matrix,
    labels: Arc<[usize]>,
    attributes: Arc<AttributeTable>,
    split: Arc<Split>,
    stage: FeatureStage,
}

impl SplitDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        attributes: AttributeTable,
        split: Split,
    ) -> Result<Self> {
        let ds = SplitDataset {
            features,
            labels: labels.into(),
            attributes: Arc::new(attributes),
            split: Arc::new(split),
            stage: FeatureStage::Raw,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        let classes = self.attributes.num_classes();
        if self.labels.len() != n {
            return Err(Error::Validation(format!(
                "{} labels for {n} feature rows",
                self.labels.len()
            )));
        }
        if !self.features.is_finite() {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Validation(format!(
                "sample {i} has label {l} but only {classes} classes have attributes"
            )));
        }
        let s = &*self.split;
        let seen = id_set("seen", &s.seen, classes, "class id")?;
        let unseen = id_set("unseen", &s.unseen, classes, "class id")?;
        if let Some(c) = seen.intersection(&unseen).next() {
            return Err(Error::Validation(format!(
                "class {c} is listed as both seen and unseen"
            )));
        }
        let groups = [
            ("train", &s.train),
            ("test_seen", &s.test_seen),
            ("test_unseen", &s.test_unseen),
        ];
        let mut used = BTreeSet::new();
        for (name, idx) in groups {
            let set = id_set(name, idx, n, "sample index")?;
            if let Some(i) = set.iter().find(|i| used.contains(*i)) {
                return Err(Error::Validation(format!(
                    "sample {i} appears in more than one index set (again in {name})"
                )));
            }
            used.extend(set);
            let allowed = if name == "test_unseen" { &unseen } else { &seen };
            if let Some(&i) = idx.iter().find(|&&i| !allowed.contains(&self.labels[i])) {
                return Err(Error::Validation(format!(
                    "sample {i} in {name} has label {} which is not a{} class",
                    self.labels[i],
                    if name == "test_unseen" { "n unseen" } else { " seen" }
                )));
            }
        }
        Ok(())
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn labels_shared(&self) -> &Arc<[usize]> {
        &self.labels
    }

    pub fn attributes(&self) -> &AttributeTable {
        &self.attributes
    }

    pub fn attributes_shared(&self) -> &Arc<AttributeTable> {
        &self.attributes
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn split_shared(&self) -> &Arc<Split> {
        &self.split
    }

    pub fn stage(&self) -> FeatureStage {
        self.stage
    }

    pub fn num_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.attributes.num_classes()
    }

    /// A dataset sharing labels, attributes and split with `self` but with
    /// new features (same row count, any width).
    pub fn with_features(&self, features: Matrix, stage: FeatureStage) -> Result<Self> {
        if features.rows() != self.features.rows() {
            return Err(Error::Shape(format!(
                "replacement features have {} rows, dataset has {}",
                features.rows(),
                self.features.rows()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        Ok(SplitDataset {
            features,
            labels: Arc::clone(&self.labels),
            attributes: Arc::clone(&self.attributes),
            split: Arc::clone(&self.split),
            stage,
        })
    }

    /// Sample indices in `idx` with their labels.
    pub fn subset(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// SHA-256 over the canonical binary encoding of every component.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(encode_matrix(&self.features));
        for &l in self.labels.iter() {
            h.update((l as u64).to_le_bytes());
        }
        h.update(encode_matrix(self.attributes.values()));
        let s = &*self.split;
        for (tag, ids) in [
            (b"seen".as_slice(), &s.seen),
            (b"unseen", &s.unseen),
            (b"train", &s.train),
            (b"test_seen", &s.test_seen),
            (b"test_unseen", &s.test_unseen),
        ] {
            h.update(tag);
            h.update((ids.len() as u64).to_le_bytes());
            for &i in ids {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn id_set(name: &str, ids: &[usize], bound: usize, what: &str) -> Result<BTreeSet<usize>> {
    let mut set = BTreeSet::new();
    for &i in ids {
        if i >= bound {
            return Err(Error::Validation(format!(
                "{name} references {what} {i}, but only {bound} exist"
            )));
        }
        if !set.insert(i) {
            return Err(Error::Validation(format!("{name} lists {what} {i} twice")));
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (Matrix, Vec<usize>, AttributeTable, Split) {
        let features = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.1],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let attrs = AttributeTable::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let split = Split {
            seen: vec![0, 1],
            unseen: vec![2],
            train: vec![0, 1],
            test_seen: vec![2],
            test_unseen: vec![3],
        };
        (features, vec![0, 1, 0, 2], attrs, split)
    }

    #[test]
    fn valid_dataset_builds() {
        let (f, l, a, s) = tiny();
        let ds = SplitDataset::new(f, l, a, s).unwrap();
        assert_eq!(ds.num_classes(), 3);
        assert!((norm(ds.attributes().row(1)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_overlapping_classes() {
        let (f, l, a, mut s) = tiny();
        s.unseen.push(1);
        assert!(matches!(SplitDataset::new(f, l, a, s), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_unseen_label_in_train() {
        let (f, l, a, mut s) = tiny();
        s.test_unseen.clear();
        s.train.push(3);
        let err = SplitDataset::new(f, l, a, s).unwrap_err();
        assert!(err.to_string().contains("sample 3"), "{err}");
    }

    #[test]
    fn rejects_shared_indices_and_out_of_range_class() {
        let (f, l, a, mut s) = tiny();
        s.test_seen.push(0);
        assert!(SplitDataset::new(f.clone(), l.clone(), a.clone(), s).is_err());
        let (_, _, _, mut s) = tiny();
        s.unseen.push(3);
        let err = SplitDataset::new(f, l, a, s).unwrap_err();
        assert!(err.to_string().contains("class id 3"), "{err}");
    }

    #[test]
    fn zero_attribute_row_is_rejected() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(AttributeTable::new(m).is_err());
    }

    #[test]
    fn with_features_shares_metadata() {
        let (f, l, a, s) = tiny();
        let ds = SplitDataset::new(f.clone(), l, a, s).unwrap();
        let other = ds.with_features(f.scale(2.0), FeatureStage::Refined).unwrap();
        assert!(Arc::ptr_eq(ds.split_shared(), other.split_shared()));
        assert!(Arc::ptr_eq(ds.labels_shared(), other.labels_shared()));
        assert_eq!(other.stage(), FeatureStage::Refined);
        assert_ne!(ds.fingerprint(), other.fingerprint());
    }
}
