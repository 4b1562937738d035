use std::cell::RefCell;
use std::collections::BTreeSet;

use super::SplitDataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Every sample index and class id a [`SeenOnlyView`] handed out.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AccessLog {
    pub samples: BTreeSet<usize>,
    pub classes: BTreeSet<usize>,
}

/// Read access to a dataset restricted to training samples and seen-class
/// attributes. Any other request is an error, so code that trains through a
/// view cannot touch unseen classes or test data.
#[derive(Debug)]
pub struct SeenOnlyView<'a> {
    ds: &'a SplitDataset,
    is_train: Vec<bool>,
    is_seen: Vec<bool>,
    by_class: Vec<Vec<usize>>,
    log: Option<RefCell<AccessLog>>,
}

impl<'a> SeenOnlyView<'a> {
    pub fn new(ds: &'a SplitDataset) -> Self {
        let mut is_train = vec![false; ds.num_samples()];
        for &i in &ds.split().train {
            is_train[i] = true;
        }
        let mut is_seen = vec![false; ds.num_classes()];
        for &c in &ds.split().seen {
            is_seen[c] = true;
        }
        let mut by_class = vec![Vec::new(); ds.num_classes()];
        for &i in &ds.split().train {
            by_class[ds.labels()[i]].push(i);
        }
        SeenOnlyView {
            ds,
            is_train,
            is_seen,
            by_class,
            log: None,
        }
    }

    /// Same as [`SeenOnlyView::new`] but records every access.
    pub fn logged(ds: &'a SplitDataset) -> Self {
        let mut view = SeenOnlyView::new(ds);
        view.log = Some(RefCell::new(AccessLog::default()));
        view
    }

    pub fn access_log(&self) -> Option<AccessLog> {
        self.log.as_ref().map(|l| l.borrow().clone())
    }

    pub fn seen_classes(&self) -> &[usize] {
        &self.ds.split().seen
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.ds.split().train
    }

    pub fn train_indices_of(&self, class: usize) -> &[usize] {
        if class < self.is_seen.len() && self.is_seen[class] {
            &self.by_class[class]
        } else {
            &[]
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.ds.feature_dim()
    }

    pub fn attribute_dim(&self) -> usize {
        self.ds.attribute_dim()
    }

    pub fn stage(&self) -> super::FeatureStage {
        self.ds.stage()
    }

    pub fn feature_row(&self, idx: usize) -> Result<&'a [f64]> {
        if idx >= self.is_train.len() || !self.is_train[idx] {
            return Err(Error::Usage(format!(
                "sample {idx} is not a training sample"
            )));
        }
        if let Some(log) = &self.log {
            log.borrow_mut().samples.insert(idx);
        }
        Ok(self.ds.features().row(idx))
    }

    pub fn label(&self, idx: usize) -> Result<usize> {
        if idx >= self.is_train.len() || !self.is_train[idx] {
            return Err(Error::Usage(format!(
                "sample {idx} is not a training sample"
            )));
        }
        Ok(self.ds.labels()[idx])
    }

    pub fn attribute_row(&self, class: usize) -> Result<&'a [f64]> {
        if class >= self.is_seen.len() || !self.is_seen[class] {
            return Err(Error::Usage(format!("class {class} is not a seen class")));
        }
        if let Some(log) = &self.log {
            log.borrow_mut().classes.insert(class);
        }
        Ok(self.ds.attributes().row(class))
    }

    pub fn gather_features(&self, idx: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(idx.len() * self.feature_dim());
        for &i in idx {
            data.extend_from_slice(self.feature_row(i)?);
        }
        Matrix::from_vec(idx.len(), self.feature_dim(), data)
    }

    pub fn gather_attributes(&self, classes: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(classes.len() * self.attribute_dim());
        for &c in classes {
            data.extend_from_slice(self.attribute_row(c)?);
        }
        Matrix::from_vec(classes.len(), self.attribute_dim(), data)
    }
}

/// One episodic batch: `M` seen classes with `N` training samples each.
/// Visual rows are grouped by class: rows `m·N .. (m+1)·N` belong to
/// `class_ids[m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    class_ids: Vec<usize>,
    shots: usize,
    sample_idx: Vec<usize>,
    visual: Matrix,
    semantic: Matrix,
    local_labels: Vec<usize>,
}

impl Episode {
    pub fn from_parts(
        class_ids: Vec<usize>,
        shots: usize,
        sample_idx: Vec<usize>,
        visual: Matrix,
        semantic: Matrix,
    ) -> Result<Self> {
        let m = class_ids.len();
        if shots == 0 || m == 0 {
            return Err(Error::Parameter("episodes need at least one class and one shot".into()));
        }
        if visual.rows() != m * shots || sample_idx.len() != m * shots || semantic.rows() != m {
            return Err(Error::Shape(format!(
                "episode with {m} classes x {shots} shots got {} visual rows, {} indices and {} semantic rows",
                visual.rows(),
                sample_idx.len(),
                semantic.rows()
            )));
        }
        let local_labels = (0..m * shots).map(|r| r / shots).collect();
        Ok(Episode {
            class_ids,
            shots,
            sample_idx,
            visual,
            semantic,
            local_labels,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub fn sample_indices(&self) -> &[usize] {
        &self.sample_idx
    }

    pub fn visual(&self) -> &Matrix {
        &self.visual
    }

    pub fn semantic(&self) -> &Matrix {
        &self.semantic
    }

    pub fn local_labels(&self) -> &[usize] {
        &self.local_labels
    }

    /// Mean visual embedding of each episode class (`M × C`).
    pub fn centroids(&self) -> Matrix {
        let (m, c, n) = (self.num_classes(), self.visual.cols(), self.shots);
        let mut out = Matrix::zeros(m, c);
        for k in 0..m {
            let dst = out.row_mut(k);
            for s in 0..n {
                for (d, v) in dst.iter_mut().zip(self.visual.row(k * n + s)) {
                    *d += v;
                }
            }
            for d in dst.iter_mut() {
                *d /= n as f64;
            }
        }
        out
    }

    /// Reorders classes so that new class `i` is old class `perm[i]`.
    pub fn permute_classes(&self, perm: &[usize]) -> Result<Episode> {
        let m = self.num_classes();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..m).collect::<Vec<_>>() {
            return Err(Error::Parameter("not a permutation of the episode classes".into()));
        }
        let n = self.shots;
        let rows: Vec<usize> = perm.iter().flat_map(|&p| p * n..(p + 1) * n).collect();
        Episode::from_parts(
            perm.iter().map(|&p| self.class_ids[p]).collect(),
            n,
            rows.iter().map(|&r| self.sample_idx[r]).collect(),
            self.visual.select_rows(&rows),
            self.semantic.select_rows(perm),
        )
    }
}

/// Draws episodes from the training samples of seen classes.
#[derive(Debug)]
pub struct EpisodeSampler<'a> {
    view: SeenOnlyView<'a>,
}

impl<'a> EpisodeSampler<'a> {
    pub fn new(view: SeenOnlyView<'a>) -> Self {
        EpisodeSampler { view }
    }

    pub fn view(&self) -> &SeenOnlyView<'a> {
        &self.view
    }

    pub fn into_view(self) -> SeenOnlyView<'a> {
        self.view
    }

    /// Seen classes with at least `shots` training samples.
    pub fn eligible(&self, shots: usize) -> Vec<usize> {
        self.view
            .seen_classes()
            .iter()
            .copied()
            .filter(|&c| self.view.train_indices_of(c).len() >= shots)
            .collect()
    }

    pub fn sample(&self, classes: usize, shots: usize, rng: &mut RngStream) -> Result<Episode> {
        if classes == 0 || shots == 0 {
            return Err(Error::Parameter(format!(
                "episodes need M >= 1 and N >= 1, got M={classes}, N={shots}"
            )));
        }
        let eligible = self.eligible(shots);
        if eligible.len() < classes {
            return Err(Error::Capacity(format!(
                "need {classes} seen classes with at least {shots} training samples, only {} qualify ({} short)",
                eligible.len(),
                classes - eligible.len()
            )));
        }
        let class_ids = rng.choose_distinct(&eligible, classes);
        let mut sample_idx = Vec::with_capacity(classes * shots);
        for &c in &class_ids {
            sample_idx.extend(rng.choose_distinct(self.view.train_indices_of(c), shots));
        }
        let visual = self.view.gather_features(&sample_idx)?;
        let semantic = self.view.gather_attributes(&class_ids)?;
        Episode::from_parts(class_ids, shots, sample_idx, visual, semantic)
    }
}

pub fn sample_episode(
    ds: &SplitDataset,
    classes: usize,
    shots: usize,
    rng: &mut RngStream,
) -> Result<Episode> {
    EpisodeSampler::new(SeenOnlyView::new(ds)).sample(classes, shots, rng)
}
