//! Nearest-neighbour and nearest-centroid classifiers over standardized
//! vectors. They certify that an encoding separates the classes; they are
//! not meant to compete with the language models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("no training examples")]
    EmptyClass,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} labels for {1} vectors")]
    LabelCount(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in input vector")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    Knn { k: usize },
    NearestCentroid,
}

/// Per-dimension mean and standard deviation of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    pub kind: ClassifierKind,
    pub scaler: Standardizer,
    /// Standardized training rows.
    pub rows: Vec<Vec<f64>>,
    /// Class index of each training row.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Standardized class means, indexed by class.
    pub centroids: Vec<Vec<f64>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fits a classifier. Labels are class indices; every index below the
/// largest one must occur at least once.
pub fn fit(vectors: &[Vec<f64>], labels: &[usize], kind: ClassifierKind) -> Result<FittedClassifier, BaselineError> {
    if vectors.is_empty() {
        return Err(BaselineError::EmptyClass);
    }
    if vectors.len() != labels.len() {
        return Err(BaselineError::LabelCount(labels.len(), vectors.len()));
    }
    let d = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(BaselineError::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    if let ClassifierKind::Knn { k } = kind {
        if k == 0 || k > vectors.len() {
            return Err(BaselineError::InvalidParameter(format!(
                "k = {k} must be in 1..={}",
                vectors.len()
            )));
        }
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    let mut counts = vec![0usize; num_classes];
    labels.iter().for_each(|&l| counts[l] += 1);
    if counts.contains(&0) {
        return Err(BaselineError::EmptyClass);
    }

    let scaler = Standardizer::fit(vectors);
    let rows: Vec<Vec<f64>> = vectors.iter().map(|v| scaler.apply(v)).collect();
    let mut centroids = vec![vec![0.0; d]; num_classes];
    for (r, &l) in rows.iter().zip(labels) {
        for (c, v) in centroids[l].iter_mut().zip(r) {
            *c += v;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(FittedClassifier {
        kind,
        scaler,
        rows,
        labels: labels.to_vec(),
        num_classes,
        centroids,
    })
}

impl FittedClassifier {
    pub fn dim(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Centroids mapped back to input units.
    pub fn raw_centroids(&self) -> Vec<Vec<f64>> {
        self.centroids
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&self.scaler.mean)
                    .zip(&self.scaler.std)
                    .map(|((v, m), s)| v * s + m)
                    .collect()
            })
            .collect()
    }

    pub fn predict(&self, vector: &[f64]) -> Result<usize, BaselineError> {
        if vector.len() != self.dim() {
            return Err(BaselineError::DimensionMismatch {
                expected: self.dim(),
                got: vector.len(),
            });
        }
        let z = self.scaler.apply(vector);
        Ok(match self.kind {
            ClassifierKind::NearestCentroid => {
                let mut best = (f64::INFINITY, 0);
                for (c, centroid) in self.centroids.iter().enumerate() {
                    let d = sq_dist(&z, centroid);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            }
            ClassifierKind::Knn { k } => self.vote(&z, k),
        })
    }

    /// Majority vote among the k nearest rows (distance ties broken by row
    /// order); vote ties go to the smallest summed distance, then the lowest
    /// class index.
    fn vote(&self, z: &[f64], k: usize) -> usize {
        let mut dists: Vec<(f64, usize)> = self.rows.iter().enumerate().map(|(i, r)| (sq_dist(z, r), i)).collect();
        dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![(0usize, 0.0f64); self.num_classes];
        for &(d, i) in &dists[..k] {
            let v = &mut votes[self.labels[i]];
            v.0 += 1;
            v.1 += d.sqrt();
        }
        let mut best = 0;
        for c in 1..self.num_classes {
            let (n, s) = votes[c];
            let (bn, bs) = votes[best];
            if n > bn || (n == bn && s < bs) {
                best = c;
            }
        }
        best
    }

    pub fn predict_many(&self, vectors: &[Vec<f64>]) -> Result<Vec<usize>, BaselineError> {
        vectors.par_iter().map(|v| self.predict(v)).collect()
    }

    pub fn accuracy(&self, vectors: &[Vec<f64>], labels: &[usize]) -> Result<f64, BaselineError> {
        if vectors.is_empty() {
            return Err(BaselineError::EmptyClass);
        }
        let preds = self.predict_many(vectors)?;
        let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / vectors.len() as f64)
    }
}
