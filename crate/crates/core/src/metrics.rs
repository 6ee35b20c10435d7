//! Generalized Discrimination Value (GDV) of a labeled point cloud.
//!
//! Every dimension is z-scored with the population standard deviation and
//! halved. The GDV is then the mean of the per-class mean intra-class
//! distances minus the mean of the per-pair mean inter-class distances,
//! divided by `sqrt(D)`. Zero means the classes overlap completely; more
//! negative means better separated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::euclidean;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPointSet {
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
    dim: usize,
}

impl LabeledPointSet {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        let dim = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        Ok(LabeledPointSet { points, labels, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Class names in order of first appearance, with member indices.
    pub fn classes(&self) -> Vec<(String, Vec<usize>)> {
        let mut classes: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, label) in self.labels.iter().enumerate() {
            match classes.iter_mut().find(|(name, _)| name == label) {
                Some((_, members)) => members.push(i),
                None => classes.push((label.clone(), vec![i])),
            }
        }
        classes
    }

    /// Subset by index, keeping order.
    pub fn select(&self, indices: &[usize]) -> LabeledPointSet {
        LabeledPointSet {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            dim: self.dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdvReport {
    pub gdv: f64,
    pub classes: Vec<String>,
    /// One entry per class, in `classes` order.
    pub mean_intra_per_class: Vec<f64>,
    /// Class pairs `(l, m)` with `l < m`, in lexicographic order.
    pub mean_inter_per_pair: Vec<f64>,
    pub dimension: usize,
}

/// `0.5 * (x - mean) / std` per dimension, population std. Constant
/// dimensions become zero.
pub fn zscore_half(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let dim = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: p.len(),
        });
    }
    let n = points.len() as f64;
    let mut out = vec![vec![0.0; dim]; points.len()];
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - mean) * (p[d] - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(points) {
            o[d] = 0.5 * (p[d] - mean) / std;
        }
    }
    Ok(out)
}

pub fn gdv(set: &LabeledPointSet) -> Result<GdvReport> {
    let classes = set.classes();
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "GDV needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    if let Some((name, _)) = classes.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::invalid(format!(
            "class `{name}` has fewer than 2 points"
        )));
    }
    if set.dim() == 0 {
        return Err(Error::invalid("points have no dimensions"));
    }
    let s = zscore_half(set.points())?;

    let mean_intra_per_class: Vec<f64> = classes
        .iter()
        .map(|(_, members)| {
            let mut sum = 0.0;
            for (k, &i) in members.iter().enumerate() {
                for &j in &members[k + 1..] {
                    sum += euclidean(&s[i], &s[j]);
                }
            }
            let n = members.len() as f64;
            2.0 * sum / (n * (n - 1.0))
        })
        .collect();

    let mut mean_inter_per_pair = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    for (l, (_, a)) in classes.iter().enumerate() {
        for (_, b) in &classes[l + 1..] {
            let mut sum = 0.0;
            for &i in a {
                for &j in b {
                    sum += euclidean(&s[i], &s[j]);
                }
            }
            mean_inter_per_pair.push(sum / (a.len() * b.len()) as f64);
        }
    }

    let intra = mean_intra_per_class.iter().sum::<f64>() / mean_intra_per_class.len() as f64;
    let inter = mean_inter_per_pair.iter().sum::<f64>() / mean_inter_per_pair.len() as f64;
    Ok(GdvReport {
        gdv: (intra - inter) / (set.dim() as f64).sqrt(),
        classes: classes.into_iter().map(|(name, _)| name).collect(),
        mean_intra_per_class,
        mean_inter_per_pair,
        dimension: set.dim(),
    })
}
