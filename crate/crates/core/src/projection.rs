//! Classical (Torgerson) multidimensional scaling.

use crate::error::{Error, Result};
use crate::linalg::{euclidean, symmetric_eigen, Matrix};

/// Symmetric, non-negative, zero-diagonal distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    values: Matrix,
}

impl DistanceMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::invalid("distance matrix must be square"));
        }
        let n = values.rows();
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("distance matrix diagonal entry {i} is not zero")));
            }
            for j in 0..i {
                let d = values[(i, j)];
                if d < 0.0 || !d.is_finite() {
                    return Err(Error::invalid(format!("invalid distance at ({i}, {j})")));
                }
                if d != values[(j, i)] {
                    return Err(Error::invalid(format!(
                        "distance matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// Each pair is computed once and mirrored, so the result is exactly
/// symmetric.
pub fn pairwise_euclidean(points: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: p.len(),
        });
    }
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d = euclidean(&points[i], &points[j]);
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    Ok(DistanceMatrix { values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// One row per source point.
    pub coordinates: Vec<Vec<f64>>,
    /// `sqrt(sum (d - d_hat)^2 / sum d^2)` over pairs `i < j`.
    pub stress: f64,
    /// All eigenvalues of the double-centered matrix, descending.
    pub eigenvalues: Vec<f64>,
}

impl Projection {
    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }
}

/// Double-centers `B = -1/2 J D^2 J`, takes the top `out_dim` eigenpairs and
/// scales each eigenvector by `sqrt(max(lambda, 0))`. Each output column is
/// flipped so its largest-magnitude entry is positive.
pub fn classical_mds(d: &DistanceMatrix, out_dim: usize) -> Result<Projection> {
    let n = d.n();
    if out_dim == 0 {
        return Err(Error::invalid("output dimension must be positive"));
    }
    if n < out_dim + 1 {
        return Err(Error::invalid(format!(
            "MDS to {out_dim} dimensions needs at least {} points, got {n}",
            out_dim + 1
        )));
    }
    let b = double_center(d.values());
    let eig = symmetric_eigen(&b)?;

    let mut coordinates = vec![vec![0.0; out_dim]; n];
    for k in 0..out_dim {
        let scale = eig.values[k].max(0.0).sqrt();
        let mut column: Vec<f64> = (0..n).map(|i| eig.vectors[(i, k)] * scale).collect();
        let pivot = column
            .iter()
            .copied()
            .reduce(|best, v| if v.abs() > best.abs() { v } else { best })
            .unwrap_or(0.0);
        if pivot < 0.0 {
            column.iter_mut().for_each(|v| *v = -*v);
        }
        for (row, v) in coordinates.iter_mut().zip(column) {
            row[k] = v;
        }
    }
    let stress = stress(d, &coordinates)?;
    Ok(Projection {
        coordinates,
        stress,
        eigenvalues: eig.values,
    })
}

fn double_center(d: &Matrix) -> Matrix {
    let n = d.rows();
    let mut sq = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sq[(i, j)] = d[(i, j)] * d[(i, j)];
        }
    }
    let row_means: Vec<f64> = sq.iter_rows().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    // D^2 is symmetric, so column means equal row means
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// Normalized residual between target distances and those of `coords`.
pub fn stress(d: &DistanceMatrix, coords: &[Vec<f64>]) -> Result<f64> {
    if coords.len() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            actual: coords.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d.n() {
        for j in 0..i {
            let target = d.values()[(i, j)];
            let diff = target - euclidean(&coords[i], &coords[j]);
            num += diff * diff;
            den += target * target;
        }
    }
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

/// SMACOF refinement by Guttman transforms, starting from `init`. Stops after
/// `max_iter` iterations or when raw stress improves by less than `tol`
/// relative. Returns the refined projection.
pub fn smacof_refine(d: &DistanceMatrix, init: &Projection, max_iter: usize, tol: f64) -> Result<Projection> {
    let n = d.n();
    if init.coordinates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: init.coordinates.len(),
        });
    }
    let dim = init.coordinates.first().map_or(0, Vec::len);
    let mut x = init.coordinates.clone();
    let mut prev = raw_stress(d, &x);
    for _ in 0..max_iter {
        let mut next = vec![vec![0.0; dim]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dist = euclidean(&x[i], &x[j]);
                let ratio = if dist > 0.0 { d.values()[(i, j)] / dist } else { 0.0 };
                for k in 0..dim {
                    next[i][k] += ratio * (x[i][k] - x[j][k]);
                }
            }
            for v in next[i].iter_mut() {
                *v /= n as f64;
            }
        }
        x = next;
        let current = raw_stress(d, &x);
        let done = prev - current < tol * prev.max(f64::MIN_POSITIVE);
        prev = current;
        if done {
            break;
        }
    }
    Ok(Projection {
        stress: stress(d, &x)?,
        coordinates: x,
        eigenvalues: init.eigenvalues.clone(),
    })
}

fn raw_stress(d: &DistanceMatrix, x: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..d.n() {
        for j in 0..i {
            let diff = d.values()[(i, j)] - euclidean(&x[i], &x[j]);
            s += diff * diff;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recovered(p: &Projection) -> DistanceMatrix {
        pairwise_euclidean(&p.coordinates).unwrap()
    }

    #[test]
    fn pairwise_examples() {
        let one = pairwise_euclidean(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(one.values(), &Matrix::zeros(1, 1));
        let two = pairwise_euclidean(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(two.values()[(0, 1)], 5.0);
        assert_eq!(two.values()[(1, 0)], 5.0);
        let line = pairwise_euclidean(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(
            (line.values()[(0, 1)], line.values()[(0, 2)], line.values()[(1, 2)]),
            (1.0, 3.0, 2.0)
        );
        assert!(pairwise_euclidean(&[vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn unit_square() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let d = pairwise_euclidean(&pts).unwrap();
        let p = classical_mds(&d, 2).unwrap();
        let r = recovered(&p);
        let mut got: Vec<f64> = (0..4).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| r.values()[(i, j)]).collect();
        got.sort_by(f64::total_cmp);
        let s2 = 2f64.sqrt();
        for (g, w) in got.iter().zip([1.0, 1.0, 1.0, 1.0, s2, s2]) {
            assert!((g - w).abs() < 1e-9);
        }
        assert!(p.stress < 1e-9);
    }

    #[test]
    fn regular_simplex_needs_three_dimensions() {
        let mut m = Matrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m[(i, j)] = 1.0;
                }
            }
        }
        let d = DistanceMatrix::new(m).unwrap();
        assert!(classical_mds(&d, 2).unwrap().stress > 1e-3);
        assert!(classical_mds(&d, 3).unwrap().stress < 1e-9);
    }

    #[test]
    fn input_validation() {
        let d = pairwise_euclidean(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(classical_mds(&d, 2).is_err());
        let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(asym).is_err());
        let diag = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(diag).is_err());
    }

    #[test]
    fn sign_convention_and_ordering() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 2.0, ((i * 7) % 5) as f64 * 0.3]).collect();
        let d = pairwise_euclidean(&pts).unwrap();
        let p = classical_mds(&d, 2).unwrap();
        for k in 0..2 {
            let col: Vec<f64> = p.coordinates.iter().map(|c| c[k]).collect();
            let pivot = col.iter().copied().reduce(|a, b| if b.abs() > a.abs() { b } else { a }).unwrap();
            assert!(pivot > 0.0);
        }
        let var = |k: usize| p.coordinates.iter().map(|c| c[k] * c[k]).sum::<f64>();
        assert!(var(0) >= var(1));
        assert_eq!(p, classical_mds(&d, 2).unwrap());
    }

    #[test]
    fn smacof_does_not_increase_stress() {
        let mut m = Matrix::zeros(5, 5);
        let raw = [[0.0, 1.0, 2.0, 1.5, 1.0], [1.0, 0.0, 1.2, 2.0, 1.1], [2.0, 1.2, 0.0, 1.0, 1.9], [1.5, 2.0, 1.0, 0.0, 1.3], [1.0, 1.1, 1.9, 1.3, 0.0]];
        for i in 0..5 {
            for j in 0..5 {
                m[(i, j)] = raw[i][j];
            }
        }
        let d = DistanceMatrix::new(m).unwrap();
        let start = classical_mds(&d, 2).unwrap();
        let refined = smacof_refine(&d, &start, 200, 1e-12).unwrap();
        assert!(refined.stress <= start.stress + 1e-12);
    }

    proptest! {
        #[test]
        fn rigid_motion_leaves_recovered_distances(
            raw in prop::collection::vec(-10.0f64..10.0, 16),
            angle in 0.0f64..std::f64::consts::TAU,
            dx in -50.0f64..50.0,
            dy in -50.0f64..50.0,
        ) {
            let pts: Vec<Vec<f64>> = raw.chunks(2).map(|c| c.to_vec()).collect();
            let (s, c) = angle.sin_cos();
            let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy]).collect();
            let a = recovered(&classical_mds(&pairwise_euclidean(&pts).unwrap(), 2).unwrap());
            let b = recovered(&classical_mds(&pairwise_euclidean(&moved).unwrap(), 2).unwrap());
            for (x, y) in a.values().as_slice().iter().zip(b.values().as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
