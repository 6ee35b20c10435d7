//! Similarity-derived transition matrices and finite-horizon successor
//! representations.
//!
//! The transition matrix over training states is built from clamped cosine
//! similarities of their embeddings, row-normalized. The successor matrix of
//! scale `gamma` is the truncated discounted sum
//!
//! ```text
//! M = sum_{k=0}^{H} gamma^k T^k,   T^0 = I
//! ```
//!
//! Entry `M[s][s']` is the expected discounted number of visits to `s'` within
//! `H` steps of a walk started at `s`; [`rollout_occupancy_oracle`] estimates
//! the same quantity by sampling walks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{EmbeddingTable, Lexicon};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// `a·b / (|a||b|)`
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Row-stochastic matrix over the training states.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    values: Matrix,
    state_words: Vec<String>,
}

impl TransitionMatrix {
    pub fn from_matrix(values: Matrix, state_words: Vec<String>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::invalid("transition matrix must be square"));
        }
        if state_words.len() != values.rows() {
            return Err(Error::DimensionMismatch {
                expected: values.rows(),
                actual: state_words.len(),
            });
        }
        for (i, row) in values.iter_rows().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::invalid(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(TransitionMatrix {
            values,
            state_words,
        })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn state_words(&self) -> &[String] {
        &self.state_words
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransitionOptions {
    /// Drop self-transitions before normalizing.
    pub zero_diagonal: bool,
}

pub fn build_transition_matrix(table: &EmbeddingTable, lex: &Lexicon) -> Result<TransitionMatrix> {
    build_transition_matrix_with(table, lex, TransitionOptions::default())
}

/// `T[i][j] = max(0, cos(v_i, v_j)) / sum_k max(0, cos(v_i, v_k))`
pub fn build_transition_matrix_with(
    table: &EmbeddingTable,
    lex: &Lexicon,
    options: TransitionOptions,
) -> Result<TransitionMatrix> {
    let words = lex.state_words();
    let n = words.len();
    let vectors = words
        .iter()
        .map(|w| table.vector(w))
        .collect::<Result<Vec<_>>>()?;

    // similarities are computed once per unordered pair so the raw matrix is
    // exactly symmetric
    let mut raw = Matrix::zeros(n, n);
    for i in 0..n {
        raw[(i, i)] = if options.zero_diagonal { 0.0 } else { 1.0 };
        for j in 0..i {
            let sim = cosine_similarity(vectors[i], vectors[j])?.max(0.0);
            raw[(i, j)] = sim;
            raw[(j, i)] = sim;
        }
    }
    for (i, word) in words.iter().enumerate() {
        let row = raw.row_mut(i);
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroRow(word.clone()));
        }
        row.iter_mut().for_each(|p| *p /= sum);
    }
    TransitionMatrix::from_matrix(raw, words)
}

/// Truncated discounted successor matrix for one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessorMatrix {
    gamma: f64,
    horizon: usize,
    values: Matrix,
    state_words: Vec<String>,
}

impl SuccessorMatrix {
    pub fn new(values: Matrix, gamma: f64, horizon: usize, state_words: Vec<String>) -> Result<Self> {
        check_gamma(gamma)?;
        if !values.is_square() || values.rows() != state_words.len() {
            return Err(Error::DimensionMismatch {
                expected: state_words.len(),
                actual: values.rows(),
            });
        }
        if values.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("successor matrix entries must be finite and non-negative"));
        }
        Ok(SuccessorMatrix {
            gamma,
            horizon,
            values,
            state_words,
        })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn state_words(&self) -> &[String] {
        &self.state_words
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::invalid(format!("gamma must lie in [0, 1], got {gamma}")))
    }
}

/// Accumulates `gamma^k T^k` for `k = 0..=horizon` by repeated multiplication.
pub fn successor_matrix(t: &TransitionMatrix, gamma: f64, horizon: usize) -> Result<SuccessorMatrix> {
    check_gamma(gamma)?;
    let n = t.n();
    let mut m = Matrix::identity(n);
    if gamma > 0.0 {
        let mut power = Matrix::identity(n);
        let mut weight = 1.0;
        for _ in 0..horizon {
            power = power.matmul(t.values())?;
            weight *= gamma;
            m.add_scaled(&power, weight)?;
        }
    }
    SuccessorMatrix::new(m, gamma, horizon, t.state_words().to_vec())
}

/// Each row divided by its sum.
pub fn normalize_rows(m: &SuccessorMatrix) -> Result<Matrix> {
    let mut out = m.values().clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let sum: f64 = row.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::ZeroRow(m.state_words()[i].clone()));
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// Monte Carlo estimate of one successor row with its standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyEstimate {
    pub mean: Vec<f64>,
    /// Standard error of each component of `mean`.
    pub std_error: Vec<f64>,
    pub samples: usize,
}

/// Estimates `E[sum_{k=0}^{H} gamma^k 1(s_k = s') | s_0 = start]` by sampling
/// `samples` walks from `t`. Deterministic for a fixed seed.
pub fn rollout_occupancy_oracle(
    t: &TransitionMatrix,
    gamma: f64,
    horizon: usize,
    start: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    rollout_occupancy_estimate(t, gamma, horizon, start, samples, seed).map(|e| e.mean)
}

pub fn rollout_occupancy_estimate(
    t: &TransitionMatrix,
    gamma: f64,
    horizon: usize,
    start: usize,
    samples: usize,
    seed: u64,
) -> Result<OccupancyEstimate> {
    let n = t.n();
    if start >= n {
        return Err(Error::invalid(format!("start state {start} out of range 0..{n}")));
    }
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    if gamma == 0.0 || horizon == 0 {
        let mut mean = vec![0.0; n];
        mean[start] = 1.0;
        return Ok(OccupancyEstimate {
            mean,
            std_error: vec![0.0; n],
            samples,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut visits = vec![0.0; n];
    for _ in 0..samples {
        visits.iter_mut().for_each(|v| *v = 0.0);
        let mut state = start;
        let mut weight = 1.0;
        visits[state] += weight;
        for _ in 0..horizon {
            state = sample_next(t.values().row(state), rng.random());
            weight *= gamma;
            visits[state] += weight;
        }
        for ((s, q), v) in sum.iter_mut().zip(&mut sum_sq).zip(&visits) {
            *s += v;
            *q += v * v;
        }
    }

    let count = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    let std_error = if samples > 1 {
        sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = ((q - count * m * m) / (count - 1.0)).max(0.0);
                (var / count).sqrt()
            })
            .collect()
    } else {
        vec![f64::INFINITY; n]
    };
    Ok(OccupancyEstimate {
        mean,
        std_error,
        samples,
    })
}

fn sample_next(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    // rounding left the cumulative sum a hair below 1
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LexiconEntry;
    use proptest::prelude::*;

    fn flip() -> TransitionMatrix {
        TransitionMatrix::from_matrix(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn setup(vectors: &[&[f64]]) -> (EmbeddingTable, Lexicon) {
        let mut t = EmbeddingTable::new(vectors[0].len()).unwrap();
        let mut entries = Vec::new();
        for (i, v) in vectors.iter().enumerate() {
            t.insert(format!("w{i}"), v).unwrap();
            entries.push(LexiconEntry {
                word: format!("w{i}"),
                category: "c".into(),
            });
        }
        (t, Lexicon::new(entries, vec![]).unwrap())
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn single_state_transition() {
        let (t, lex) = setup(&[&[0.3, 0.4]]);
        let tm = build_transition_matrix(&t, &lex).unwrap();
        assert_eq!(tm.values().to_rows(), vec![vec![1.0]]);
    }

    #[test]
    fn orthogonal_states_give_identity() {
        let (t, lex) = setup(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let tm = build_transition_matrix(&t, &lex).unwrap();
        assert_eq!(tm.values(), &Matrix::identity(2));
        // without self-transitions an isolated state cannot be normalized
        let err = build_transition_matrix_with(&t, &lex, TransitionOptions { zero_diagonal: true });
        assert!(matches!(err, Err(Error::ZeroRow(w)) if w == "w0"));
    }

    #[test]
    fn negative_similarity_is_clamped() {
        let (t, lex) = setup(&[&[1.0, 0.0], &[-1.0, 0.1]]);
        let tm = build_transition_matrix(&t, &lex).unwrap();
        assert_eq!(tm.values(), &Matrix::identity(2));
    }

    #[test]
    fn three_state_row_normalization() {
        // unit vectors with pairwise cosines 0.8 (0,1), 0.2 (0,2), 0.5 (1,2)
        let v0 = [1.0, 0.0, 0.0];
        let v1 = [0.8, 0.6, 0.0];
        let y = (0.5 - 0.2 * 0.8) / 0.6;
        let v2 = [0.2, y, (1.0_f64 - 0.04 - y * y).sqrt()];
        let (t, lex) = setup(&[&v0, &v1, &v2]);
        let tm = build_transition_matrix(&t, &lex).unwrap();
        let row0 = tm.values().row(0);
        for (got, want) in row0.iter().zip([0.5, 0.4, 0.1]) {
            assert!((got - want).abs() < 1e-12, "{row0:?}");
        }
    }

    #[test]
    fn transition_is_scale_free() {
        let (t1, lex) = setup(&[&[1.0, 0.2, 0.1], &[0.3, 1.0, 0.0], &[0.5, 0.5, 0.5]]);
        let (t2, _) = setup(&[&[7.0, 1.4, 0.7], &[2.1, 7.0, 0.0], &[3.5, 3.5, 3.5]]);
        let a = build_transition_matrix(&t1, &lex).unwrap();
        let b = build_transition_matrix(&t2, &lex).unwrap();
        for (x, y) in a.values().as_slice().iter().zip(b.values().as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_chain_closed_form() {
        // I + 0.5 T + 0.25 T^2 with T^2 = I
        let m = successor_matrix(&flip(), 0.5, 2).unwrap();
        assert_eq!(m.values().to_rows(), vec![vec![1.25, 0.5], vec![0.5, 1.25]]);
        let rows = normalize_rows(&m).unwrap();
        assert!((rows[(0, 0)] - 1.25 / 1.75).abs() < 1e-15);
        assert!((rows[(0, 1)] - 0.5 / 1.75).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_is_identity() {
        let m = successor_matrix(&flip(), 0.0, 7).unwrap();
        assert_eq!(m.values(), &Matrix::identity(2));
        assert!(successor_matrix(&flip(), 1.5, 2).is_err());
        assert!(successor_matrix(&flip(), -0.1, 2).is_err());
    }

    #[test]
    fn normalize_examples() {
        let words = vec!["a".to_string(), "b".to_string()];
        let id = SuccessorMatrix::new(Matrix::identity(2), 0.0, 0, words.clone()).unwrap();
        assert_eq!(normalize_rows(&id).unwrap(), Matrix::identity(2));
        let m = SuccessorMatrix::new(
            Matrix::from_rows(&[vec![2.0, 2.0], vec![0.0, 0.0]]).unwrap(),
            0.5,
            1,
            words,
        )
        .unwrap();
        assert!(matches!(normalize_rows(&m), Err(Error::ZeroRow(w)) if w == "b"));
        let m = SuccessorMatrix::new(
            Matrix::from_rows(&[vec![2.0, 2.0], vec![1.0, 0.0]]).unwrap(),
            0.5,
            1,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(normalize_rows(&m).unwrap().row(0), &[0.5, 0.5]);
    }

    #[test]
    fn oracle_gamma_zero_is_exact_one_hot() {
        let est = rollout_occupancy_oracle(&flip(), 0.0, 5, 1, 3, 9).unwrap();
        assert_eq!(est, vec![0.0, 1.0]);
    }

    #[test]
    fn oracle_absorbing_chain() {
        let t = TransitionMatrix::from_matrix(Matrix::identity(3), vec!["a".into(), "b".into(), "c".into()])
            .unwrap();
        let est = rollout_occupancy_oracle(&t, 0.5, 2, 2, 10, 1).unwrap();
        assert_eq!(est, vec![0.0, 0.0, 1.75]);
    }

    #[test]
    fn oracle_matches_closed_form_on_lazy_chain() {
        let t = TransitionMatrix::from_matrix(
            Matrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap(),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let m = successor_matrix(&t, 0.7, 4).unwrap();
        let est = rollout_occupancy_oracle(&t, 0.7, 4, 0, 100_000, 3).unwrap();
        for (a, b) in est.iter().zip(m.values().row(0)) {
            assert!((a - b).abs() < 0.02, "{est:?} vs {:?}", m.values().row(0));
        }
        assert_eq!(est, rollout_occupancy_oracle(&t, 0.7, 4, 0, 100_000, 3).unwrap());
    }

    fn stochastic(n: usize, raw: &[f64]) -> TransitionMatrix {
        let mut m = Matrix::from_vec(n, n, raw[..n * n].to_vec()).unwrap();
        for i in 0..n {
            let row = m.row_mut(i);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        TransitionMatrix::from_matrix(m, (0..n).map(|i| format!("s{i}")).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn row_sums_follow_geometric_series(
            raw in prop::collection::vec(0.01f64..1.0, 25),
            gamma in 0.0f64..=1.0,
            horizon in 0usize..8,
        ) {
            let t = stochastic(5, &raw);
            let m = successor_matrix(&t, gamma, horizon).unwrap();
            let expected: f64 = (0..=horizon).map(|k| gamma.powi(k as i32)).sum();
            for row in m.values().iter_rows() {
                prop_assert!(row.iter().all(|&v| v >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - expected).abs() < 1e-6);
            }
        }

        #[test]
        fn consecutive_horizons_differ_by_last_term(
            raw in prop::collection::vec(0.01f64..1.0, 16),
            gamma in 0.0f64..=1.0,
            horizon in 1usize..8,
        ) {
            let t = stochastic(4, &raw);
            let hi = successor_matrix(&t, gamma, horizon).unwrap();
            let lo = successor_matrix(&t, gamma, horizon - 1).unwrap();
            let mut power = Matrix::identity(4);
            for _ in 0..horizon {
                power = power.matmul(t.values()).unwrap();
            }
            let w = gamma.powi(horizon as i32);
            for i in 0..4 {
                for j in 0..4 {
                    let d = hi.values()[(i, j)] - lo.values()[(i, j)];
                    prop_assert!((d - w * power[(i, j)]).abs() < 1e-9);
                }
            }
        }
    }
}
