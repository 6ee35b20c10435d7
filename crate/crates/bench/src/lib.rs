//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cogmap::{EmbeddingTable, Lexicon, LexiconEntry, Matrix, TransitionMatrix};

/// Random row-stochastic matrix of size `n`.
pub fn random_transition(n: usize, seed: u64) -> TransitionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let row = m.row_mut(i);
        row.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    TransitionMatrix::from_matrix(m, (0..n).map(|i| format!("s{i}")).collect()).unwrap()
}

/// `n` points in `dim` dimensions, cycling through `classes` labels.
pub fn random_points(n: usize, dim: usize, classes: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|i| (0..dim).map(|_| (i % classes) as f64 + rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|i| format!("c{}", i % classes)).collect();
    (points, labels)
}

/// A lexicon of `per_class` training words in each of `classes` categories,
/// with random embeddings of width `dim`.
pub fn random_corpus(classes: usize, per_class: usize, dim: usize, seed: u64) -> (EmbeddingTable, Lexicon) {
    let (points, labels) = random_points(classes * per_class, dim, classes, seed);
    let mut table = EmbeddingTable::new(dim).unwrap();
    let mut training = Vec::new();
    for (i, (p, l)) in points.iter().zip(labels).enumerate() {
        let word = format!("w{i}");
        table.insert(word.clone(), p).unwrap();
        training.push(LexiconEntry { word, category: l });
    }
    (table, Lexicon::new(training, Vec::new()).unwrap())
}
