//! Seeded generator for the bundled embedding file.
//!
//! Each word vector is `scale * (shared * g + category * c_k + noise * e)`
//! with `g` a direction common to all words, `c_k` one direction per
//! category and `e` word-specific noise, all standard normal. Words outside
//! the lexicon get their own random direction in place of `c_k`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{write_embeddings_with, EmbeddingTable, Lexicon};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub shared: f64,
    pub category: f64,
    pub noise: f64,
    pub scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dim: 300,
            shared: 0.3,
            category: 1.0,
            noise: 0.8,
            scale: 0.1,
            seed: 2023,
        }
    }
}

/// Unrelated nouns appended after the lexicon words.
pub const DISTRACTORS: &[&str] = &[
    "apple", "river", "music", "cloud", "pencil", "garden", "window", "candle", "mountain", "coffee",
];

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn synthetic_embeddings(lex: &Lexicon, extra: &[&str], spec: &SyntheticSpec) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = gaussian(&mut rng, spec.dim);
    let centers: Vec<Vec<f64>> = lex.categories().iter().map(|_| gaussian(&mut rng, spec.dim)).collect();

    let mut table = EmbeddingTable::new(spec.dim)?;
    let mut make = |word: &str, center: &[f64], rng: &mut ChaCha8Rng| -> Result<()> {
        let noise = gaussian(rng, spec.dim);
        let v: Vec<f64> = (0..spec.dim)
            .map(|d| spec.scale * (spec.shared * shared[d] + spec.category * center[d] + spec.noise * noise[d]))
            .collect();
        table.insert(word, &v)
    };
    for (entry, _) in lex.all() {
        let k = lex
            .categories()
            .iter()
            .position(|c| *c == entry.category)
            .expect("lexicon categories cover every entry");
        make(&entry.word, &centers[k], &mut rng)?;
    }
    for word in extra {
        let center = gaussian(&mut rng, spec.dim);
        make(word, &center, &mut rng)?;
    }
    Ok(table)
}

/// Writes with six decimals, the precision of common published vector files.
pub fn write_rounded(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    write_embeddings_with(table, path, |v| format!("{v:.6}"))
}
