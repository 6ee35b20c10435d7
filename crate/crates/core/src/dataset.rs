//! Embedding tables, the labeled lexicon, and training/validation example sets.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sr::{cosine_similarity, normalize_rows, SuccessorMatrix};

/// Word → dense vector, all of one dimension. Insertion order is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: &[f64]) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite component for `{word}`")));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroNorm);
        }
        if self.index.contains_key(&word) {
            return Err(Error::DuplicateWord(word));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn vector(&self, word: &str) -> Result<&[f64]> {
        self.get(word)
            .ok_or_else(|| Error::MissingWord(word.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(w, v)| (w.as_str(), v))
    }
}

/// Parse a vector-text file: a `<count> <dimension>` header followed by one
/// `<word> <v1> ... <vD>` line per word.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), path)
}

pub fn parse_embeddings<R: Read>(reader: R, path: &Path) -> Result<EmbeddingTable> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "empty file, expected `<count> <dimension>`")),
    };
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [count, dim] => match (count.parse::<usize>(), dim.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(path, 1, format!("malformed header `{header}`"))),
        },
        _ => return Err(Error::parse(path, 1, format!("malformed header `{header}`"))),
    };

    let mut table = EmbeddingTable::new(dim)?;
    table.words.reserve(count);
    table.data.reserve(count * dim);
    let mut vector = Vec::with_capacity(dim);
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let word = fields.next().unwrap_or_default();
        vector.clear();
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                Error::parse(path, line_no, format!("`{field}` is not a number"))
            })?;
            if !value.is_finite() {
                return Err(Error::parse(path, line_no, "non-finite component"));
            }
            vector.push(value);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {dim} components, found {}", vector.len()),
            ));
        }
        table.insert(word, &vector).map_err(|e| match e {
            Error::ZeroNorm => Error::parse(path, line_no, format!("zero vector for `{word}`")),
            Error::DuplicateWord(w) => Error::parse(path, line_no, format!("duplicate word `{w}`")),
            other => other,
        })?;
    }
    Ok(table)
}

/// Write a table in vector-text format. Components are written with 17
/// significant digits so a reload reproduces them exactly.
pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    write_embeddings_with(table, path, |v| format!("{v:.16e}"))
}

pub(crate) fn write_embeddings_with(
    table: &EmbeddingTable,
    path: impl AsRef<Path>,
    fmt: impl Fn(f64) -> String,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{} {}", table.len(), table.dim()).map_err(io)?;
    for (word, vector) in table.iter() {
        let mut line = String::from(word);
        for &v in vector {
            line.push(' ');
            line.push_str(&fmt(v));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(Error::invalid(format!(
                "unknown split `{other}` (expected `train` or `validation`)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub category: String,
}

/// Labeled words. The training order defines state indices `0..N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    training: Vec<LexiconEntry>,
    validation: Vec<LexiconEntry>,
    categories: Vec<String>,
}

impl Lexicon {
    /// Categories are ordered by first appearance, training entries first.
    pub fn new(training: Vec<LexiconEntry>, validation: Vec<LexiconEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut categories: Vec<String> = Vec::new();
        for entry in training.iter().chain(&validation) {
            if entry.category.is_empty() {
                return Err(Error::invalid(format!("empty category for `{}`", entry.word)));
            }
            if !seen.insert(entry.word.as_str()) {
                return Err(Error::DuplicateWord(entry.word.clone()));
            }
            if !categories.contains(&entry.category) {
                categories.push(entry.category.clone());
            }
        }
        Ok(Lexicon {
            training,
            validation,
            categories,
        })
    }

    pub fn training(&self) -> &[LexiconEntry] {
        &self.training
    }

    pub fn validation(&self) -> &[LexiconEntry] {
        &self.validation
    }

    pub fn entries(&self, split: Split) -> &[LexiconEntry] {
        match split {
            Split::Train => &self.training,
            Split::Validation => &self.validation,
        }
    }

    /// Training entries followed by validation entries.
    pub fn all(&self) -> impl Iterator<Item = (&LexiconEntry, Split)> {
        self.training
            .iter()
            .map(|e| (e, Split::Train))
            .chain(self.validation.iter().map(|e| (e, Split::Validation)))
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Number of states, N.
    pub fn n_states(&self) -> usize {
        self.training.len()
    }

    pub fn state_words(&self) -> Vec<String> {
        self.training.iter().map(|e| e.word.clone()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct LexiconRecord {
    word: String,
    category: String,
    split: String,
}

/// Load a `word,category,split` CSV (header row required).
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(file, path)
}

pub fn parse_lexicon<R: Read>(reader: R, path: &Path) -> Result<Lexicon> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["word", "category", "split"] {
        return Err(Error::parse(path, 1, "expected header `word,category,split`"));
    }
    let mut training = Vec::new();
    let mut validation = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let rec: LexiconRecord = record.deserialize(Some(&headers))?;
        if rec.word.is_empty() {
            return Err(Error::parse(path, line, "empty word"));
        }
        if rec.category.is_empty() {
            return Err(Error::parse(path, line, format!("empty category for `{}`", rec.word)));
        }
        if !seen.insert(rec.word.clone()) {
            return Err(Error::parse(path, line, format!("duplicate word `{}`", rec.word)));
        }
        let split: Split = rec.split.parse().map_err(|e: Error| {
            Error::parse(path, line, e.to_string())
        })?;
        let entry = LexiconEntry {
            word: rec.word,
            category: rec.category,
        };
        match split {
            Split::Train => training.push(entry),
            Split::Validation => validation.push(entry),
        }
    }
    Lexicon::new(training, validation)
}

/// Inputs and SR-derived target distributions for one split.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub words: Vec<String>,
}

impl ExampleSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Training targets are the normalized SR rows of each state. A validation
/// word borrows the row of the training state it is most cosine-similar to;
/// those targets are diagnostic only.
pub fn build_examples(
    table: &EmbeddingTable,
    lex: &Lexicon,
    sr: &SuccessorMatrix,
    split: Split,
) -> Result<ExampleSet> {
    let n = lex.n_states();
    if sr.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: sr.n(),
        });
    }
    let rows = normalize_rows(sr)?;
    let entries = lex.entries(split);

    let mut set = ExampleSet {
        inputs: Vec::with_capacity(entries.len()),
        targets: Vec::with_capacity(entries.len()),
        labels: Vec::with_capacity(entries.len()),
        words: Vec::with_capacity(entries.len()),
    };
    let state_vectors = lex
        .training()
        .iter()
        .map(|e| table.vector(&e.word))
        .collect::<Result<Vec<_>>>()?;

    for (i, entry) in entries.iter().enumerate() {
        let input = table.vector(&entry.word)?;
        let state = match split {
            Split::Train => i,
            Split::Validation => nearest_state(input, &state_vectors)?,
        };
        set.inputs.push(input.to_vec());
        set.targets.push(rows.row(state).to_vec());
        set.labels.push(entry.category.clone());
        set.words.push(entry.word.clone());
    }
    Ok(set)
}

fn nearest_state(v: &[f64], states: &[&[f64]]) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in states.iter().enumerate() {
        let sim = cosine_similarity(v, s)?;
        if sim > best.1 {
            best = (i, sim);
        }
    }
    if states.is_empty() {
        return Err(Error::invalid("lexicon has no training states"));
    }
    Ok(best.0)
}

/// True when every component of `v` is non-negative and it sums to one.
pub fn is_distribution(v: &[f64], tol: f64) -> bool {
    v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}
