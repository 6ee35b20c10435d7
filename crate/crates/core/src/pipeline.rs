//! End-to-end run: embeddings and lexicon in, one map per discount factor out.
//!
//! ```text
//! <output_dir>/
//!   transition.csv
//!   manifest.json
//!   gamma_<g>/sr_gamma_<g>.csv, sr_gamma_<g>.json, model_gamma_<g>.json, train_gamma_<g>.json,
//!             predictions_gamma_<g>.csv, projection_gamma_<g>.csv,
//!             map_gamma_<g>.svg, gdv_gamma_<g>.json
//! ```
//!
//! Everything except the manifest timestamps and the SVG timestamp comment is
//! a deterministic function of the configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dataset::{build_examples, load_embeddings, load_lexicon, EmbeddingTable, Lexicon, Split};
use crate::error::{Error, Result};
use crate::io::{self, LabeledRow};
use crate::metrics::{gdv, GdvReport, LabeledPointSet};
use crate::neural::{predict_all, save_checkpoint, train, TrainReport};
use crate::projection::{classical_mds, pairwise_euclidean, smacof_refine, Projection};
use crate::sr::{build_transition_matrix_with, successor_matrix, TransitionMatrix, TransitionOptions};
use crate::svg::{render_svg, MapPoint};

/// GDV of the three groupings: all points, training words, validation words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitGdv {
    pub all: GdvReport,
    pub train: Option<GdvReport>,
    pub validation: Option<GdvReport>,
}

/// Contents of `gdv_gamma_<g>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdvFile {
    pub gamma: f64,
    /// Primary score: measured on the N-dimensional predictions.
    pub prediction_space: SplitGdv,
    /// For comparison only: measured on the 2-D MDS coordinates.
    pub projection_2d: SplitGdv,
    pub mds_stress: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaArtifacts {
    pub gamma: f64,
    pub seed: u64,
    pub successor: String,
    pub successor_json: String,
    pub model: String,
    pub train_report: String,
    pub predictions: String,
    pub projection: String,
    pub map: String,
    pub gdv: String,
    /// Prediction-space GDV values, repeated from the GDV file.
    pub gdv_all: f64,
    pub gdv_train: Option<f64>,
    pub gdv_validation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    /// Artifact paths below are relative to this directory.
    pub output_dir: PathBuf,
    pub transition: String,
    pub gammas: Vec<GammaArtifacts>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Every artifact path, relative to `output_dir`.
    pub fn artifacts(&self) -> Vec<&str> {
        let mut out = vec![self.transition.as_str()];
        for g in &self.gammas {
            out.extend([
                g.successor.as_str(),
                g.successor_json.as_str(),
                g.model.as_str(),
                g.train_report.as_str(),
                g.predictions.as_str(),
                g.projection.as_str(),
                g.map.as_str(),
                g.gdv.as_str(),
            ]);
        }
        out
    }
}

/// `{:?}` keeps a trailing `.0`, so 1 becomes `1.0`.
pub fn gamma_label(gamma: f64) -> String {
    format!("{gamma:?}")
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Files written so far, removed again if the run fails.
#[derive(Default)]
struct Written {
    files: Mutex<Vec<PathBuf>>,
    dirs: Mutex<Vec<PathBuf>>,
}

impl Written {
    fn file(&self, path: PathBuf) -> PathBuf {
        self.files.lock().unwrap().push(path.clone());
        path
    }

    fn dir(&self, path: &Path) -> Result<()> {
        if !path.exists() {
            io::create_dir(path)?;
            self.dirs.lock().unwrap().push(path.to_path_buf());
        }
        Ok(())
    }

    fn roll_back(&self) {
        for f in self.files.lock().unwrap().iter() {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.lock().unwrap().iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate()?;
    let written = Written::default();
    match run_inner(config, &written) {
        Ok(m) => Ok(m),
        Err(e) => {
            written.roll_back();
            Err(e)
        }
    }
}

fn run_inner(config: &PipelineConfig, written: &Written) -> Result<RunManifest> {
    let started_at = now();
    let table = load_embeddings(&config.embeddings_path).map_err(|e| e.in_stage("load embeddings"))?;
    let lex = load_lexicon(&config.lexicon_path).map_err(|e| e.in_stage("load lexicon"))?;
    if lex.n_states() == 0 {
        return Err(Error::invalid("lexicon has no training words").in_stage("load lexicon"));
    }
    let transition = build_transition_matrix_with(
        &table,
        &lex,
        TransitionOptions {
            zero_diagonal: config.zero_diagonal,
        },
    )
    .map_err(|e| e.in_stage("transition"))?;

    let out = &config.output_dir;
    written.dir(out)?;
    let transition_name = "transition.csv".to_string();
    io::write_matrix_csv(transition.values(), written.file(out.join(&transition_name)))?;

    // legs are independent; each writes only below its own directory
    let results: Vec<Result<GammaArtifacts>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .gammas
            .iter()
            .enumerate()
            .map(|(index, &gamma)| {
                let (table, lex, transition) = (&table, &lex, &transition);
                scope.spawn(move || run_leg(config, table, lex, transition, gamma, index, written))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pipeline leg panicked"))
            .collect()
    });
    let gammas = results.into_iter().collect::<Result<Vec<_>>>()?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        started_at,
        finished_at: now(),
        output_dir: out.clone(),
        transition: transition_name,
        gammas,
    };
    io::write_json(&manifest, written.file(out.join("manifest.json")))?;
    if let Some(missing) = manifest.artifacts().into_iter().find(|a| !out.join(a).is_file()) {
        return Err(Error::invalid(format!("artifact `{missing}` was not written")).in_stage("manifest"));
    }
    Ok(manifest)
}

fn run_leg(
    config: &PipelineConfig,
    table: &EmbeddingTable,
    lex: &Lexicon,
    transition: &TransitionMatrix,
    gamma: f64,
    index: usize,
    written: &Written,
) -> Result<GammaArtifacts> {
    let label = gamma_label(gamma);
    let dir_name = format!("gamma_{label}");
    let dir = config.output_dir.join(&dir_name);
    written.dir(&dir)?;
    let rel = |name: String| format!("{dir_name}/{name}");

    let sr = successor_matrix(transition, gamma, config.horizon).map_err(|e| e.in_stage("successor"))?;
    let successor = format!("sr_gamma_{label}.csv");
    io::write_matrix_csv(sr.values(), written.file(dir.join(&successor)))?;
    let successor_json = format!("sr_gamma_{label}.json");
    io::write_successor_json(&sr, written.file(dir.join(&successor_json)))?;

    let examples = build_examples(table, lex, &sr, Split::Train).map_err(|e| e.in_stage("examples"))?;
    let mut mlp = config.mlp.clone();
    mlp.input_dim = table.dim();
    mlp.output_dim = lex.n_states();
    mlp.seed = config.seed.wrapping_add(index as u64);
    let (model, report) = train(&mlp, &examples).map_err(|e| e.in_stage("train"))?;
    let model_name = format!("model_gamma_{label}.json");
    save_checkpoint(&model, transition.state_words(), written.file(dir.join(&model_name)))?;
    let train_name = format!("train_gamma_{label}.json");
    io::write_json(&report, written.file(dir.join(&train_name)))?;

    let entries: Vec<_> = lex.all().collect();
    let words: Vec<&str> = entries.iter().map(|(e, _)| e.word.as_str()).collect();
    let predictions = predict_all(&model, table, &words).map_err(|e| e.in_stage("predict"))?;
    let rows: Vec<LabeledRow> = entries
        .iter()
        .zip(&predictions)
        .map(|((e, split), p)| LabeledRow {
            word: e.word.clone(),
            category: e.category.clone(),
            split: *split,
            values: p.clone(),
        })
        .collect();
    let predictions_name = format!("predictions_gamma_{label}.csv");
    io::write_labeled_csv(transition.state_words(), &rows, written.file(dir.join(&predictions_name)))?;

    let projection = project(&predictions, config.smacof_iterations).map_err(|e| e.in_stage("project"))?;
    let map_points: Vec<MapPoint> = rows
        .iter()
        .zip(&projection.coordinates)
        .map(|(r, c)| MapPoint {
            word: r.word.clone(),
            category: r.category.clone(),
            split: r.split,
            x: c[0],
            y: c[1],
        })
        .collect();
    let projected_rows: Vec<LabeledRow> = map_points
        .iter()
        .map(|p| LabeledRow {
            word: p.word.clone(),
            category: p.category.clone(),
            split: p.split,
            values: vec![p.x, p.y],
        })
        .collect();
    let projection_name = format!("projection_gamma_{label}.csv");
    io::write_labeled_csv(
        &["x".to_string(), "y".to_string()],
        &projected_rows,
        written.file(dir.join(&projection_name)),
    )?;
    let map_name = format!("map_gamma_{label}.svg");
    render_svg(
        &map_points,
        &format!("gamma = {label}"),
        written.file(dir.join(&map_name)),
    )?;

    let gdv_file = GdvFile {
        gamma,
        prediction_space: split_gdv(&rows).map_err(|e| e.in_stage("gdv"))?,
        projection_2d: split_gdv(&projected_rows).map_err(|e| e.in_stage("gdv"))?,
        mds_stress: projection.stress,
    };
    let gdv_name = format!("gdv_gamma_{label}.json");
    io::write_json(&gdv_file, written.file(dir.join(&gdv_name)))?;

    let primary = &gdv_file.prediction_space;
    Ok(GammaArtifacts {
        gamma,
        seed: mlp.seed,
        successor: rel(successor),
        successor_json: rel(successor_json),
        model: rel(model_name),
        train_report: rel(train_name),
        predictions: rel(predictions_name),
        projection: rel(projection_name),
        map: rel(map_name),
        gdv: rel(gdv_name),
        gdv_all: primary.all.gdv,
        gdv_train: primary.train.as_ref().map(|r| r.gdv),
        gdv_validation: primary.validation.as_ref().map(|r| r.gdv),
    })
}

/// Euclidean distances between prediction vectors, classical MDS to 2-D,
/// then optional SMACOF refinement.
pub fn project(points: &[Vec<f64>], smacof_iterations: usize) -> Result<Projection> {
    let d = pairwise_euclidean(points)?;
    let p = classical_mds(&d, 2)?;
    if smacof_iterations > 0 {
        smacof_refine(&d, &p, smacof_iterations, 1e-9)
    } else {
        Ok(p)
    }
}

/// GDV over all rows and over each split. A split with no rows yields `None`.
pub fn split_gdv(rows: &[LabeledRow]) -> Result<SplitGdv> {
    let of = |split: Option<Split>| -> Result<Option<GdvReport>> {
        let chosen: Vec<&LabeledRow> = rows
            .iter()
            .filter(|r| split.is_none_or(|s| r.split == s))
            .collect();
        if chosen.is_empty() {
            return Ok(None);
        }
        let set = LabeledPointSet::new(
            chosen.iter().map(|r| r.values.clone()).collect(),
            chosen.iter().map(|r| r.category.clone()).collect(),
        )?;
        gdv(&set).map(Some)
    };
    Ok(SplitGdv {
        all: of(None)?.ok_or_else(|| Error::invalid("no points to score"))?,
        train: of(Some(Split::Train))?,
        validation: of(Some(Split::Validation))?,
    })
}

/// Reads back a leg's training report.
pub fn load_train_report(path: impl AsRef<Path>) -> Result<TrainReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_gdv_file(path: impl AsRef<Path>) -> Result<GdvFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
