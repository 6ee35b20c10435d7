//! Multi-scale cognitive maps of word categories.
//!
//! Word embeddings define a similarity graph over a set of training words.
//! Its row-normalized form is a transition matrix, from which finite-horizon
//! successor representations are computed at several discount factors. A
//! small network learns to map an embedding to its successor row, and the
//! resulting predictions are projected with classical MDS and scored with
//! the Generalized Discrimination Value.

pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod projection;
pub mod sr;
pub mod svg;
pub mod synthetic;

pub use config::PipelineConfig;
pub use dataset::{
    build_examples, load_embeddings, load_lexicon, write_embeddings, EmbeddingTable, ExampleSet,
    Lexicon, LexiconEntry, Split,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{gdv, zscore_half, GdvReport, LabeledPointSet};
pub use neural::{
    forward, gradient_check, loss, predict_all, train, ForwardMode, MlpConfig, MlpModel, Optimizer,
    TrainReport,
};
pub use pipeline::{run_pipeline, RunManifest};
pub use projection::{classical_mds, pairwise_euclidean, DistanceMatrix, Projection};
pub use sr::{
    build_transition_matrix, cosine_similarity, normalize_rows, rollout_occupancy_oracle,
    successor_matrix, SuccessorMatrix, TransitionMatrix,
};
pub use svg::{render_svg, MapPoint};
