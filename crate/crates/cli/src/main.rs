use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cogmap::config::PipelineConfig;
use cogmap::io::{self, LabeledRow};
use cogmap::neural::{load_checkpoint, save_checkpoint};
use cogmap::pipeline::{gamma_label, project};
use cogmap::sr::{build_transition_matrix_with, rollout_occupancy_estimate, TransitionOptions};
use cogmap::synthetic::{synthetic_embeddings, write_rounded, SyntheticSpec, DISTRACTORS};
use cogmap::{
    build_examples, gdv, load_embeddings, load_lexicon, predict_all, run_pipeline, successor_matrix, train,
    Error, LabeledPointSet, MapPoint, Split, TransitionMatrix,
};

#[derive(Parser)]
#[command(name = "cogmap", version, about = "Successor-representation cognitive maps of word categories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Configuration file of `key = value` lines; flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    embeddings: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    lexicon: Option<PathBuf>,
    /// Defaults to $COGMAP_OUTPUT_DIR, then `cogmap-out`
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Any config key, e.g. `--set epochs=50`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the transition matrix and one successor matrix per gamma
    BuildSr {
        #[command(flatten)]
        common: Common,
        /// Comma-separated discount factors (default: the configured gammas)
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        zero_diagonal: bool,
    },
    /// Train a network on one successor matrix
    Train {
        #[command(flatten)]
        common: Common,
        /// Successor matrix JSON written by `build-sr`
        #[arg(long, value_name = "PATH")]
        sr: PathBuf,
        /// Checkpoint path (default: <output-dir>/model_gamma_<g>.json)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Predict successor distributions for lexicon words
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Comma-separated subset of lexicon words (default: all)
        #[arg(long, value_delimiter = ',')]
        words: Vec<String>,
        /// Predictions CSV (default: <output-dir>/predictions.csv)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Project predictions to 2-D with classical MDS and draw the map
    Project {
        #[command(flatten)]
        common: Common,
        /// Labeled CSV of prediction vectors
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Projection CSV (default: <output-dir>/projection.csv)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// SVG map (default: next to the projection CSV)
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
        #[arg(long)]
        smacof_iterations: Option<usize>,
    },
    /// Generalized Discrimination Value of a labeled CSV
    Gdv {
        #[command(flatten)]
        common: Common,
        /// CSV with columns word,category,split followed by one column per dimension
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Score only one split
        #[arg(long)]
        split: Option<Split>,
        /// Also write the full report as JSON
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Full pipeline for every configured gamma
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        zero_diagonal: bool,
    },
    /// Compare a successor row with a Monte Carlo rollout estimate
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Transition matrix CSV (default: built from the configured inputs)
        #[arg(long, value_name = "PATH")]
        transition: Option<PathBuf>,
        /// Discount factor (default: the first configured gamma)
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Regenerate the seeded synthetic embedding file
    SynthEmbeddings {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad input, 2 for failures inside the computation.
fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<Error>())
        .map_or(2, |err| if err.is_validation() { 1 } else { 2 })
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut c = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::with_env_defaults(),
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(p) = &common.embeddings {
        c.embeddings_path = p.clone();
    }
    if let Some(p) = &common.lexicon {
        c.lexicon_path = p.clone();
    }
    if let Some(p) = &common.output_dir {
        c.output_dir = p.clone();
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("`--set {kv}`: expected KEY=VALUE")))?;
        c.set(k.trim(), v.trim())?;
    }
    Ok(c)
}

fn transition_for(config: &PipelineConfig) -> Result<TransitionMatrix> {
    let table = load_embeddings(&config.embeddings_path)?;
    let lex = load_lexicon(&config.lexicon_path)?;
    let opts = TransitionOptions {
        zero_diagonal: config.zero_diagonal,
    };
    Ok(build_transition_matrix_with(&table, &lex, opts)?)
}

fn out_path(explicit: Option<PathBuf>, config: &PipelineConfig, name: &str) -> Result<PathBuf> {
    let path = explicit.unwrap_or_else(|| config.output_dir.join(name));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::create_dir(parent)?;
    }
    Ok(path)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::BuildSr {
            common,
            gamma,
            horizon,
            zero_diagonal,
        } => {
            let mut config = load_config(&common)?;
            if !gamma.is_empty() {
                config.gammas = gamma;
            }
            if let Some(h) = horizon {
                config.horizon = h;
            }
            config.zero_diagonal |= zero_diagonal;
            config.validate()?;
            let t = transition_for(&config)?;
            let path = out_path(None, &config, "transition.csv")?;
            io::write_matrix_csv(t.values(), &path)?;
            println!("{}", path.display());
            for &g in &config.gammas {
                let m = successor_matrix(&t, g, config.horizon)?;
                let label = gamma_label(g);
                let csv = out_path(None, &config, &format!("sr_gamma_{label}.csv"))?;
                io::write_matrix_csv(m.values(), &csv)?;
                let json = csv.with_extension("json");
                io::write_successor_json(&m, &json)?;
                println!("{}\n{}", csv.display(), json.display());
            }
        }

        Command::Train {
            common,
            sr,
            out,
            epochs,
            learning_rate,
        } => {
            let mut config = load_config(&common)?;
            if let Some(e) = epochs {
                config.mlp.epochs = e;
            }
            if let Some(lr) = learning_rate {
                config.mlp.learning_rate = lr;
            }
            config.validate()?;
            let m = io::read_successor_json(&sr)?;
            let table = load_embeddings(&config.embeddings_path)?;
            let lex = load_lexicon(&config.lexicon_path)?;
            if m.state_words() != lex.state_words().as_slice() {
                return Err(Error::invalid(format!(
                    "{}: state words do not match the training words of the lexicon",
                    sr.display()
                ))
                .into());
            }
            let examples = build_examples(&table, &lex, &m, Split::Train)?;
            let mut mlp = config.mlp.clone();
            mlp.input_dim = table.dim();
            mlp.output_dim = lex.n_states();
            mlp.seed = config.seed;
            let (model, report) = train(&mlp, &examples).context("training failed")?;
            let label = gamma_label(m.gamma());
            let path = out_path(out, &config, &format!("model_gamma_{label}.json"))?;
            save_checkpoint(&model, m.state_words(), &path)?;
            let report_path = path.with_file_name(format!("train_gamma_{label}.json"));
            io::write_json(&report, &report_path)?;
            let first = report.loss_per_epoch.first().copied().unwrap_or(f64::NAN);
            let last = report.loss_per_epoch.last().copied().unwrap_or(f64::NAN);
            println!("loss {first:.6} -> {last:.6} over {} epochs", report.loss_per_epoch.len());
            println!("{}", path.display());
        }

        Command::Predict {
            common,
            model,
            words,
            out,
        } => {
            let config = load_config(&common)?;
            let ckpt = load_checkpoint(&model)?;
            let table = load_embeddings(&config.embeddings_path)?;
            let lex = load_lexicon(&config.lexicon_path)?;
            let entries: Vec<_> = lex.all().collect();
            for w in &words {
                if !entries.iter().any(|(e, _)| &e.word == w) {
                    return Err(Error::invalid(format!("`{w}` is not in the lexicon")).into());
                }
            }
            let chosen: Vec<_> = entries
                .into_iter()
                .filter(|(e, _)| words.is_empty() || words.contains(&e.word))
                .collect();
            let names: Vec<&str> = chosen.iter().map(|(e, _)| e.word.as_str()).collect();
            let predictions = predict_all(&ckpt.model, &table, &names)?;
            let rows: Vec<LabeledRow> = chosen
                .iter()
                .zip(predictions)
                .map(|((e, split), values)| LabeledRow {
                    word: e.word.clone(),
                    category: e.category.clone(),
                    split: *split,
                    values,
                })
                .collect();
            let path = out_path(out, &config, "predictions.csv")?;
            io::write_labeled_csv(&ckpt.state_words, &rows, &path)?;
            println!("{}", path.display());
        }

        Command::Project {
            common,
            input,
            out,
            svg,
            smacof_iterations,
        } => {
            let config = load_config(&common)?;
            let (_, rows) = io::read_labeled_csv(&input)?;
            let points: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
            let p = project(&points, smacof_iterations.unwrap_or(config.smacof_iterations))?;
            let projected: Vec<LabeledRow> = rows
                .iter()
                .zip(&p.coordinates)
                .map(|(r, c)| LabeledRow {
                    values: c.clone(),
                    ..r.clone()
                })
                .collect();
            let path = out_path(out, &config, "projection.csv")?;
            io::write_labeled_csv(&["x".into(), "y".into()], &projected, &path)?;
            let svg_path = match svg {
                Some(s) => out_path(Some(s), &config, "")?,
                None => path.with_extension("svg"),
            };
            let map: Vec<MapPoint> = projected
                .iter()
                .map(|r| MapPoint {
                    word: r.word.clone(),
                    category: r.category.clone(),
                    split: r.split,
                    x: r.values[0],
                    y: r.values[1],
                })
                .collect();
            cogmap::render_svg(&map, &file_stem(&input), &svg_path)?;
            println!("stress {:.6}", p.stress);
            println!("{}\n{}", path.display(), svg_path.display());
        }

        Command::Gdv {
            common,
            input,
            split,
            json,
        } => {
            load_config(&common)?;
            let (_, rows) = io::read_labeled_csv(&input)?;
            let rows: Vec<LabeledRow> = rows
                .into_iter()
                .filter(|r| split.is_none_or(|s| r.split == s))
                .collect();
            let set = LabeledPointSet::new(
                rows.iter().map(|r| r.values.clone()).collect(),
                rows.iter().map(|r| r.category.clone()).collect(),
            )?;
            let report = gdv(&set)?;
            println!("{:.4}", report.gdv);
            if let Some(path) = json {
                io::write_json(&report, &path)?;
            }
        }

        Command::Run {
            common,
            gammas,
            horizon,
            epochs,
            zero_diagonal,
        } => {
            let mut config = load_config(&common)?;
            if !gammas.is_empty() {
                config.gammas = gammas;
            }
            if let Some(h) = horizon {
                config.horizon = h;
            }
            if let Some(e) = epochs {
                config.mlp.epochs = e;
            }
            config.zero_diagonal |= zero_diagonal;
            let manifest = run_pipeline(&config)?;
            println!("{:>8}  {:>8}  {:>8}  {:>10}", "gamma", "all", "train", "validation");
            let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            for g in &manifest.gammas {
                println!(
                    "{:>8}  {:>8.4}  {:>8}  {:>10}",
                    gamma_label(g.gamma),
                    g.gdv_all,
                    show(g.gdv_train),
                    show(g.gdv_validation)
                );
            }
            println!("{}", manifest.output_dir.join("manifest.json").display());
        }

        Command::Oracle {
            common,
            transition,
            gamma,
            horizon,
            start,
            samples,
        } => {
            let config = load_config(&common)?;
            let t = match transition {
                Some(path) => {
                    let values = io::read_matrix_csv(&path)?;
                    let words = (0..values.rows()).map(|i| format!("s{i}")).collect();
                    TransitionMatrix::from_matrix(values, words)?
                }
                None => transition_for(&config)?,
            };
            let gamma = gamma.unwrap_or(config.gammas[0]);
            let horizon = horizon.unwrap_or(config.horizon);
            let exact = successor_matrix(&t, gamma, horizon)?;
            let est = rollout_occupancy_estimate(&t, gamma, horizon, start, samples, config.seed)?;
            println!("{:<14} {:>12} {:>12} {:>10} {:>8}", "state", "exact", "rollout", "std_err", "z");
            let mut worst: f64 = 0.0;
            for (j, word) in t.state_words().iter().enumerate() {
                let m = exact.values()[(start, j)];
                let (mean, se) = (est.mean[j], est.std_error[j]);
                let z = if se > 0.0 { (mean - m) / se } else if mean == m { 0.0 } else { f64::INFINITY };
                worst = worst.max(z.abs());
                println!("{word:<14} {m:>12.6} {mean:>12.6} {se:>10.2e} {z:>8.2}");
            }
            println!("max |z| = {worst:.2} over {samples} samples");
        }

        Command::SynthEmbeddings { common, out } => {
            let config = load_config(&common)?;
            let lex = load_lexicon(&config.lexicon_path)?;
            let mut spec = SyntheticSpec::default();
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            let table = synthetic_embeddings(&lex, DISTRACTORS, &spec)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                io::create_dir(parent)?;
            }
            write_rounded(&table, &out)?;
            println!("{} words x {} dims -> {}", table.len(), table.dim(), out.display());
        }
    }
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "map".to_string(), |s| s.to_string_lossy().into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        let mut full = vec!["cogmap"];
        full.extend_from_slice(args);
        Cli::try_parse_from(full).unwrap().command
    }

    #[test]
    fn flags_override_defaults() {
        let Command::Run { common, gammas, .. } =
            parse(&["run", "--seed", "7", "--gammas", "0.5,1", "--set", "epochs=12", "--output-dir", "o"])
        else {
            panic!("expected run");
        };
        let c = load_config(&common).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.mlp.epochs, 12);
        assert_eq!(c.output_dir, PathBuf::from("o"));
        assert_eq!(gammas, vec![0.5, 1.0]);
    }

    #[test]
    fn malformed_override_is_a_validation_error() {
        let Command::Gdv { common, .. } = parse(&["gdv", "--input", "x.csv", "--set", "epochs"]) else {
            panic!("expected gdv");
        };
        let err = load_config(&common).unwrap_err();
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let internal: anyhow::Error = Error::NoConvergence { sweeps: 100 }.into();
        assert_eq!(exit_code(&internal), 2);
        let wrapped = anyhow::Error::from(Error::MissingWord("x".into())).context("predict");
        assert_eq!(exit_code(&wrapped), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 2);
    }
}
