use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn cogmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogmap"))
        .args(args)
        .env_remove("COGMAP_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gdv_of_hand_fixture() {
    let o = cogmap(&["gdv", "--input", p(&data("gdv_fixture.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(stdout(&o).trim(), "-0.8955");
}

#[test]
fn zero_gamma_successor_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogmap(&[
        "build-sr",
        "--config",
        p(&data("default.cfg")),
        "--gamma",
        "0",
        "--horizon",
        "5",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let sr = cogmap::io::read_matrix_csv(dir.path().join("sr_gamma_0.0.csv")).unwrap();
    assert_eq!(sr, cogmap::Matrix::identity(60));
    assert!(dir.path().join("transition.csv").is_file());
    assert!(dir.path().join("sr_gamma_0.0.json").is_file());
}

#[test]
fn validation_errors_exit_with_one() {
    let unknown = cogmap(&["gdv", "--frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(!unknown.stderr.is_empty());

    let missing = cogmap(&["gdv", "--input", "/nonexistent/points.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/points.csv"));

    let bad_key = cogmap(&["run", "--config", p(&data("default.cfg")), "--set", "colour=red"]);
    assert_eq!(bad_key.status.code(), Some(1));

    let bad_gamma = cogmap(&["run", "--config", p(&data("default.cfg")), "--gammas", "2.0"]);
    assert_eq!(bad_gamma.status.code(), Some(1));

    assert_eq!(cogmap(&["--help"]).status.code(), Some(0));
}

#[test]
fn diverging_training_is_an_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = data("default.cfg");
    let cfg = p(&cfg_path);
    let out = p(dir.path());
    let o = cogmap(&["build-sr", "--config", cfg, "--gamma", "1", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(0));
    let sr = dir.path().join("sr_gamma_1.0.json");
    let o = cogmap(&[
        "train", "--config", cfg, "--sr", p(&sr), "--output-dir", out, "--epochs", "3", "--learning-rate", "1e300",
    ]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn stagewise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = data("default.cfg");
    let cfg = p(&cfg_path);
    let out = p(dir.path());
    let ok = |args: &[&str]| {
        let o = cogmap(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {o:?}");
        o
    };
    ok(&["build-sr", "--config", cfg, "--output-dir", out]);
    let sr = dir.path().join("sr_gamma_1.0.json");
    let trained = ok(&["train", "--config", cfg, "--output-dir", out, "--sr", p(&sr), "--epochs", "5", "--seed", "3"]);
    assert!(stdout(&trained).contains("over 5 epochs"));
    let model = dir.path().join("model_gamma_1.0.json");
    assert!(dir.path().join("train_gamma_1.0.json").is_file());

    ok(&["predict", "--config", cfg, "--output-dir", out, "--model", p(&model)]);
    let predictions = dir.path().join("predictions.csv");
    let (columns, rows) = cogmap::io::read_labeled_csv(&predictions).unwrap();
    assert_eq!((columns.len(), rows.len()), (60, 90));

    let some = dir.path().join("some.csv");
    ok(&["predict", "--config", cfg, "--model", p(&model), "--words", "dog,sofa", "--out", p(&some)]);
    let (_, rows) = cogmap::io::read_labeled_csv(&some).unwrap();
    assert_eq!(rows.iter().map(|r| r.word.as_str()).collect::<Vec<_>>(), ["dog", "sofa"]);

    let projected = ok(&["project", "--config", cfg, "--output-dir", out, "--input", p(&predictions)]);
    assert!(stdout(&projected).starts_with("stress "));
    let svg = fs::read_to_string(dir.path().join("projection.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 90);

    let g = ok(&["gdv", "--input", p(&predictions), "--split", "validation", "--json", p(&dir.path().join("g.json"))]);
    let value: f64 = stdout(&g).trim().parse().unwrap();
    assert!(value.is_finite());
    assert!(dir.path().join("g.json").is_file());

    let unknown_word = cogmap(&["predict", "--config", cfg, "--model", p(&model), "--words", "unicorn"]);
    assert_eq!(unknown_word.status.code(), Some(1));
}

#[test]
fn run_uses_output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cogmap"))
        .args(["run", "--embeddings", p(&data("embeddings.txt")), "--lexicon", p(&data("lexicon.csv"))])
        .args(["--epochs", "3", "--seed", "9"])
        .env("COGMAP_OUTPUT_DIR", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("gamma"));
    assert!(dir.path().join("env-out/manifest.json").is_file());
    assert!(dir.path().join("env-out/gamma_0.3/map_gamma_0.3.svg").is_file());
}

#[test]
fn oracle_reports_agreement() {
    let o = cogmap(&[
        "oracle", "--config", p(&data("default.cfg")), "--gamma", "0.7", "--horizon", "3", "--start", "2", "--samples",
        "20000", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 62);
    assert!(text.contains("horse"));
}

#[test]
fn shipped_embeddings_regenerate_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("embeddings.txt");
    let o = cogmap(&["synth-embeddings", "--lexicon", p(&data("lexicon.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(fs::read(&out).unwrap() == fs::read(data("embeddings.txt")).unwrap());
}
