use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn emodyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emodyn"))
        .args(args)
        .env_remove("EMODYN_WORKERS")
        .output()
        .expect("spawn emodyn")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let (lex, source, songs) = (
        f.join("lexicons"),
        f.join("headlines.tsv"),
        f.join("songs.jsonl"),
    );
    let model = dir.path().join("model.tsv");
    let preds = dir.path().join("preds.tsv");
    let smoothed = dir.path().join("smoothed.tsv");
    let dynamics = dir.path().join("dynamics.csv");
    let svg = dir.path().join("dynamics.svg");
    let williams = dir.path().join("williams.csv");

    ok(&emodyn(&[
        "train-verse",
        "--lexicons",
        s(&lex),
        "--source",
        s(&source),
        "--out",
        s(&model),
    ]));
    ok(&emodyn(&[
        "predict-verse",
        "--lexicons",
        s(&lex),
        "--model",
        s(&model),
        "--songs",
        s(&songs),
        "--out",
        s(&preds),
    ]));
    ok(&emodyn(&[
        "smooth",
        "--predictions",
        s(&preds),
        "--songs",
        s(&songs),
        "--mode",
        "smoother",
        "--out",
        s(&dynamics),
        "--predictions-out",
        s(&smoothed),
    ]));
    let eval = emodyn(&[
        "evaluate",
        "--predictions",
        s(&smoothed),
        "--songs",
        s(&songs),
        "--compare",
        s(&preds),
        "--williams-out",
        s(&williams),
    ]);
    ok(&eval);
    let report = String::from_utf8(eval.stdout).unwrap();
    assert!(report.starts_with("scope,emotion,r,n\n"));
    assert_eq!(report.lines().count(), 7);
    assert_eq!(
        std::fs::read_to_string(&williams).unwrap().lines().count(),
        7
    );

    ok(&emodyn(&[
        "plot",
        "--dynamics",
        s(&dynamics),
        "--format",
        "svg",
        "--out",
        s(&svg),
    ]));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn staged_prediction_matches_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let out = dir.path().join("run");
    ok(&emodyn(&[
        "pipeline",
        "--config",
        s(&f.join("pipeline.conf")),
        "--out",
        s(&out),
        "--mode",
        "verse-only",
    ]));
    let preds = dir.path().join("preds.tsv");
    ok(&emodyn(&[
        "predict-verse",
        "--lexicons",
        s(&f.join("lexicons")),
        "--model",
        s(&out.join("model.tsv")),
        "--songs",
        s(&f.join("songs.jsonl")),
        "--out",
        s(&preds),
    ]));
    assert_eq!(
        std::fs::read_to_string(&preds).unwrap(),
        std::fs::read_to_string(out.join("predictions.tsv")).unwrap()
    );
}

#[test]
fn flags_override_set_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let out = dir.path().join("run");
    ok(&emodyn(&[
        "pipeline",
        "--config",
        s(&f.join("pipeline.conf")),
        "--out",
        s(&out),
        "--set",
        "mode=filter",
        "--set",
        "A=3",
        "-A",
        "0.5",
    ]));
    let params = std::fs::read_to_string(out.join("params.csv")).unwrap();
    let row: Vec<&str> = params.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..3], ["0", "anger", "0.5"]);
    assert_eq!(params.lines().count(), 7);
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let out = dir.path().join("sweep");
    ok(&emodyn(&[
        "pipeline",
        "--config",
        s(&f.join("pipeline.conf")),
        "--out",
        s(&out),
        "--sweep",
        "A=0.5,2",
        "--n-iter",
        "2",
    ]));
    for v in ["sweep-A=0.5", "sweep-A=2"] {
        assert!(out.join(v).join("williams.csv").is_file(), "{v}");
    }
}

#[test]
fn exit_codes() {
    let f = fixtures();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(emodyn(&["--help"]).status.code(), Some(0));
    assert_eq!(emodyn(&["no-such-command"]).status.code(), Some(1));

    let missing = emodyn(&[
        "evaluate",
        "--predictions",
        "/nonexistent.tsv",
        "--songs",
        "/nonexistent",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nonexistent"));

    let too_many_folds = emodyn(&[
        "pipeline",
        "--config",
        s(&f.join("pipeline.conf")),
        "--out",
        s(&out),
        "--k",
        "6",
    ]);
    assert_eq!(too_many_folds.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&too_many_folds.stderr).contains("folds"));

    let bad = emodyn(&[
        "pipeline",
        "--config",
        s(&f.join("pipeline.conf")),
        "--out",
        s(&out),
        "-R",
        "-1",
    ]);
    assert_eq!(bad.status.code(), Some(1));

    let workers = Command::new(env!("CARGO_BIN_EXE_emodyn"))
        .args(["plot", "--dynamics", "/nonexistent.csv", "--out", s(&out)])
        .env("EMODYN_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(workers.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&workers.stderr).contains("EMODYN_WORKERS"));
}

#[test]
fn numeric_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds.tsv");
    std::fs::write(
        &preds,
        "song_id\tverse_id\tanger\tdisgust\tfear\tjoy\tsadness\tsurprise\n\
         a\t1\t1\t2\t3\t4\t5\t6\na\t2\t2\t3\t4\t5\t6\t7\n",
    )
    .unwrap();
    // C = 0 and R = 0 leave a zero innovation variance.
    let out = emodyn(&[
        "smooth",
        "--predictions",
        s(&preds),
        "--mode",
        "filter",
        "-C",
        "0",
        "-R",
        "0",
        "--out",
        s(&dir.path().join("d.csv")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}
