use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hybridcast::pipeline::{AugmentSpec, PipelineConfig, TrainSettings};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybridcast"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SPEC: &str = r#"{"id":"s","freq":"month","length":96,
  "trend":{"kind":"linear","slope":0.3,"intercept":50},
  "season":{"kind":"cosine","period":12,"amplitude":5},
  "noise":{"kind":"gaussian","sigma":0.5}}"#;

fn with_data(dir: &Path) {
    fs::write(dir.join("spec.json"), SPEC).unwrap();
    let o = run(
        dir,
        &[
            "simulate",
            "--spec",
            "spec.json",
            "--count",
            "3",
            "--seed",
            "4",
            "-o",
            "data/a.jsonl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["forecast", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage:"), "{}", stderr(&o));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "decompose",
            "--input",
            "absent/series.jsonl",
            "-o",
            "out.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent/series.jsonl"), "{}", stderr(&o));
    assert!(!dir.path().join("out.jsonl").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    with_data(dir.path());
    fs::write(dir.path().join("cfg.json"), r#"{"train":{"stpes":3}}"#).unwrap();
    let o = run(
        dir.path(),
        &[
            "train-tsfm",
            "--data",
            "data",
            "--config",
            "cfg.json",
            "-o",
            "m.json",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stpes"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_3_with_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    with_data(dir.path());
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"model":{"optimizer":{"lr":1e300}},"train":{"steps":20,"grad_clip":null}}"#,
    )
    .unwrap();
    let o = run(
        dir.path(),
        &[
            "train-tsfm",
            "--data",
            "data",
            "--config",
            "cfg.json",
            "-o",
            "out/m.json",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let ckpt = dir.path().join("out/m.checkpoint.json");
    assert!(
        stderr(&o).contains("out/m.checkpoint.json"),
        "{}",
        stderr(&o)
    );
    assert!(hybridcast_tsfm::Params::load(&ckpt).is_ok());
    assert!(!dir.path().join("out/m.json").exists());
}

#[test]
fn subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    with_data(d);
    let ok = |args: &[&str]| {
        let o = run(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    ok(&[
        "augment",
        "--strategy",
        "mbb",
        "--input",
        "data/a.jsonl",
        "--variants",
        "1",
        "-o",
        "data/b.jsonl",
    ]);
    for s in ["freq", "dba", "mixup"] {
        ok(&[
            "augment",
            "--strategy",
            s,
            "--input",
            "data/a.jsonl",
            "-o",
            &format!("{s}.jsonl"),
        ]);
    }
    ok(&["decompose", "--input", "data/a.jsonl", "-o", "dec.jsonl"]);
    let dec = fs::read_to_string(d.join("dec.jsonl")).unwrap();
    assert_eq!(dec.lines().count(), 3);
    ok(&[
        "dro-weights",
        "--datasets",
        "data",
        "--steps",
        "20",
        "--update-every",
        "10",
        "-o",
        "w.json",
    ]);
    let w: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("w.json")).unwrap()).unwrap();
    let total: f64 = w["weights"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(w["trajectory"].as_array().unwrap().len(), 3);

    ok(&[
        "train-tsfm",
        "--data",
        "data",
        "--dro",
        "--steps",
        "30",
        "--seed",
        "2",
        "-o",
        "m/model.json",
    ]);
    assert!(d.join("m/model.training.json").exists());
    ok(&[
        "forecast",
        "--model",
        "m/model.json",
        "--input",
        "data/a.jsonl",
        "--horizon",
        "6",
        "-o",
        "fc.jsonl",
    ]);
    let row: serde_json::Value = serde_json::from_str(
        fs::read_to_string(d.join("fc.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(row["point"].as_array().unwrap().len(), 6);
    assert_eq!(row["start"], "2008-01-01T00:00:00Z");

    fs::write(
        d.join("pool.json"),
        r#"{"members":[{"kind":"seasonal_naive"},{"kind":"ar"},{"kind":"tsfm","model":"m/model.json"}]}"#,
    )
    .unwrap();
    for mode in ["router", "linear", "average"] {
        let f = format!("fz/{mode}.json");
        ok(&[
            "fuse-train",
            "--pool",
            "pool.json",
            "--mode",
            mode,
            "--data",
            "data",
            "--origins",
            "3",
            "-o",
            &f,
        ]);
        ok(&[
            "fuse",
            "--fusion",
            &f,
            "--input",
            "data/a.jsonl",
            "-o",
            &format!("fz/{mode}.jsonl"),
        ]);
    }
    let fusion = fs::read_to_string(d.join("fz/router.json")).unwrap();
    assert!(fusion.contains("\"tsfm\""));

    fs::write(d.join("ar.json"), r#"{"kind":"ar","name":"auto_ar"}"#).unwrap();
    fs::write(
        d.join("s1.json"),
        r#"{"order":2,"intercept":0.0,"coef":[1.0,0.0],"residual_std":1.0}"#,
    )
    .unwrap();
    ok(&[
        "coordinate",
        "--s1",
        "s1.json",
        "--large",
        "m/model.json",
        "--data",
        "data/a.jsonl",
        "--tau",
        "0.9",
        "-o",
        "co",
    ]);
    for f in ["s2.json", "routes.jsonl", "coordination.json"] {
        assert!(d.join("co").join(f).exists(), "{f}");
    }
    ok(&[
        "evaluate",
        "--models",
        "ar.json,m/model.json,s1.json",
        "--data",
        "data",
        "--origins",
        "2",
        "-o",
        "rep.csv",
    ]);
    let csv = fs::read_to_string(d.join("rep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv.lines().any(|l| l.starts_with("auto_ar,a,")));
    assert!(d.join("rep.json").exists());

    let info = ok(&["info"]);
    assert!(String::from_utf8_lossy(&info.stdout).contains("\"version\""));
}

#[test]
fn duplicate_model_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    with_data(dir.path());
    fs::create_dir(dir.path().join("x")).unwrap();
    fs::write(dir.path().join("ar.json"), r#"{"kind":"ar"}"#).unwrap();
    fs::write(dir.path().join("x/ar.json"), r#"{"kind":"naive"}"#).unwrap();
    let o = run(
        dir.path(),
        &[
            "evaluate",
            "--models",
            "ar.json,x/ar.json",
            "--data",
            "data",
            "-o",
            "r.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

fn tiny_pipeline() -> PipelineConfig {
    let mut cfg = PipelineConfig::example();
    for s in &mut cfg.data.simulate {
        s.count = 2;
        s.spec.length = 96;
    }
    cfg.model.d_model = 16;
    cfg.model.d_ff = 32;
    cfg.model.n_layers = 1;
    cfg.train = TrainSettings {
        steps: 20,
        batch_size: 4,
        ..TrainSettings::default()
    };
    cfg.augment.push(AugmentSpec::Dba {
        k: 1,
        per_cluster: 1,
    });
    cfg.fusion.origins = 3;
    cfg.evaluation.origins = 2;
    cfg
}

#[test]
fn pipeline_run_directory_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.json"),
        serde_json::to_string(&tiny_pipeline()).unwrap(),
    )
    .unwrap();
    for out in ["r1", "r2"] {
        let o = run(d, &["run-pipeline", "--config", "cfg.json", "-o", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let names = [
        "config.resolved.json",
        "inventory.csv",
        "model.json",
        "training.json",
        "dro_weights.json",
        "forecasts.jsonl",
        "fusion.json",
        "s1.json",
        "s2.json",
        "coordination.json",
        "report.csv",
        "report.json",
        "run.json",
        "stages.log",
    ];
    for n in names {
        let a = fs::read(d.join("r1").join(n)).unwrap_or_else(|_| panic!("{n} missing"));
        assert_eq!(a, fs::read(d.join("r2").join(n)).unwrap(), "{n} differs");
    }
    let inv = fs::read_to_string(d.join("r1/inventory.csv")).unwrap();
    let lines: Vec<&str> = inv.lines().collect();
    assert_eq!(lines[0], "provenance,datasets,entries,points");
    // 3 simulated sets, 3 mbb sets, 3 dba sets; one mixup set of 4.
    assert_eq!(lines[2].split(',').nth(1), Some("9"));
    assert_eq!(
        lines[3],
        "mixup,1,4,".to_string() + lines[3].split(',').nth(3).unwrap()
    );
    let total: Vec<usize> = lines[4]
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    let sum = |col: usize| {
        lines[1..4]
            .iter()
            .map(|l| l.split(',').nth(col).unwrap().parse::<usize>().unwrap())
            .sum::<usize>()
    };
    assert_eq!(total, vec![sum(1), sum(2), sum(3)]);

    let o = run(
        d,
        &[
            "run-pipeline",
            "--config",
            "cfg.json",
            "--seed",
            "99",
            "-o",
            "r3",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_ne!(
        fs::read(d.join("r1/model.json")).unwrap(),
        fs::read(d.join("r3/model.json")).unwrap()
    );
}

#[test]
fn pipeline_failure_names_the_stage_and_completed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut cfg = tiny_pipeline();
    cfg.coordination.dataset = Some("missing".into());
    fs::write(d.join("cfg.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = run(d, &["run-pipeline", "--config", "cfg.json", "-o", "r"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("stage `coordinate` failed"), "{err}");
    assert!(
        err.contains("fusion.json") && err.contains("model.json"),
        "{err}"
    );
}

#[test]
fn pipeline_config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"seed":1,"evalution":{}}"#).unwrap();
    let o = run(
        dir.path(),
        &["run-pipeline", "--config", "cfg.json", "-o", "r"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("evalution"));
}
