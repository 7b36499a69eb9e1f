//! End-to-end runs of the `mtlprog` binary on a tiny configuration.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtl_prognostics::cli::PredictionReport;
use mtl_prognostics::dataprep::CellSeries;
use mtl_prognostics::evaluation::mape;
use mtl_prognostics::seqmodel::Channel;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn mtlprog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtlprog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mtlprog(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn prepare_writes_series_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let data = fixture("checkups.csv");
    ok(&["prepare", "--data", s(&data), "--out", s(&a)]);
    ok(&["prepare", "--data", s(&data), "--out", s(&b)]);
    let series: Vec<_> = std::fs::read_dir(a.join("series")).unwrap().collect();
    assert_eq!(series.len(), 2);
    for f in [
        "series/A.csv",
        "series/B.csv",
        "fleet.json",
        "manifest.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let cell = CellSeries::load("A", a.join("series/A.csv")).unwrap();
    assert_eq!(cell.last_cycle(), 1150);
    assert_eq!(cell.capacity[500], 1.795);
}

#[test]
fn usage_and_input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mtlprog(&[
        "prepare",
        "--data",
        "/definitely/missing.csv",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert_eq!(mtlprog(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        mtlprog(&["train", "--mode", "sideways"]).status.code(),
        Some(2)
    );
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nhidden_size = 0\n").unwrap();
    assert_eq!(
        mtlprog(&["synth", "--config", s(&bad), "--out", s(tmp.path())])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let out = ok(&["gradcheck", "--size", "small"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["worst_tensor"].as_str().unwrap().contains('['));
    let out = mtlprog(&["gradcheck", "--flip-sign"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn synth_train_predict_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("tiny.toml");
    let c = ["--config", s(&cfg)];
    let fleet = tmp.path().join("fleet");
    let train = tmp.path().join("train");
    ok(&[&["synth"], &c[..], &["--out", s(&fleet)]].concat());
    let truth = std::fs::read_to_string(fleet.join("ground_truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 11);
    assert!(truth.starts_with("cell_id,last_cycle,cap_knee,res_knee,eol80,eol65,eol120,eol130"));

    ok(&[
        &["train"],
        &c[..],
        &["--data", s(&fleet), "--out", s(&train)],
    ]
    .concat());
    let history = std::fs::read_to_string(train.join("history.csv")).unwrap();
    let stages: std::collections::BTreeSet<&str> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(stages.into_iter().collect::<Vec<_>>(), ["1", "2", "3"]);
    let ckpt = train.join("model.ckpt");

    let series = fleet.join("series/synth-000.csv");
    let pred = tmp.path().join("pred.json");
    ok(&[
        &["predict"],
        &c[..],
        &[
            "--data",
            s(&series),
            "--checkpoint",
            s(&ckpt),
            "--at-cycle",
            "100",
            "--out",
            s(&pred),
        ],
    ]
    .concat());
    let report: PredictionReport = serde_json::from_slice(&std::fs::read(&pred).unwrap()).unwrap();
    assert_eq!(report.present_cycle, 100);
    assert_eq!(report.start_cycle, 100 + report.step_cycles);
    assert_eq!(report.channels.len(), 2);
    // The JSON forecast scores against the truth like any other forecast.
    let cell = CellSeries::load("synth-000", &series).unwrap();
    let cap = &report.channels[0];
    assert_eq!(cap.channel, Channel::Capacity);
    let n = ((cell.last_cycle() - 100) / report.step_cycles).min(cap.physical.len());
    let truth: Vec<f64> = (1..=n)
        .map(|k| cell.capacity[100 + k * report.step_cycles])
        .collect();
    assert!(mape(&cap.physical[..n], &truth).unwrap().is_finite());

    let out = mtlprog(
        &[
            &["predict"],
            &c[..],
            &[
                "--data",
                s(&series),
                "--checkpoint",
                s(&ckpt),
                "--at-cycle",
                "50",
            ],
        ]
        .concat(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient history"));

    let eval = tmp.path().join("eval");
    ok(&[
        &["evaluate"],
        &c[..],
        &[
            "--data",
            s(&fleet),
            "--checkpoint",
            s(&ckpt),
            "--out",
            s(&eval),
        ],
    ]
    .concat());
    let table = std::fs::read_to_string(eval.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 19);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(eval.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["command"], "evaluate");

    let noise = tmp.path().join("noise");
    ok(&[
        &["noise-sweep"],
        &c[..],
        &[
            "--data",
            s(&fleet),
            "--checkpoint",
            s(&ckpt),
            "--out",
            s(&noise),
        ],
    ]
    .concat());
    let header = std::fs::read_to_string(noise.join("noise_table.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 2 + 6);
}

#[test]
fn compare_emits_thirteen_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("tiny.toml");
    let c = ["--config", s(&cfg)];
    let fleet = tmp.path().join("fleet");
    ok(&[&["synth"], &c[..], &["--out", s(&fleet)]].concat());
    let mut ckpts = Vec::new();
    for mode in ["mtl", "stl-cap", "stl-res"] {
        let dir = tmp.path().join(mode);
        ok(&[
            &["train", "--mode", mode],
            &c[..],
            &["--data", s(&fleet), "--out", s(&dir)],
        ]
        .concat());
        let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
        let max_stage = history
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().to_string())
            .max()
            .unwrap();
        assert_eq!(max_stage, if mode == "mtl" { "3" } else { "1" });
        ckpts.push(dir.join("model.ckpt"));
    }
    let out = tmp.path().join("cmp");
    let args = [
        &["compare"],
        &c[..],
        &[
            "--data",
            s(&fleet),
            "--checkpoint",
            s(&ckpts[0]),
            "--stl-cap",
            s(&ckpts[1]),
            "--stl-res",
            s(&ckpts[2]),
        ],
        &["--out", s(&out)],
    ]
    .concat();
    ok(&args);
    let table = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let timing: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("timing.json")).unwrap()).unwrap();
    // Twelve accuracy rows in the CSV; the thirteenth, timing, row lives in
    // the timing file.
    assert_eq!(table.lines().count() - 1, 12);
    assert_eq!(timing["row"]["metric"], "Mean computational cost [s]");
    assert!(timing["mtl_over_stl"].as_f64().unwrap() > 0.0);

    // Swapped single-task checkpoints are a configuration error.
    let swapped = [
        &["compare"],
        &c[..],
        &[
            "--data",
            s(&fleet),
            "--checkpoint",
            s(&ckpts[0]),
            "--stl-cap",
            s(&ckpts[2]),
            "--stl-res",
            s(&ckpts[1]),
        ],
        &["--out", s(&out)],
    ]
    .concat();
    assert_eq!(mtlprog(&swapped).status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    use mtl_prognostics::cli::{Preset, RunConfig};
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let desk = RunConfig::load(&root.join("desk.toml")).unwrap();
    assert_eq!(desk.model.preset, Preset::Desk);
    assert_eq!(
        desk.model_config(),
        mtl_prognostics::seqmodel::ModelConfig::desk()
    );
    let reference = RunConfig::load(&root.join("reference.toml")).unwrap();
    assert_eq!(
        reference.mtl_schedule(),
        mtl_prognostics::training::Schedule::mtl_reference()
    );
}
