use std::path::Path;
use std::process::{Command, Output};

fn jetsurro(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetsurro"))
        .args(args)
        .current_dir(dir)
        .env("JETSURRO_THREADS", "1")
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn exit_code_contract() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // h_p ≥ 4 m and d·Fr ≤ 5 m keep every case out of the Coanda regime.
    std::fs::write(
        p.join("config.json"),
        r#"{"seed": 5, "generate": {"n": 60, "ranges": {"h_p": [4.0, 5.89], "H": [8.0, 9.8]}},
            "train": {"mlp": {"max_iter": 20, "neurons": 6}}, "explain": {"background_rows": 10}}"#,
    )
    .unwrap();

    let gen = jetsurro(p, &["generate", "--config", "config.json", "--out", "data.csv"]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    let stdout = String::from_utf8(gen.stdout).unwrap();
    assert!(stdout.contains("Std dev") && stdout.contains("x_i"));

    let train = jetsurro(p, &["train", "--data", "data.csv", "--family", "mlp", "--config", "config.json", "--out", "m/model.json"]);
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    for f in ["model.json", "eval_kfold.csv", "eval_validation.csv", "eval_report.json", "predictions.csv"] {
        assert!(p.join("m").join(f).is_file(), "{f} missing");
    }

    let empty = jetsurro(p, &["explain", "--model", "m/model.json", "--data", "data.csv", "--regime", "coanda", "--config", "config.json", "--out", "x"]);
    assert_eq!(empty.status.code(), Some(3));
    assert_eq!(error_json(&empty)["error"], "empty_selection");

    let bad_config = jetsurro(p, &["generate", "--config", "missing.json", "--out", "d.csv"]);
    assert_eq!(bad_config.status.code(), Some(2));
    assert_eq!(error_json(&bad_config)["exit_code"], 2);

    std::fs::write(p.join("unknown.json"), r#"{"generate": {"count": 3}}"#).unwrap();
    assert_eq!(jetsurro(p, &["generate", "--config", "unknown.json", "--out", "d.csv"]).status.code(), Some(2));

    std::fs::write(p.join("infeasible.json"), r#"{"generate": {"n": 3, "ranges": {"max_dfr": 1e-9}}}"#).unwrap();
    let infeasible = jetsurro(p, &["generate", "--config", "infeasible.json", "--out", "d.csv"]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert_eq!(error_json(&infeasible)["error"], "sampling_exhausted");

    std::fs::write(p.join("zero.json"), r#"{"generate": {"n": 0}}"#).unwrap();
    assert_eq!(jetsurro(p, &["generate", "--config", "zero.json", "--out", "zero.csv"]).status.code(), Some(0));
    let zero = std::fs::read_to_string(p.join("zero.csv")).unwrap();
    assert_eq!(zero.lines().count(), 1);

    std::fs::write(p.join("broken.csv"), "theta,h_p\n1,2\n").unwrap();
    assert_eq!(
        jetsurro(p, &["train", "--data", "broken.csv", "--family", "gbt", "--out", "g/model.json"]).status.code(),
        Some(2)
    );

    std::fs::create_dir(p.join("nothing")).unwrap();
    let report = jetsurro(p, &["report", "--in", "nothing", "--out", "r.html"]);
    assert_eq!(report.status.code(), Some(0));
    assert!(std::fs::read_to_string(p.join("r.html")).unwrap().contains("MISSING"));
}

#[test]
fn explain_writes_plot_sources() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("config.json"),
        r#"{"seed": 9, "generate": {"n": 50}, "train": {"gbt": {"estimators": 20}}, "explain": {"background_rows": 10}}"#,
    )
    .unwrap();
    assert!(jetsurro(p, &["generate", "--config", "config.json", "--out", "data.csv"]).status.success());
    assert!(jetsurro(p, &["train", "--data", "data.csv", "--family", "gbt", "--reduced", "--config", "config.json", "--out", "g/model.json"]).status.success());
    let out = jetsurro(p, &["explain", "--model", "g/model.json", "--data", "data.csv", "--instance", "0", "--config", "config.json", "--out", "g"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["bar.csv", "summary.csv", "dependence.csv", "waterfall_00000.csv", "attribution_x_m.csv", "regimes.csv"] {
        assert!(p.join("g").join(f).is_file(), "{f} missing");
    }
    let bar = std::fs::read_to_string(p.join("g/bar.csv")).unwrap();
    assert!(bar.contains(",Fr,") && !bar.contains(",U0,"));
    let report = jetsurro(p, &["report", "--in", "g", "--out", "g/report.md"]);
    assert!(report.status.success());
    let md = std::fs::read_to_string(p.join("g/report.md")).unwrap();
    assert!(md.contains("## Waterfalls") && md.contains("<svg"));
}
