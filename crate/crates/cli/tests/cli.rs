use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tabdx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabdx"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tabdx(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_cohort(dir: &Path) {
    ok(dir, &["synth", "--rows", "300", "--seed", "7", "--missing-rate", "0.05", "--out", "cohort.csv"]);
}

#[test]
fn synth_writes_rows_schema_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--rows", "2000", "--seed", "42", "--out", "cohort.csv"]);
    let csv = fs::read_to_string(d.path().join("cohort.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2001);
    let schema = fs::read_to_string(d.path().join("cohort.schema")).unwrap();
    assert!(schema.contains("DX_bl = label"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("cohort.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config"]["n_rows"], 2000);
    assert_eq!(manifest["artifacts"][0]["file"], "cohort.csv");
    let first = fs::read(d.path().join("cohort.csv")).unwrap();
    ok(d.path(), &["synth", "--rows", "2000", "--seed", "42", "--out", "cohort.csv"]);
    assert_eq!(fs::read(d.path().join("cohort.csv")).unwrap(), first);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(tabdx(d.path(), &["synth", "--rows", "-1", "--out", "x.csv"]).status.code(), Some(2));
    fs::write(d.path().join("bad.toml"), "priors = [0.5, 0.5, 0.5, 0.0, 0.0]\n").unwrap();
    let o = tabdx(d.path(), &["synth", "--config", "bad.toml", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    small_cohort(d.path());
    let o = tabdx(d.path(), &["train", "--input", "cohort.csv", "--model", "xgb", "--out", "m.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tabdx(d.path(), &["evaluate", "--input", "cohort.csv", "--test-fraction", "1.5", "--out-dir", "e"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_errors_exit_3_naming_the_stage() {
    let d = tempfile::tempdir().unwrap();
    small_cohort(d.path());
    ok(d.path(), &["preprocess", "--input", "cohort.csv", "--out-dir", "pre"]);
    let o = tabdx(d.path(), &["correlate", "--input", "pre/clean.csv", "--label", "DX", "--out-dir", "c"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("DX"), "{}", stderr(&o));

    let csv = fs::read_to_string(d.path().join("cohort.csv")).unwrap();
    fs::write(d.path().join("odd.csv"), csv.replacen(",CN\r\n", ",XX\r\n", 1)).unwrap();
    fs::copy(d.path().join("cohort.schema"), d.path().join("odd.schema")).unwrap();
    let o = tabdx(d.path(), &["preprocess", "--input", "odd.csv", "--out-dir", "p2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("preprocess: encode"), "{}", stderr(&o));

    let o = tabdx(d.path(), &["preprocess", "--input", "missing.csv", "--out-dir", "p3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("load"));
}

#[test]
fn preprocess_output_is_clean() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--rows", "400", "--missing-rate", "0.1", "--outlier-rate", "0.02", "--out", "c.csv"]);
    ok(d.path(), &["preprocess", "--input", "c.csv", "--max-missing", "6", "--scale", "--out-dir", "pre"]);
    let clean = fs::read_to_string(d.path().join("pre/clean.csv")).unwrap();
    assert!(!clean.lines().skip(1).any(|l| l.contains(",,") || l.ends_with(',')));
    for f in ["missingness.csv", "outliers.csv", "prune.csv", "summary.json", "manifest.json", "clean.schema"] {
        assert!(d.path().join("pre").join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("pre/summary.json")).unwrap()).unwrap();
    assert!(summary["imputed_cells"].as_u64().unwrap() > 0);
}

#[test]
fn correlate_and_evaluate_write_figure_data() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--rows", "600", "--out", "c.csv"]);
    ok(d.path(), &["preprocess", "--input", "c.csv", "--out-dir", "pre"]);
    ok(d.path(), &["correlate", "--input", "pre/clean.csv", "--plot", "--out-dir", "corr"]);
    let corr = fs::read_to_string(d.path().join("corr/correlations.csv")).unwrap();
    let rows: Vec<Vec<&str>> = corr.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let mags: Vec<f64> = rows.iter().map(|r| r[1].parse::<f64>().unwrap().abs()).collect();
    assert!(mags.windows(2).all(|w| w[0] >= w[1]));
    assert!(rows.iter().any(|r| r[0] == "CDRSB" && r[2] == "Strong"));
    assert!(rows.iter().any(|r| r[0] == "AGE" && r[2] == "Weak"));
    assert!(d.path().join("corr/heatmap.svg").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_tabdx"))
        .current_dir(d.path())
        .env("TABDX_THREADS", "2")
        .args(["evaluate", "--input", "pre/clean.csv", "--repeats", "2", "--trees", "20", "--rounds", "10"])
        .args(["--plot", "--out-dir", "ev"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp = fs::read_to_string(d.path().join("ev/comparison.csv")).unwrap();
    let ranked: Vec<(String, f64, usize)> = cmp
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(ranked.len(), 3);
    for (i, w) in ranked.windows(2).enumerate() {
        assert!(w[0].1 >= w[1].1);
        assert_eq!(w[0].2, i + 1);
    }
    for m in ["forest", "gbt", "svm"] {
        let e = fs::read_to_string(d.path().join(format!("ev/eval_{m}.csv"))).unwrap();
        assert_eq!(e.lines().count(), 3);
        assert!(d.path().join(format!("ev/eval_{m}.svg")).exists());
    }
}

#[test]
fn train_is_seed_stable_for_every_family() {
    let d = tempfile::tempdir().unwrap();
    small_cohort(d.path());
    ok(d.path(), &["preprocess", "--input", "cohort.csv", "--out-dir", "pre"]);
    for m in ["forest", "gbt", "svm"] {
        let args = ["train", "--input", "pre/clean.csv", "--model", m, "--trees", "10", "--rounds", "5", "--out"];
        ok(d.path(), &[&args[..], &["a.json"]].concat());
        ok(d.path(), &[&args[..], &["b.json"]].concat());
        let a = fs::read(d.path().join("a.json")).unwrap();
        assert_eq!(a, fs::read(d.path().join("b.json")).unwrap(), "{m}");
        let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(v["model"]["family"], m);
    }
}
