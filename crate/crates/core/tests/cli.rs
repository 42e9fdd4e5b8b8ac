use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn morphage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = morphage(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// FMMPMR straight from the score file text: group by (morph, attempt) and
/// count groups whose every score exceeds tau.
fn brute_fmmpmr(score_file: &str, tau: f64) -> f64 {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for l in score_file.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let f: Vec<&str> = l.split(';').collect();
        groups
            .entry((f[0].to_string(), f[1].to_string()))
            .or_default()
            .push(f[3].parse().unwrap());
    }
    let pass = groups.values().filter(|s| s.iter().all(|&v| v > tau)).count();
    100.0 * pass as f64 / groups.len() as f64
}

#[test]
fn stagewise_commands_reproduce_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["dataset", "synth", "--size", "128", "--out", p(&d.join("data"))]);
    let manifest = d.join("data/manifest.txt");
    let split = d.join("split.txt");
    let stdout = ok(&["dataset", "split", "--manifest", p(&manifest), "--ratios", "0.5,0.25,0.25", "--seed", "3", "--out", p(&split)]);
    assert_eq!(stdout.trim(), "train=6 dev=3 test=3");

    let pairs = d.join("pairs.txt");
    ok(&["pairs", "select", "--manifest", p(&manifest), "--split", p(&split), "--threshold", "0", "--out", p(&pairs)]);
    let morphs = d.join("morphs");
    ok(&["morph", "generate", "--manifest", p(&manifest), "--pairs", p(&pairs), "--alpha", "0,0.5", "--out", p(&morphs)]);

    // alpha 0 reproduces the first subject's morph-source image
    let jobs = std::fs::read_to_string(morphs.join("jobs.txt")).unwrap();
    let first = jobs.lines().find(|l| !l.starts_with('#')).unwrap();
    let f: Vec<&str> = first.split(';').collect();
    assert_eq!(f[2], "0");
    let morph = image::open(morphs.join(f[3])).unwrap().to_rgb8();
    let source = image::open(d.join(format!("data/images/{}_1.png", f[0]))).unwrap().to_rgb8();
    assert_eq!(morph, source);

    let calib = d.join("calib.txt");
    ok(&["vuln", "calibrate", "--manifest", p(&manifest), "--far-target", "0.1", "--out", p(&calib)]);
    let scores = d.join("scores.txt");
    ok(&["vuln", "score", "--manifest", p(&manifest), "--jobs", p(&morphs.join("jobs.txt")), "--out", p(&scores)]);
    let report = d.join("report.json");
    ok(&["vuln", "report", "--scores", p(&scores), "--calibration", p(&calib), "--out", p(&report)]);

    let tau: f64 = std::fs::read_to_string(&calib)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix("tau=").map(|v| v.parse().unwrap()))
        .unwrap();
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let score_text = std::fs::read_to_string(&scores).unwrap();
    assert_eq!(r["fmmpmr_percent"].as_f64().unwrap(), brute_fmmpmr(&score_text, tau));

    let svg = d.join("scatter.svg");
    let stdout = ok(&["report", "scatter", "--scores", p(&scores), "--tau", &tau.to_string(), "--box-plot", p(&d.join("box.svg")), "--out", p(&svg)]);
    let (top, total) = stdout.trim().strip_prefix("top-right ").unwrap().split_once('/').unwrap();
    let frac = top.parse::<f64>().unwrap() / total.parse::<f64>().unwrap();
    assert!((100.0 * frac - brute_fmmpmr(&score_text, tau)).abs() < 1e-9);

    // detector stages
    for part in ["train", "dev", "test"] {
        ok(&[
            "mad", "extract", "--manifest", p(&manifest), "--split", p(&split), "--jobs", p(&morphs.join("jobs.txt")),
            "--partition", part, "--extractor", "lbp grid=4", "--out", p(&d.join(format!("f_{part}.txt"))),
        ]);
    }
    let model = d.join("model.txt");
    ok(&["mad", "train", "--features", p(&d.join("f_train.txt")), "--dev", p(&d.join("f_dev.txt")), "--out", p(&model)]);
    let mad_scores = d.join("mad_scores.txt");
    ok(&["mad", "eval", "--model", p(&model), "--features", p(&d.join("f_test.txt")), "--out", p(&mad_scores)]);
    let det = d.join("det.json");
    ok(&["report", "det", "--scores", p(&mad_scores), "--mode", "direct", "--out", p(&det)]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&det).unwrap()).unwrap();
    assert!(v["eer_percent"].as_f64().unwrap() >= 0.0);

    // identical inputs overwrite with identical bytes
    let before = std::fs::read(&scores).unwrap();
    ok(&["vuln", "score", "--manifest", p(&manifest), "--jobs", p(&morphs.join("jobs.txt")), "--out", p(&scores)]);
    assert_eq!(before, std::fs::read(&scores).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let out = morphage(&["dataset", "split", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = morphage(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn contract_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    std::fs::write(&m, "a;F;1;20;a.png;a.txt\na;F;1;21;b.png;b.txt\n").unwrap();
    let out = morphage(&["dataset", "split", "--manifest", p(&m), "--out", p(&dir.path().join("s.txt"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));

    let out = morphage(&["dataset", "split", "--manifest", p(&m), "--ratios", "0.5,0.6,0.1", "--out", p(&dir.path().join("s.txt"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn split_sizes_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    let text: String = (0..1002).map(|i| format!("s{i:04};F;1;30;x.png;x.txt\n")).collect();
    std::fs::write(&m, format!("# bin=MorphAge-I\n{text}")).unwrap();
    // exact quotas 250.5 / 501 / 250.5; the half seat goes to the earlier class
    let out = ok(&["dataset", "split", "--manifest", p(&m), "--out", p(&dir.path().join("s.txt"))]);
    assert_eq!(out.trim(), "train=251 dev=501 test=250");
    let out = ok(&["dataset", "split", "--manifest", p(&m), "--counts", "251,500,251", "--out", p(&dir.path().join("s.txt"))]);
    assert_eq!(out.trim(), "train=251 dev=500 test=251");
}
