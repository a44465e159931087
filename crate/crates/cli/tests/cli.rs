use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn semcom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semcom"))
        .args(args)
        .env_remove("SEMCOM_EMBED_URL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = semcom(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ingest(dir: &Path) -> PathBuf {
    let stats = dir.join("stats.bin");
    ok(&["ingest", "--corpus", p(&fixtures().join("corpus")), "--out", p(&stats)]);
    stats
}

#[test]
fn ingest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = ingest(dir.path());
    let first = fs::read(&a).unwrap();
    let b = dir.path().join("again.bin");
    ok(&["ingest", "--corpus", p(&fixtures().join("corpus")), "--out", p(&b)]);
    assert_eq!(first, fs::read(&b).unwrap());
}

#[test]
fn filter_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let stats = ingest(dir.path());
    let report = dir.path().join("out.json");
    let scene = fixtures().join("ski_scene.json");
    let args = [
        "filter",
        "--scene",
        p(&scene),
        "--stats",
        p(&stats),
        "--embedder",
        "hash",
        "--seed",
        "7",
        "--tau-f",
        "0.8",
        "--tau-r",
        "0.8",
        "--report",
        p(&report),
    ];
    let out = ok(&args);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 7"));
    let first = fs::read(&report).unwrap();
    let v: Value = serde_json::from_slice(&first).unwrap();
    let r = v["retention_fraction"].as_f64().unwrap();
    assert!(r > 0.0 && r <= 1.0);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["removed_by_alg1"][0]["triple"]["sentence"], "man has head");
    ok(&args);
    assert_eq!(first, fs::read(&report).unwrap());
}

#[test]
fn filtered_document_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let stats = ingest(dir.path());
    let doc = dir.path().join("filtered.json");
    let scene = fixtures().join("ski_scene.json");
    ok(&["filter", "--scene", p(&scene), "--stats", p(&stats), "--out", p(&doc)]);
    let v: Value = serde_json::from_slice(&fs::read(&doc).unwrap()).unwrap();
    assert_eq!(v["relations"].as_array().unwrap().len(), 2);
    assert_eq!(v["objects"].as_array().unwrap().len(), 4);
}

#[test]
fn sweep_rows_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("corpus");
    let out = dir.path().join("throughput.csv");
    let run = |blocks: &str, path: &Path| {
        ok(&[
            "sweep",
            "--corpus",
            p(&corpus),
            "--kinds",
            "objects,sg,sg_filtered",
            "--snrs",
            "0,2,6,16",
            "--blocks",
            blocks,
            "--seed",
            "1",
            "--out",
            p(path),
        ])
    };
    let res = run("2000", &out);
    assert!(String::from_utf8_lossy(&res.stderr).contains("seed: 1"));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,snr_db,code_rate,bler,avg_payload_bits,images_per_second"
    );
    assert_eq!(lines.count(), 12);

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run("150", &a);
    run("150", &b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn simulate_replays() {
    let args = [
        "simulate", "--snrs", "1,3", "--rate", "1/2", "--blocks", "200", "--seed", "9",
    ];
    let a = ok(&args).stdout;
    let b = ok(&args).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.ends_with(",9") || l.starts_with("info_bits")));
}

#[test]
fn select_lists_kinds() {
    let out = ok(&["select", "--task", "detection", "--fidelity", "minimal"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "objects_layouts");
}

#[test]
fn encode_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let payload = dir.path().join("p.bin");
    let out = ok(&[
        "encode",
        "--scene",
        p(&fixtures().join("ski_scene.json")),
        "--kinds",
        "feature_map",
        "--out",
        p(&payload),
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sections"][0]["bits"], 131_136);
    let rate = v["compression_rate"].as_f64().unwrap();
    assert!((0.0205..=0.0210).contains(&rate), "{rate}");
    assert_eq!(&fs::read(&payload).unwrap()[..4], b"SPAY");
}

#[test]
fn latency_modes() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("profile.txt");
    fs::write(&prof, "tau_se=30,tau_ce=0,tau_tx=10,tau_cd=40,tau_task=20\n").unwrap();
    let tps = |mode: &str| -> f64 {
        let out = ok(&["latency", "--profile", p(&prof), "--mode", mode]);
        serde_json::from_slice::<Value>(&out.stdout).unwrap()["tasks_per_second"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(tps("sequential"), 10.0);
    assert_eq!(tps("pipelined"), 25.0);
}

#[test]
fn latency_computes_tau_tx() {
    let dir = tempfile::tempdir().unwrap();
    let prof = dir.path().join("profile.txt");
    fs::write(&prof, "tau_se=1\ntau_cd=1\ntau_task=1\n").unwrap();
    let out = ok(&[
        "latency",
        "--profile",
        p(&prof),
        "--scene",
        p(&fixtures().join("ski_scene.json")),
        "--kinds",
        "objects",
        "--snrs",
        "16",
        "--rate",
        "1/3",
        "--blocks",
        "50",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // One 1056-bit block at 224 kbit/s.
    let tau = v["profile"]["tau_tx"].as_f64().unwrap();
    assert!((tau - 1000.0 * 1056.0 / 224_000.0).abs() < 1e-9, "{tau}");
}

#[test]
fn exit_codes() {
    assert_eq!(semcom(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        semcom(&["ingest", "--corpus", "/nonexistent", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        semcom(&["simulate", "--snrs", "1", "--rate", "3/4"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let stats = ingest(dir.path());
    let out = semcom(&["filter", "--scene", p(&bad), "--stats", p(&stats)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CorpusError"));
    let out = semcom(&[
        "filter",
        "--scene",
        p(&fixtures().join("ski_scene.json")),
        "--stats",
        p(&stats),
        "--embedder",
        "remote",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
