use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(path)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trustmarket"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let config = repo("configs/scenario.json");
    let mut args = vec![
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), &["--mode", "both"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
    assert!(csv.starts_with("t,seller_id,price,I_T,I_Q,Q,sales_count\n"));
    assert_eq!(csv.lines().count(), 1 + 30 * 4);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["audit_pass"], true);
    assert!(dir.path().join("transcript.jsonl").exists());
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let out = simulate(dir.path(), &["--seed", seed]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "rounds.csv"), read(&b, "rounds.csv"));
    assert_eq!(read(&a, "transcript.jsonl"), read(&b, "transcript.jsonl"));
    assert_ne!(read(&a, "transcript.jsonl"), read(&c, "transcript.jsonl"));
}

#[test]
fn oracle_mode_has_no_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), &["--mode", "oracle"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("transcript.jsonl").exists());
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(repo("configs/scenario.json")).unwrap()).unwrap();
    v["market"]["n_sellers"] = 2.into();
    v["sellers"].as_array_mut().unwrap().truncate(2);
    let path = dir.path().join("bad.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = cli(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("market.n_sellers") && err.contains("strictly greater than 2"),
        "{err}"
    );

    let out = cli(&[
        "classify",
        "--config",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_prints_regimes() {
    let config = repo("configs/scenario.json");
    let out = cli(&["classify", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        v["regime"],
        serde_json::json!(["h_star", "h_star", "l_star", "l_star"])
    );
    assert_eq!(v["verified"], true);
    assert!(v["bounds"].is_array() && v["params"].is_object());
}

#[test]
fn verify_theorems_on_small_grid() {
    let grid = repo("configs/grid-small.json");
    let out = cli(&["verify-theorems", "--grid", grid.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(
        &empty,
        r#"{"periodic": {"sigmas": [], "ks": [], "n_buyers": []},
        "punishment": {"sigmas": [0.5], "alphas": [1], "n_buyers": [3], "n_sellers": [3]},
        "agreement": {"p": 1, "v_high": 5, "sigmas": [], "policies": [], "n_buyers": [],
        "n_sellers": [], "hstar_cost_fractions": [], "lstar_cost_fractions": [], "seed": 0}}"#,
    )
    .unwrap();
    let out = cli(&["verify-theorems", "--grid", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        simulate(dir.path(), &["--mode", "protocol"]).status.code(),
        Some(0)
    );
    let transcript = dir.path().join("transcript.jsonl");
    let out = cli(&["audit", "--transcript", transcript.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    // Drop one decryption share and renumber: the quorum check fails.
    let text = fs::read_to_string(&transcript).unwrap();
    let mut lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let i = lines
        .iter()
        .position(|l| l["kind"] == "decryption_share")
        .unwrap();
    lines.remove(i);
    let body: String = lines
        .iter_mut()
        .enumerate()
        .map(|(n, l)| {
            l["step"] = n.into();
            format!("{l}\n")
        })
        .collect();
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(&tampered, body).unwrap();
    let out = cli(&["audit", "--transcript", tampered.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let garbage = dir.path().join("garbage.jsonl");
    fs::write(&garbage, "not a transcript\n").unwrap();
    let out = cli(&["audit", "--transcript", garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
