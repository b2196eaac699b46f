use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SAMPLE: &str = "tests/fixtures/sample_repo";
const OUTPUTS: [&str; 4] = [
    "manuscript.md",
    "manuscript.sidecar.json",
    "quality.json",
    "manifest.json",
];

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_code2paper"))
        .args(args)
        .current_dir(crate_dir())
        .env_remove("CODE2PAPER_UNSET_KEY")
        .output()
        .unwrap()
}

fn diagnostic(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap().path().strip_prefix(dir).unwrap().display().to_string())
        .collect()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn scan_empty_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["scan", "tests/fixtures/empty_repo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let inv = read_json(&out.join("inventory.json"));
    assert_eq!(inv["files"], serde_json::json!([]));
    assert_eq!(inv["total_lines"], 0);
    assert_eq!(inv["root"], "tests/fixtures/empty_repo");
}

#[test]
fn http_without_key_is_config_error_before_any_write() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[backend]\nendpoint_url = \"http://127.0.0.1:9/v1\"\napi_key_env = \"CODE2PAPER_UNSET_KEY\"\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    for cmd in ["generate", "distill", "pipeline"] {
        let o = run(&[
            cmd,
            SAMPLE,
            "--backend",
            "http",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        let d = diagnostic(&o);
        assert_eq!(d["error"], "config");
        assert!(d["message"].as_str().unwrap().contains("CODE2PAPER_UNSET_KEY"));
        assert!(!out.exists(), "{cmd} wrote output");
    }
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["scan", "tests/fixtures/does_not_exist", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(diagnostic(&o)["error"], "input");

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[revision]\nmax_iterations = \"three\"\n").unwrap();
    let o = run(&["pipeline", SAMPLE, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let rules = tmp.path().join("rules.json");
    std::fs::write(&rules, "{\"rules\": []}").unwrap();
    let o = run(&["pipeline", SAMPLE, "--mock-rules", rules.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(diagnostic(&o)["message"].as_str().unwrap().contains("default"));

    let o = run(&["pipeline", SAMPLE, "--max-iterations", "21", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn budget_below_first_request_exits_without_manuscript() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["pipeline", SAMPLE, "--budget", "10", "--fixed-clock", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    let d = diagnostic(&o);
    assert_eq!(d["error"], "budget");
    assert!(!out.join("manuscript.md").exists());
    let manifest = read_json(&out.join("manifest.json"));
    let failed: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["status"] == "failed")
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(failed, vec!["augment"]);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 1);
}

#[test]
fn stage_commands_chain_through_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    for cmd in ["scan", "analyze", "distill", "generate"] {
        let r = run(&[cmd, SAMPLE, "--out", o, "--fixed-clock"]);
        assert!(r.status.success(), "{cmd}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let r = run(&["evaluate", "--out", o]);
    assert!(r.status.success());
    let expected: BTreeSet<String> = [
        "",
        "inventory.json",
        "analysis.json",
        "distill.json",
        "manuscript.md",
        "manuscript.sidecar.json",
        "quality.json",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(listing(&out), expected);

    let analysis = read_json(&out.join("analysis.json"));
    assert_eq!(analysis["files"].as_array().unwrap().len(), 8);
    assert!(analysis["rollup"]["mean_density"].as_f64().unwrap() > 0.0);

    let distill = read_json(&out.join("distill.json"));
    for rec in distill["records"].as_array().unwrap() {
        let keys: Vec<&str> = rec.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["prompt_text", "round_trip", "source_hash", "target_path"]);
        let rt: Vec<&str> = rec["round_trip"].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(rt, vec!["extra_units", "missing_units", "passed", "similarity"]);
        assert_eq!(rec["round_trip"]["similarity"], 1.0);
    }
    let quality = read_json(&out.join("quality.json"));
    // generate does not revise, so the canned results section still fails.
    assert_eq!(quality["passed"], false);
    assert!(quality["per_section"]["results"]["failing"].as_array().unwrap().len() == 2);
}

#[test]
fn compare_manuscript_with_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    assert!(run(&["pipeline", SAMPLE, "--out", o, "--fixed-clock"]).status.success());
    let md = out.join("manuscript.md");
    let r = run(&["compare", md.to_str().unwrap(), md.to_str().unwrap(), "--out", o]);
    assert!(r.status.success());
    let table = String::from_utf8(r.stdout).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(table.lines().skip(1).all(|l| l.ends_with("tie")));
    let report = read_json(&out.join("comparison.json"));
    for (_, d) in report["per_metric_delta"].as_object().unwrap() {
        assert_eq!(d.as_f64(), Some(0.0));
    }
}

#[test]
fn pipeline_writes_only_its_outputs_and_leaves_input_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = tmp.path().join("repo");
    for entry in walkdir::WalkDir::new(crate_dir().join(SAMPLE)) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(crate_dir().join(SAMPLE)).unwrap();
        let dest = repo.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).unwrap();
        } else {
            std::fs::copy(entry.path(), &dest).unwrap();
        }
    }
    let before = listing(tmp.path());
    let out = tmp.path().join("out");
    let r = run(&["pipeline", repo.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    let mut expected = before.clone();
    expected.insert("out".into());
    for f in OUTPUTS {
        expected.insert(format!("out/{f}"));
    }
    assert_eq!(listing(tmp.path()), expected);
}

/// Set UPDATE_GOLDEN=1 to rewrite the committed outputs.
#[test]
fn pipeline_matches_golden_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = run(&["pipeline", SAMPLE, "--fixed-clock", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let golden = crate_dir().join("tests/golden/sample_repo");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&golden).unwrap();
        for f in OUTPUTS {
            std::fs::copy(out.join(f), golden.join(f)).unwrap();
        }
    }
    for f in OUTPUTS {
        let got = std::fs::read_to_string(out.join(f)).unwrap();
        let want = std::fs::read_to_string(golden.join(f)).unwrap();
        assert!(got == want, "{f} differs from golden");
    }
    let manifest = read_json(&out.join("manifest.json"));
    let listed: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap())
        .collect();
    assert_eq!(listed, OUTPUTS.to_vec());
}
