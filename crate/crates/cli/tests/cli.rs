use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

const TINY: &str = r#"
[dataset]
per_cell = 4

[scenario]
tasks = [1, 5]
holdout_shift = 1

[training]
memory_sizes = [0, 100]
seeds = [0]
epochs = 1
batch_size = 32
dtype = "f64"

[probe]
hidden_sizes = [16]
learning_rates = [0.1]
epochs = 10
"#;

fn clood(root: &Path, config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clood"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(root)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, config).unwrap();
    let root = dir.path().join("out");
    (dir, cfg, root)
}

fn csv_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn generate_is_reproducible_and_creates_the_output_dir() {
    let (_d, cfg, root) = setup(TINY);
    ok(clood(&root, &cfg, &["generate"]));
    let first = std::fs::read(root.join("dataset/glyphs.bin")).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(root.join("dataset/glyphs.json")).unwrap()).unwrap();
    assert_eq!(manifest["count"], 400);
    assert!(root.join("dataset/samples.png").is_file());
    ok(clood(&root, &cfg, &["generate"]));
    assert_eq!(std::fs::read(root.join("dataset/glyphs.bin")).unwrap(), first);
}

#[test]
fn env_var_sets_output_root_and_flag_wins() {
    let (d, cfg, root) = setup(TINY);
    let env_root = d.path().join("from_env");
    let run = |with_flag: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_clood"));
        c.arg("--config").arg(&cfg);
        if with_flag {
            c.arg("--out").arg(&root);
        }
        c.arg("generate").env("CLOOD_OUT", &env_root).env("RUST_LOG", "warn").output().unwrap()
    };
    ok(run(false));
    assert!(env_root.join("dataset/glyphs.bin").is_file());
    ok(run(true));
    assert!(root.join("dataset/glyphs.bin").is_file());
}

#[test]
fn malformed_config_fails_before_any_output() {
    let (_d, cfg, root) = setup("[training]\nepochz = 3\n");
    let out = clood(&root, &cfg, &["generate"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "error");
    assert!(!root.exists());
}

#[test]
fn train_needs_a_dataset() {
    let (_d, cfg, root) = setup(TINY);
    let out = clood(&root, &cfg, &["train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("clood generate"));
}

#[test]
fn grid_train_probe_report() {
    let (_d, cfg, root) = setup(TINY);
    ok(clood(&root, &cfg, &["generate"]));

    let plan = ok(clood(&root, &cfg, &["train", "--dry-run"]));
    assert_eq!(plan.lines().filter(|l| l.starts_with("pending")).count(), 4);
    assert!(!root.join("runs").exists());

    ok(clood(&root, &cfg, &["train"]));
    let rows = csv_lines(&root.join("metrics.csv"));
    assert_eq!(rows[0], "run_id,T,M,seed,experience,split,accuracy,loss");
    // T=1: one experience; T=5: five; two splits each; two memory sizes.
    assert_eq!(rows.len() - 1, 2 * (2 + 10));
    for run in ["T1_M0_s0", "T5_M100_s0"] {
        let dir = root.join("runs").join(run);
        for f in ["config.json", "scenario.json", "metrics.csv", "outcome.json"] {
            assert!(dir.join(f).is_file(), "{run}/{f}");
        }
        let snap: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("config.json")).unwrap()).unwrap();
        assert_eq!(snap["dataset_hash"].as_str().unwrap().len(), 64);
    }
    let outcome: serde_json::Value =
        serde_json::from_slice(&std::fs::read(root.join("runs/T5_M100_s0/outcome.json")).unwrap()).unwrap();
    assert_eq!(outcome["steps"], outcome["expected_steps"]);

    let again = ok(clood(&root, &cfg, &["train", "--dry-run"]));
    assert_eq!(again.lines().filter(|l| l.starts_with("done")).count(), 4);

    let mut probe_cfg = std::fs::read_to_string(&cfg).unwrap();
    probe_cfg.push_str("runs = [\"T1_M0_s0\"]\n");
    std::fs::write(&cfg, &probe_cfg).unwrap();
    ok(clood(&root, &cfg, &["probe"]));
    let probe_rows = csv_lines(&root.join("probe/probe_results.csv"));
    assert_eq!(probe_rows[0], "checkpoint,tap,task,regime,h,lr,split,accuracy");
    assert_eq!(probe_rows.len() - 1, 6 * 2);
    ok(clood(&root, &cfg, &["probe"]));
    assert_eq!(csv_lines(&root.join("probe/probe_results.csv")), probe_rows);

    ok(clood(&root, &cfg, &["report"]));
    let read_all = || {
        ["gap_vs_memory.csv", "experience_curves.csv", "probe_summary.csv", "report.json"]
            .map(|f| std::fs::read(root.join("report").join(f)).unwrap())
    };
    let first = read_all();
    ok(clood(&root, &cfg, &["report"]));
    assert_eq!(read_all(), first);
    let gaps = csv_lines(&root.join("report/gap_vs_memory.csv"));
    assert_eq!(gaps[0], "T,M,runs,iid_mean,iid_std,ood_mean,ood_std,gap_mean,gap_std");
    assert_eq!(gaps.len() - 1, 4);
}

#[test]
fn unknown_tap_lists_available_taps() {
    let (_d, cfg, root) = setup(&format!("{TINY}tap = \"conv9\"\n"));
    let out = clood(&root, &cfg, &["probe"]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("repr") && msg.contains("block1"), "{msg}");
}

#[test]
fn probe_enumerates_missing_checkpoints() {
    let (_d, cfg, root) = setup(&format!("{TINY}runs = [\"T5_M0_s0\", \"T1_M0_s0\"]\n"));
    ok(clood(&root, &cfg, &["generate"]));
    let out = clood(&root, &cfg, &["probe"]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("T5_M0_s0") && msg.contains("T1_M0_s0"), "{msg}");
}

#[test]
fn report_on_empty_dir_explains() {
    let (_d, cfg, root) = setup(TINY);
    std::fs::create_dir_all(&root).unwrap();
    let out = clood(&root, &cfg, &["report"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no results CSV"));
}

#[test]
fn killed_grid_resumes_without_redoing_completed_runs() {
    let config = TINY.replace("seeds = [0]", "seeds = [0, 1, 2]").replace("epochs = 1\n", "epochs = 2\n");
    let (_d, cfg, root) = setup(&config);
    ok(clood(&root, &cfg, &["generate"]));

    let mut child = Command::new(env!("CARGO_BIN_EXE_clood"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&root)
        .arg("train")
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let registry = root.join("registry.jsonl");
    let started = Instant::now();
    loop {
        let done = std::fs::read_to_string(&registry).map(|s| s.lines().count()).unwrap_or(0);
        if done >= 1 || child.try_wait().unwrap().is_some() {
            break;
        }
        assert!(started.elapsed() < Duration::from_secs(600), "no run completed");
        std::thread::sleep(Duration::from_millis(20));
    }
    child.kill().ok();
    child.wait().unwrap();

    let before: Vec<String> = csv_lines(&registry);
    assert!(!before.is_empty());
    let finished_before: Vec<String> = before
        .iter()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["run_id"].as_str().unwrap().to_string())
        .collect();

    let plan = ok(clood(&root, &cfg, &["train", "--dry-run"]));
    for id in &finished_before {
        assert!(plan.lines().any(|l| l.starts_with("done") && l.ends_with(id.as_str())), "{id} not skipped:\n{plan}");
    }
    ok(clood(&root, &cfg, &["train"]));

    let after = csv_lines(&registry);
    let mut per_run = std::collections::BTreeMap::<String, usize>::new();
    for l in &after {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["status"], "completed");
        *per_run.entry(v["run_id"].as_str().unwrap().to_string()).or_default() += 1;
    }
    assert_eq!(per_run.len(), 12);
    for id in &finished_before {
        assert_eq!(per_run[id], 1, "{id} was trained twice");
    }
    assert_eq!(csv_lines(&root.join("metrics.csv")).len() - 1, 3 * 2 * (2 + 10));
}
