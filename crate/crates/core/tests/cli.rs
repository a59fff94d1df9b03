use std::path::Path;
use std::process::{Command, Output};

use recgnn::dataset::read_jsonl;
use recgnn::Checkpoint;

fn recgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recgnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = recgnn(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = recgnn(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_writes_requested_graphs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let args = ["generate", "--task", "prefix_sum", "--n", "10", "--count", "200", "--seed", "1", "--out"];
    let stdout = ok(&[&args[..], &[p(&a)]].concat());
    assert!(stdout.contains("200 prefix_sum graphs"));
    ok(&[&args[..], &[p(&b)]].concat());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 200);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(read_jsonl(&a).unwrap().iter().all(|g| g.num_nodes() == 10));
}

#[test]
fn generate_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    fails(&["generate", "--task", "prefix_sum", "--n", "10", "--count", "0", "--out", p(&out)]);
    fails(&["generate", "--task", "sorting", "--n", "10", "--count", "5", "--out", p(&out)]);
    fails(&["generate", "--task", "distance", "--n", "10", "--count", "5", "--out", "/proc/forbidden/x.jsonl"]);
    assert!(!out.exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "task = \"distance\"\nnum_graphs = 7\ngraph_size = 6\n").unwrap();
    let out = dir.path().join("d.jsonl");
    ok(&["generate", "--config", p(&cfg), "--count", "4", "--out", p(&out)]);
    let graphs = read_jsonl(&out).unwrap();
    assert_eq!(graphs.len(), 4, "flag beats file");
    assert!(graphs.iter().all(|g| g.num_nodes() == 6), "file beats default");
    assert!(graphs.iter().all(|g| g.task() == recgnn::TaskTag::Distance));

    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    let err = fails(&["generate", "--config", p(&cfg), "--out", p(&out)]);
    assert!(err.contains("bogus_key"), "{err}");
}

fn small_dataset(dir: &Path, task: &str) -> std::path::PathBuf {
    let data = dir.join(format!("{task}.jsonl"));
    ok(&["generate", "--task", task, "--n", "8", "--count", "10", "--seed", "3", "--out", p(&data)]);
    data
}

#[test]
fn train_writes_checkpoint_history_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "prefix_sum");
    let run = dir.path().join("run");
    let stdout = ok(&[
        "train", "--data", p(&data), "--task", "prefix_sum", "--epochs", "2", "--seeds", "4,5",
        "--rounds", "3", "--out-dir", p(&run),
    ]);
    assert!(stdout.contains("seed 4: best epoch"), "{stdout}");
    for s in [4, 5] {
        let ckpt = Checkpoint::load(&run.join(format!("checkpoint-seed{s}.txt"))).unwrap();
        assert_eq!(ckpt.seed, s);
        let hist = std::fs::read_to_string(run.join(format!("history-seed{s}.csv"))).unwrap();
        assert_eq!(hist.lines().count(), 1 + 3, "header + epochs 0..=2");
        assert!(hist.starts_with("epoch,train_loss,val_loss,val_accuracy,val_f1,lr,best_val_loss\n0,,"));
    }
    let manifest = std::fs::read_to_string(run.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seeds = [4, 5]"));
    let data_hash = recgnn::manifest::hash_file(&data).unwrap();
    assert!(manifest.contains(&data_hash));
    let resolved = recgnn::config::RunConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(resolved.epochs, 2);
    assert_eq!(resolved.train_rounds, 3);
}

#[test]
fn train_conv_variants_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "distance");
    let mut sizes = Vec::new();
    for conv in ["recgin", "recgin_e"] {
        let run = dir.path().join(conv);
        ok(&[
            "train", "--data", p(&data), "--task", "distance", "--conv", conv, "--epochs", "0", "--seed", "1",
            "--out-dir", p(&run),
        ]);
        let ckpt = Checkpoint::load(&run.join("checkpoint-seed1.txt")).unwrap();
        sizes.push(ckpt.params.num_scalars());
    }
    assert_ne!(sizes[0], sizes[1]);

    let run = dir.path().join("bad");
    let err = fails(&["train", "--data", p(&data), "--task", "prefix_sum", "--out-dir", p(&run)]);
    assert!(err.contains("config error"), "{err}");
    fails(&["train", "--data", p(&dir.path().join("missing.jsonl")), "--task", "distance", "--out-dir", p(&run)]);
    fails(&["train", "--task", "distance"]);
}

#[test]
fn evaluation_commands_produce_tables_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "path_finding");
    let run = dir.path().join("run");
    ok(&[
        "train", "--data", p(&data), "--task", "path_finding", "--epochs", "1", "--seed", "0", "--rounds", "4",
        "--out-dir", p(&run),
    ]);
    let ckpt = run.join("checkpoint-seed0.txt");

    let table = dir.path().join("extrap.csv");
    ok(&[
        "extrapolate", "--checkpoints", p(&ckpt), "--task", "path_finding", "--sizes", "12", "--graphs-per-size",
        "2", "--out", p(&table),
    ]);
    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n,rounds,graphs,checkpoints,f1_mean,f1_std"));
    assert!(lines[1].starts_with("12,15,2,1,"));
    assert_eq!(lines[1].split(',').nth(5), Some("0.0"), "single checkpoint has std 0");
    fails(&["extrapolate", "--checkpoints", p(&ckpt), "--task", "distance", "--sizes", "12", "--out", p(&table)]);
    fails(&["extrapolate", "--checkpoints", p(&ckpt), "--task", "path_finding", "--sizes", "ten", "--out", p(&table)]);

    let curve = dir.path().join("sweep.csv");
    ok(&["sweep-rounds", "--checkpoints", p(&ckpt), "--rounds", "5", "--count", "2", "--out", p(&curve)]);
    assert_eq!(std::fs::read_to_string(&curve).unwrap().lines().count(), 2);

    let trace_dir = dir.path().join("trace");
    ok(&["trace", "--checkpoint", p(&ckpt), "--data", p(&data), "--index", "1", "--rounds", "6", "--out-dir", p(&trace_dir)]);
    let trace = std::fs::read_to_string(trace_dir.join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 7);
    assert!(trace.lines().next().unwrap().starts_with("{\"round\":0,"));
    for r in 0..=6 {
        let dot = std::fs::read_to_string(trace_dir.join(format!("frame-{r:05}.dot"))).unwrap();
        assert!(dot.starts_with(&format!("graph round_{r} {{")));
    }
    fails(&["trace", "--checkpoint", p(&ckpt), "--data", p(&data), "--index", "99", "--out-dir", p(&trace_dir)]);

    let metrics = dir.path().join("eval.csv");
    let stdout = ok(&["eval", "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&metrics)]);
    assert!(stdout.contains("10 graphs, 80 nodes, 10 rounds"), "{stdout}");
    assert!(std::fs::read_to_string(&metrics).unwrap().starts_with("n,rounds,graphs,nodes,accuracy,f1\n8,10,10,80,"));
    fails(&["eval", "--checkpoint", p(&dir.path().join("none.txt"))]);
}

#[test]
fn identical_train_commands_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "distance");
    let runs: Vec<_> = ["a", "b"].iter().map(|r| dir.path().join(r)).collect();
    for run in &runs {
        ok(&["train", "--data", p(&data), "--task", "distance", "--epochs", "2", "--seed", "3", "--out-dir", p(run)]);
    }
    for file in ["checkpoint-seed3.txt", "history-seed3.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(runs[0].join(file)).unwrap(),
            std::fs::read(runs[1].join(file)).unwrap(),
            "{file}"
        );
    }
}
