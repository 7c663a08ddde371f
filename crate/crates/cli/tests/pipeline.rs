use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set", "epochs=2",
    "--set", "word_dim=8",
    "--set", "tag_dim=4",
    "--set", "hidden=12",
    "--set", "att_dim=12",
    "--set", "out_hidden=12",
    "--set", "balancer_hidden1=8",
    "--set", "balancer_hidden2=4",
    "--set", "scorer_hidden1=8",
    "--set", "scorer_hidden2=4",
    "--set", "beam_width=3",
    "--set", "max_output_len=20",
];

fn phramem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phramem"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn phramem")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = phramem(dir, args);
    assert!(
        out.status.success(),
        "phramem {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn with_config<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--config", "w/toy/toy.conf"];
    v.extend_from_slice(SMALL);
    v.extend_from_slice(extra);
    v
}

/// gen-toy through analyze in a fresh directory.
fn full_pipeline(dir: &Path) {
    ok(dir, &["gen-toy", "--set", "work_dir=w", "--set", "toy_pairs=120", "--set", "toy_idioms=8", "--set", "toy_vocab=15"]);
    for cmd in ["align", "extract", "lm"] {
        ok(dir, &with_config(cmd, &[]));
    }
    let train = ok(dir, &with_config("train", &[]));
    let log = String::from_utf8(train.stdout).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 2);
    for (i, l) in lines.iter().enumerate() {
        let cols: Vec<&str> = l.split('\t').collect();
        assert_eq!(cols.len(), 4, "{l}");
        assert_eq!(cols[0], (i + 1).to_string());
        assert!(cols[1].parse::<f64>().unwrap().is_finite());
    }
    ok(dir, &with_config("translate", &["--trace"]));
    let eval = ok(dir, &with_config("eval", &["--null-ablation"]));
    assert!(String::from_utf8(eval.stdout).unwrap().starts_with("BLEU = "));
    ok(dir, &with_config("analyze", &[]));
}

#[test]
fn pipeline_runs_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_pipeline(a.path());
    full_pipeline(b.path());

    let w = a.path().join("w");
    for f in ["train.align", "phrase_table.txt", "lm.bin", "model.bin", "output.txt", "trace.jsonl", "memory.jsonl", "report.json", "analysis.json"] {
        assert!(w.join(f).is_file(), "{f} missing");
        let x = fs::read(w.join(f)).unwrap();
        let y = fs::read(b.path().join("w").join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }

    let outputs = fs::read_to_string(w.join("output.txt")).unwrap();
    let refs = fs::read_to_string(w.join("toy/test.tgt")).unwrap();
    assert_eq!(outputs.lines().count(), refs.lines().count());

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.join("report.json")).unwrap()).unwrap();
    let bleu = report["bleu"]["bleu"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&bleu));
    assert!(report["null_ablation"]["bleu"].is_number());

    let analysis: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.join("analysis.json")).unwrap()).unwrap();
    let pct = analysis["sentence_pct"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&pct));
}

#[test]
fn baseline_mode_emits_words_only() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    ok(dir, &["gen-toy", "--set", "work_dir=w", "--set", "toy_pairs=80", "--set", "toy_idioms=6", "--set", "toy_vocab=12"]);
    ok(dir, &with_config("train", &["--baseline-mode"]));
    let side = fs::read_to_string(dir.join("w/model.bin.cfg")).unwrap();
    assert!(side.contains("baseline_mode = true"));
    ok(dir, &with_config("translate", &["--baseline-mode", "--trace"]));
    let trace = fs::read_to_string(dir.join("w/trace.jsonl")).unwrap();
    assert!(!trace.is_empty());
    for line in trace.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for f in v["fragments"].as_array().unwrap() {
            assert_eq!(f["type"], "word");
        }
    }
    let mem = fs::read_to_string(dir.join("w/memory.jsonl")).unwrap();
    for line in mem.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["entries"].as_array().unwrap().is_empty());
    }
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).expect("machine-readable error")
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();

    let out = phramem(dir, &["align", "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "config");

    let out = phramem(dir, &["align", "--set", "work_dir=w"]);
    assert_eq!(out.status.code(), Some(2), "unset training paths are config errors");

    fs::write(dir.join("a.src"), "x y\nz\n").unwrap();
    fs::write(dir.join("a.tgt"), "u v\n").unwrap();
    let out = phramem(dir, &["align", "--set", "work_dir=w", "--set", "train_src=a.src", "--set", "train_tgt=a.tgt"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "format");

    ok(dir, &["gen-toy", "--set", "work_dir=w", "--set", "toy_pairs=60", "--set", "toy_idioms=4", "--set", "toy_vocab=12"]);
    let out = phramem(
        dir,
        &with_config("train", &["--baseline-mode", "--set", "init_scale=1e300", "--set", "epochs=1"]),
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"], "divergence");
}

#[test]
fn help_lists_every_key_with_default() {
    let out = ok(Path::new("."), &["--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    for (k, d, _) in phramem::config::KEYS {
        let line = help.lines().find(|l| l.trim_start().starts_with(&format!("{k} "))).unwrap_or_else(|| panic!("{k}"));
        if !d.is_empty() {
            assert!(line.contains(d), "{line}");
        }
    }
    for flag in ["--config", "--seed", "--threads", "--trace", "--baseline-mode", "--constant-lambda", "--null-ablation"] {
        assert!(help.contains(flag), "{flag}");
    }
}
