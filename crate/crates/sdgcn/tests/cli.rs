mod common;

use std::path::Path;
use std::process::{Command, Output};

use sdgcn::export::{parse_attention, parse_fields};
use sdgcn_core::synthetic::{gen_synthetic, SyntheticSpec};

fn sdgcn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdgcn"))
        .current_dir(dir)
        .env_remove("SDGCN_DATA_DIR")
        .env_remove("SDGCN_GLOVE")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(dir: &Path) {
    let spec = SyntheticSpec {
        mask_token: "something".into(),
        ..SyntheticSpec::default()
    };
    let c = gen_synthetic(&spec, 30, 2).unwrap();
    common::write_restaurant_pair(dir, &c.instances[..20], &c.instances[20..]);
}

#[test]
fn unknown_flag_exits_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgcn(dir.path(), &["gradcheck", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_config_exits_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgcn(dir.path(), &["train", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_key_exits_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "widht = 3\n").unwrap();
    let o = sdgcn(dir.path(), &["train", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn gradcheck_passes_on_the_unmodified_build() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgcn(dir.path(), &["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max rel err < 1e-4"));
    let results = std::fs::read_to_string(dir.path().join("sdgcn_results.txt")).unwrap();
    let f = parse_fields(results.lines().last().unwrap()).unwrap();
    assert_eq!(f["command"], "gradcheck");
    assert_eq!(f["passed"], "true");
    assert!(f.contains_key("runtime_s"));
}

#[test]
fn stats_prints_counts_and_deviation() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = sdgcn(dir.path(), &["stats", "--dataset", "restaurant", "--data-dir", "."]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("restaurant.train.sentences=20\n"));
    assert!(out.contains("restaurant.train.positive.expected=2164\n"));
    assert!(out.contains("DEVIATION restaurant train"));
}

#[test]
fn stats_without_data_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgcn(dir.path(), &["stats"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    std::fs::write(
        dir.path().join("tiny.cfg"),
        "data_dir = .\nd_emb = 4\nd_hid = 3\nepochs = 2\nbatch_size = 8\ndropout = 0.0\n",
    )
    .unwrap();
    let o = sdgcn(dir.path(), &["train", "--config", "tiny.cfg", "--out-dir", "out", "--set", "topology=adjacent"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["best.ckpt", "final.ckpt", "vocab.txt", "config.cfg", "epochs.log", "attention.txt"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let log = std::fs::read_to_string(dir.path().join("out/epochs.log")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let att = parse_attention(&std::fs::read_to_string(dir.path().join("out/attention.txt")).unwrap()).unwrap();
    assert!(!att.is_empty());
    for r in &att {
        assert_eq!(r.tokens.len(), r.weights.len());
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-4);
    }

    let best = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("best.accuracy=").map(str::to_string))
        .unwrap();
    let e = sdgcn(dir.path(), &["eval", "--run-dir", "out", "--attention", "eval_att.txt"]);
    assert_eq!(e.status.code(), Some(0), "{}", String::from_utf8_lossy(&e.stderr));
    assert!(stdout(&e).contains(&format!("test.accuracy={best}\n")));
    let again = std::fs::read_to_string(dir.path().join("eval_att.txt")).unwrap();
    assert_eq!(again, std::fs::read_to_string(dir.path().join("out/attention.txt")).unwrap());
}

#[test]
fn synth_writes_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgcn(dir.path(), &["synth", "--count", "50", "--out", "syn.tsv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("syn.tsv")).unwrap();
    assert_eq!(text.lines().count(), 50);
    assert!(text.contains("[mask]"));
}
