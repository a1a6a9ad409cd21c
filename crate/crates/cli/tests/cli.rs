use std::path::Path;
use std::process::Command;

fn cmgrj(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_cmgrj")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn end_to_end_on_tiny_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        "[workload]\ncount = 16\n[harness.cost]\nmode = \"synthetic\"\n\
         [harness.cmlero]\nepochs = 5\n[harness.rlm]\nepochs = 5\n",
    )
    .unwrap();
    let cfg = p(d, "c.toml");
    let (data, wl, log) = (p(d, "data"), p(d, "wl"), p(d, "log.jsonl"));
    cmgrj(&["gen", "--out", &data, "--seed", "2"]);
    assert!(cmgrj(&["--config", &cfg, "workload", "--data", &data, "--out", &wl]).starts_with("16 queries"));
    cmgrj(&["--config", &cfg, "collect", "--data", &data, "--workload", &wl, "--out", &log]);
    let (cw, rw) = (p(d, "c.json"), p(d, "r.json"));
    let common = ["--data", data.as_str(), "--workload", wl.as_str(), "--log", log.as_str()];
    let mut train = vec!["--config", &cfg, "train"];
    train.extend(common);
    cmgrj(&[train.as_slice(), &["--out", &cw]].concat());
    cmgrj(&[train.as_slice(), &["--model", "rlm", "--out", &rw]].concat());
    let csv = p(d, "m.csv");
    let mut eval = vec!["--config", &cfg, "eval"];
    eval.extend(common);
    let table = cmgrj(&[eval.as_slice(), &["--cmlero", &cw, "--rlm", &rw, "--csv", &csv]].concat());
    for name in ["CMLero", "Baseline-RLM", "Baseline-TS", "Baseline-FVN", "Raw"] {
        assert!(table.contains(name), "{table}");
    }
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 6);
    let picked = cmgrj(&["select", "--data", &data, "--query", &p(d, "wl/q0000.cmgrj"), "--weights", &cw]);
    assert!(picked.starts_with("plan "), "{picked}");
}

#[test]
fn rejects_bad_scale_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cmgrj"))
        .args(["gen", "--preset", "ldbc", "--sf", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scale factor 3"));
}
