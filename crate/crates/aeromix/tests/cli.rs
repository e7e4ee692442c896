use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aeromix(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeromix"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) {
    let base = "seed = 11
synth.nrows = 30
synth.ncols = 30
synth.n_days = 15
synth.n_stations = 12
data_dir = scene
grid.n_trees = 40
grid.max_depth = 3
grid.learning_rate = 0.1
grid.subsample = 1.0
rf.n_trees = 20
scenarios = 1
";
    fs::write(dir.join("run.conf"), format!("{base}{extra}")).unwrap();
}

#[test]
fn missing_station_csv_is_input_missing() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = aeromix(
        &["--config", "run.conf", "--out", "o", "preprocess"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error[input-missing]: "), "{stderr}");
    assert!(stderr.contains("stations.csv"), "{stderr}");
}

#[test]
fn bad_config_key_and_missing_seed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.conf"), "sed = 1\n").unwrap();
    let out = aeromix(&["--config", "bad.conf", "synth"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]: "));

    let out = aeromix(&["--out", "s", "synth"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    for out in ["a", "b"] {
        let o = aeromix(&["--config", "run.conf", "--out", out, "synth"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (
        read_tree(&dir.path().join("a")),
        read_tree(&dir.path().join("b")),
    );
    assert!(a.len() > 10);
    assert_eq!(a, b);
    let o = aeromix(
        &[
            "--config", "run.conf", "--out", "c", "--seed", "12", "synth",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_ne!(read_tree(&dir.path().join("c")), a);
}

fn fused_r2(csv: &str) -> f64 {
    let line = csv
        .lines()
        .find(|l| l.starts_with("all,fused,"))
        .expect("fused row");
    line.split(',').nth(2).unwrap().parse().unwrap()
}

#[test]
fn zero_degradation_pipeline_is_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let mut conf = String::from(
        "seed = 11
synth.nrows = 50
synth.ncols = 50
synth.n_days = 30
synth.n_stations = 30
data_dir = scene
grid.n_trees = 200
grid.max_depth = 3
grid.learning_rate = 0.1
grid.subsample = 1.0
",
    );
    for p in ["mdb", "mdt", "vdb", "vdt"] {
        conf += &format!("synth.{p}.bias = 0\nsynth.{p}.noise_sd = 0\nsynth.{p}.validity = 1\nsynth.{p}.qa_fidelity = 1\n");
    }
    fs::write(dir.path().join("run.conf"), conf).unwrap();
    let o = aeromix(
        &["--config", "run.conf", "--out", "scene", "synth"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = aeromix(
        &["--config", "run.conf", "--out", "fd", "fuse-data"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r2 = fused_r2(&fs::read_to_string(dir.path().join("fd/data_level.csv")).unwrap());
    assert!(r2 > 0.95, "R2 {r2}");
    let manifest = fs::read_to_string(dir.path().join("fd/manifest.txt")).unwrap();
    assert!(manifest.contains("command = fuse-data") && manifest.contains("config_sha256 = "));
    assert!(manifest.contains("data_level.csv"));
}
