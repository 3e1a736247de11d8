use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatgraph"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heatgraph-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn star_file(dir: &Path) -> PathBuf {
    let out = run(bin().args(["gen", "--type", "star", "--rays", "3", "--len", "1"]));
    assert!(out.status.success());
    let path = dir.join("star.json");
    std::fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn gen_writes_graph_json() {
    let out = run(bin().args(["gen", "--type", "star", "--rays", "3", "--len", "1"]));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["edges"].as_array().unwrap().len(), 3);
}

#[test]
fn dist_prints_one_number() {
    let dir = scratch("dist");
    let g = star_file(&dir);
    let out = run(bin().args(["dist", "--graph"]).arg(&g).args(["--from", "v:0", "--to", "e:1:0.5"]));
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "5.00000000000e-1");
    let bad = run(bin().args(["dist", "--graph"]).arg(&g).args(["--from", "x:1", "--to", "v:0"]));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn elliptic_star_case() {
    let dir = scratch("elliptic");
    let g = star_file(&dir);
    let out = run(bin()
        .args(["harnack-elliptic", "--graph"])
        .arg(&g)
        .args(["--center", "v:0", "--r", "0.4", "--sample", "0,0,3"]));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((v["max_ratio"].as_f64().unwrap() - 4.0).abs() < 1e-8);
}

#[test]
fn unknown_check_exits_2() {
    let dir = scratch("unknown");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "name = \"bad\"\n[graph]\ngenerator = \"star\"\nrays = 3\nlen = 1.0\n[[checks]]\nkind = \"telepathy\"\n").unwrap();
    let out = run(bin().args(["suite", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_suite_exits_0_with_empty_report() {
    let dir = scratch("empty");
    let cfg = dir.join("empty.toml");
    std::fs::write(&cfg, "name = \"empty\"\n").unwrap();
    let out = run(bin().args(["suite", "--config"]).arg(&cfg).arg("--out").arg(dir.join("rep")));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.join("rep/report.jsonl")).unwrap(), "");
}

const SMALL: &str = r#"
name = "small"
seed = 4
h = 0.05
dt = 1e-3

[graph]
generator = "lattice"
dim = 1
side = 20

[[checks]]
kind = "kernel-oracle"
source = "v:10"
times = [0.1, 0.25]
max_distance = 2.0
tol = 0.02

[[checks]]
kind = "nash"
center = "v:10"
radius = 3.0
samples = 5

[[checks]]
kind = "doubling"
centers = ["v:10"]
radii = [0.5, 1.0]
"#;

#[test]
fn suite_is_reproducible_and_hashed() {
    let dir = scratch("repro");
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let mut reports = Vec::new();
    for k in 0..2 {
        let out_dir = dir.join(format!("run{k}"));
        let out = run(bin().args(["--threads", "2", "suite", "--config"]).arg(&cfg).arg("--out").arg(&out_dir));
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(out_dir.join("01-kernel-oracle.csv").exists());
        assert!(out_dir.join("03-doubling.csv").exists());
        reports.push(std::fs::read_to_string(out_dir.join("report.jsonl")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let hashes: Vec<String> = reports[0]
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["config_hash"].as_str().unwrap().to_string())
        .collect();
    assert!(hashes.len() >= 8);
    assert!(hashes.iter().all(|h| h == &hashes[0] && h.len() == 16));
}

#[test]
fn failing_asserted_check_is_nonzero() {
    let dir = scratch("fail");
    let cfg = dir.join("fail.toml");
    let text = SMALL.replace("tol = 0.02", "tol = 1e-12");
    std::fs::write(&cfg, text).unwrap();
    let out = run(bin().args(["suite", "--config"]).arg(&cfg).arg("--out").arg(dir.join("rep")));
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn bundled_suites_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("suites");
    for name in ["line-oracle.toml", "acceptance.toml"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let v: toml::Value = toml::from_str(&text).unwrap();
        assert!(v["checks"].as_array().unwrap().len() >= 5, "{name}");
    }
}

#[test]
fn bundled_line_oracle_suite_passes() {
    let dir = scratch("line-oracle");
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("suites/line-oracle.toml");
    let out = run(bin().args(["suite", "--config"]).arg(&cfg).arg("--out").arg(&dir));
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = std::fs::read_to_string(dir.join("report.jsonl")).unwrap();
    assert!(report.contains("kernel-oracle"));
}
