use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const REFERENCE: &str = include_str!("../configs/reference.toml");

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("config.toml"), config).unwrap();
        Workspace { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_wdmqkd"))
            .args(args)
            .arg("--config")
            .arg(self.dir.path().join("config.toml"))
            .arg("--out")
            .arg(self.out())
            .env_remove("WDMQKD_OUT_DIR")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    }

    fn calibrated(config: &str) -> Self {
        let w = Workspace::new(config);
        w.ok(&["calibrate"]);
        w
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap()
    }
}

/// Replaces the line starting with `key =`.
fn set_line(text: &str, key: &str, line: &str) -> String {
    let prefix = format!("{key} =");
    let mut hit = false;
    let out: Vec<&str> = text
        .lines()
        .map(|l| {
            if l.starts_with(&prefix) {
                hit = true;
                line
            } else {
                l
            }
        })
        .collect();
    assert!(hit, "no line {key}");
    out.join("\n") + "\n"
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn calibrate_reproduces_bench_counts_and_is_idempotent() {
    let w = Workspace::new(REFERENCE);
    let stdout = w.ok(&["calibrate"]);
    assert!(
        stdout.contains("measured 6200 cps, reproduced 6200.0 cps"),
        "{stdout}"
    );
    assert!(
        stdout.contains("measured 440400 cps, reproduced 440400.0 cps"),
        "{stdout}"
    );
    let first = w.read("calibration.toml");
    let doc: toml::Table = first.parse().unwrap();
    let coeffs = doc["raman"]["coefficients"].as_array().unwrap();
    let rho: Vec<f64> = coeffs
        .iter()
        .map(|c| c["rho"].as_float().unwrap())
        .collect();
    assert!((rho[0] / 1.97188e-14 - 1.0).abs() < 1e-4, "{rho:?}");
    assert!((rho[1] / 9.05331e-12 - 1.0).abs() < 1e-4, "{rho:?}");
    w.ok(&["calibrate"]);
    assert_eq!(w.read("calibration.toml"), first);
}

#[test]
fn negative_launch_power_names_the_key() {
    let text = REFERENCE.replacen(
        "launch_power_mw = 3.981071705534972",
        "launch_power_mw = -4.0",
        1,
    );
    let o = Workspace::new(&text).run(&["calibrate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("raman.measurements[0].launch_power_mw"),
        "{err}"
    );
}

#[test]
fn missing_anchors_are_named() {
    let start = REFERENCE.find("anchors = [").unwrap();
    let end = start + REFERENCE[start..].find("]\n\n").unwrap() + 2;
    let text = format!("{}{}", &REFERENCE[..start], &REFERENCE[end..]);
    let o = Workspace::new(&text).run(&["calibrate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("classical.anchors"));
}

#[test]
fn unknown_calibration_version_is_rejected() {
    let w = Workspace::calibrated(REFERENCE);
    let path = w.out().join("calibration.toml");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replace("format_version = 1", "format_version = 9");
    fs::write(&path, text).unwrap();
    let o = w.run(&["sweep", "--kind", "power"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("format_version"));
}

#[test]
fn sweep_without_calibration_is_a_config_error() {
    let o = Workspace::new(REFERENCE).run(&["sweep", "--kind", "power"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn crossover_row() {
    let w = Workspace::calibrated(REFERENCE);
    w.ok(&["sweep", "--kind", "crossover"]);
    let (h, rows) = csv_rows(&w.read("sweep_crossover.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][col(&h, "status")], "found");
    let p: f64 = rows[0][col(&h, "crossover_dbm")].parse().unwrap();
    assert!((p + 0.76).abs() <= 0.5, "{p}");
}

#[test]
fn power_sweep_columns_and_order() {
    let w = Workspace::calibrated(REFERENCE);
    w.ok(&["sweep", "--kind", "power"]);
    let (h, rows) = csv_rows(&w.read("sweep_power.csv"));
    assert_eq!(
        h,
        ["power_dbm", "y0", "qber", "key_bps", "ber_raw", "fec_pass"]
    );
    assert_eq!(rows.len(), 11);
    let key: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(key.windows(2).all(|k| k[1] <= k[0]), "{key:?}");
}

#[test]
fn distance_rows_match_measured_anchors() {
    let w = Workspace::calibrated(REFERENCE);
    w.ok(&["sweep", "--kind", "distance"]);
    let (h, rows) = csv_rows(&w.read("sweep_distance.csv"));
    assert_eq!(&h[..2], ["distance_km", "direction"]);
    let at = |d: &str| rows.iter().find(|r| r[0] == d).unwrap();
    let key = |r: &Vec<String>| r[col(&h, "key_bps")].parse::<f64>().unwrap();
    let qber = |r: &Vec<String>| r[col(&h, "qber")].parse::<f64>().unwrap();
    let r50 = at("50");
    assert!(key(r50) / 18.7e3 < 3.0 && 18.7e3 / key(r50) < 3.0);
    assert!((qber(r50) - 0.0198).abs() <= 0.01);
    let r80 = at("80");
    assert_eq!(r80[col(&h, "power_dbm")], "8");
    assert!((qber(r80) - 0.031).abs() <= 0.01, "{}", qber(r80));
    for d in ["50", "60", "70", "80"] {
        assert!(key(at(d)) > 0.0);
        assert_eq!(at(d)[col(&h, "fec_pass")], "true");
        assert_eq!(at(d)[1], "co");
    }
}

#[test]
fn empty_grids_give_header_only() {
    let text = set_line(REFERENCE, "powers_dbm", "powers_dbm = []");
    let text = set_line(&text, "distances_km", "distances_km = []");
    let w = Workspace::calibrated(&text);
    for kind in ["power", "distance", "plan"] {
        w.ok(&["sweep", "--kind", kind]);
        let body = w.read(&format!("sweep_{kind}.csv"));
        assert_eq!(body.lines().count(), 1, "{kind}: {body}");
    }
}

#[test]
fn infeasible_plan_still_writes_csv() {
    let text = set_line(REFERENCE, "distances_km", "distances_km = [150.0, 200.0]");
    let w = Workspace::calibrated(&text);
    w.ok(&["sweep", "--kind", "plan"]);
    let (h, rows) = csv_rows(&w.read("sweep_plan.csv"));
    assert_eq!(h.last().unwrap(), "chosen");
    assert_eq!(rows.len(), 2 * 11 + 1);
    let summary = rows.last().unwrap();
    assert_eq!(summary[0], "summary");
    assert_eq!(summary[1], "infeasible");
    assert!(rows[..rows.len() - 1]
        .iter()
        .all(|r| r.last().unwrap() == "false"));
}

#[test]
fn feasible_plan_marks_one_row() {
    let w = Workspace::calibrated(REFERENCE);
    w.ok(&["sweep", "--kind", "plan"]);
    let (_, rows) = csv_rows(&w.read("sweep_plan.csv"));
    let chosen = rows
        .iter()
        .filter(|r| r.last().unwrap() == "true" && r[0] != "summary")
        .count();
    assert_eq!(chosen, 1);
    assert_eq!(rows.last().unwrap()[1], "feasible");
}

fn artifacts(out: &Path) -> Vec<(String, Vec<u8>)> {
    [
        "alice_key.bin",
        "bob_key.bin",
        "transcript.csv",
        "summary.toml",
    ]
    .iter()
    .map(|f| (f.to_string(), fs::read(out.join(f)).unwrap()))
    .collect()
}

#[test]
fn e2e_session_yields_identical_keys_and_replays() {
    let w = Workspace::calibrated(REFERENCE);
    w.ok(&["e2e"]);
    let first = artifacts(&w.out());
    assert_eq!(first[0].1, first[1].1);
    assert!(!first[0].1.is_empty());
    let summary: toml::Table = w.read("summary.toml").parse().unwrap();
    assert!(summary["m"].as_integer().unwrap() > 0);
    assert!(summary["verified"].as_bool().unwrap());
    assert_eq!(summary["seconds"].as_float().unwrap(), 0.016);
    let (h, rows) = csv_rows(&w.read("transcript.csv"));
    assert_eq!(h, ["pass", "block", "start", "end", "parity"]);
    assert_eq!(
        rows.len() as i64,
        summary["leakage_bits"].as_integer().unwrap()
    );

    w.ok(&["e2e"]);
    assert_eq!(artifacts(&w.out()), first);
    w.ok(&["e2e", "--seed", "2"]);
    assert_ne!(artifacts(&w.out())[0], first[0]);
}

#[test]
fn forced_half_qber_withholds_keys() {
    let text = REFERENCE.replace(
        "seed = 1\npower_dbm = 4.0\n",
        "seed = 1\npower_dbm = 4.0\nforced_qber = 0.5\n",
    );
    let text = set_line(&text, "n_pulses", "n_pulses = 1_000_000");
    let w = Workspace::calibrated(&text);
    let o = w.run(&["e2e"]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("secure=false"));
    assert!(!w.out().join("alice_key.bin").exists());
    assert!(!w.out().join("bob_key.bin").exists());
    let summary: toml::Table = w.read("summary.toml").parse().unwrap();
    assert!(!summary["secure"].as_bool().unwrap());
}

#[test]
fn output_directory_from_environment() {
    let w = Workspace::new(REFERENCE);
    let target = w.dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_wdmqkd"))
        .args(["calibrate", "--config"])
        .arg(w.dir.path().join("config.toml"))
        .env("WDMQKD_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("calibration.toml").exists());
}
