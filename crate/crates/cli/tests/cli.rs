use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wiener_fb::experiments::{elt_bank_default, exp3_nufb};

fn wfb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfb"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = wfb(args, cwd);
    assert!(
        out.status.success(),
        "wfb {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

const EXP1_BANK: &str = r#"
[[channels]]
lowpass = { cutoff = 0.6, length = 10 }
decimation = 2

[[channels]]
highpass = { cutoff = 0.4, length = 11 }
decimation = 2
"#;

#[test]
fn design_identity_system() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("id.toml"),
        "[[channels]]\ntaps = [1.0]\ndecimation = 1\n",
    )
    .unwrap();
    ok(
        &[
            "design", "--bank", "id.toml", "--model", "white", "--length", "1", "--delay", "0",
            "--out", "o",
        ],
        dir.path(),
    );
    let rows = csv_rows(&dir.path().join("o/synthesis_taps.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn design_experiment1_reports_mse_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.toml"), EXP1_BANK).unwrap();
    let stdout = ok(
        &[
            "design",
            "--bank",
            "b.toml",
            "--model",
            "ar:0.7,0.1",
            "--length",
            "11",
            "--delay",
            "10",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(stdout.contains("-66.397"), "{stdout}");
    let rows = csv_rows(&dir.path().join("o/mse_report.csv"));
    let total = rows.iter().find(|r| r[0] == "total").unwrap();
    let db: f64 = total[2].parse().unwrap();
    assert!((db + 66.4).abs() < 0.05);
    assert!(total[3].starts_with("analytic"));
    let meta = fs::read_to_string(dir.path().join("o/solution.toml")).unwrap();
    assert!(meta.contains("rank = 22"), "{meta}");
}

#[test]
fn lazy_bank_has_trivial_null_space() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("lazy.toml"),
        "[[channels]]\ntaps = [1.0]\ndecimation = 2\n[[channels]]\ntaps = [0.0, 1.0]\ndecimation = 2\n",
    )
    .unwrap();
    ok(
        &[
            "design",
            "--bank",
            "lazy.toml",
            "--model",
            "white",
            "--length",
            "1",
            "--delay",
            "0",
            "--out",
            "o",
        ],
        dir.path(),
    );
    let meta = fs::read_to_string(dir.path().join("o/solution.toml")).unwrap();
    assert!(meta.contains("nullspace_dim = 0"), "{meta}");
}

#[test]
fn check_pr_on_reference_banks() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("nufb.toml"), exp3_nufb().to_toml()).unwrap();
    fs::write(dir.path().join("elt.toml"), elt_bank_default().to_toml()).unwrap();
    fs::write(dir.path().join("exp1.toml"), EXP1_BANK).unwrap();

    let out = ok(
        &[
            "check-pr",
            "--bank",
            "nufb.toml",
            "--length",
            "7",
            "--delay",
            "0",
            "--out",
            "c3",
        ],
        dir.path(),
    );
    assert!(out.contains("feasible            : true"), "{out}");
    assert!(out.contains("blocked"));
    let cert: toml::Table =
        toml::from_str(&fs::read_to_string(dir.path().join("c3/certificate.toml")).unwrap())
            .unwrap();
    assert_eq!(cert["pseudocirculant_pass"].as_bool(), Some(true));
    assert_eq!(
        cert["delay_range"].as_array().unwrap()[0].as_integer(),
        Some(0)
    );

    let out = ok(
        &["check-pr", "--bank", "elt.toml", "--length", "4", "--toml"],
        dir.path(),
    );
    let cert: toml::Table = toml::from_str(&out).unwrap();
    let range: Vec<i64> = cert["delay_range"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_integer().unwrap())
        .collect();
    assert_eq!(range, vec![12, 12]);

    let out = ok(
        &["check-pr", "--bank", "exp1.toml", "--length", "11"],
        dir.path(),
    );
    assert!(out.contains("feasible            : false"), "{out}");
}

#[test]
fn mse_scan_tags_formula() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.toml"), EXP1_BANK).unwrap();
    let out = ok(
        &[
            "mse-scan",
            "--bank",
            "b.toml",
            "--model",
            "ar:0.7,0.1",
            "--length",
            "11",
            "--delays",
            "0..=20",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert!(
        out.lines()
            .any(|l| l.trim_start().starts_with("10 ") && l.ends_with("<- best")),
        "{out}"
    );
    let rows = csv_rows(&dir.path().join("s/mse_scan.csv"));
    assert_eq!(rows.len(), 21);
    assert!(rows
        .iter()
        .all(|r| r.last().unwrap().starts_with("analytic")));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.toml"), EXP1_BANK).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "bank = \"b.toml\"\nmodel = \"ar:0.7,0.1\"\nlength = 11\ndelay = 5\nout = \"from-config\"\n",
    )
    .unwrap();
    let out = ok(
        &["design", "--config", "run.toml", "--delay", "10"],
        dir.path(),
    );
    assert!(out.contains("d = 10"));
    assert!(dir.path().join("from-config/solution.toml").exists());
}

#[test]
fn config_errors_point_at_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[[channels]]\ntapz = [1.0]\ndecimation = 1\n",
    )
    .unwrap();
    let out = wfb(
        &[
            "design", "--bank", "bad.toml", "--model", "white", "--length", "1", "--delay", "0",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("bad.toml") && err.contains("line 2") && err.contains("tapz"),
        "{err}"
    );

    fs::write(
        dir.path().join("run.toml"),
        "bank = \"x.toml\"\nlenght = 3\n",
    )
    .unwrap();
    let out = wfb(&["design", "--config", "run.toml"], dir.path());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.toml") && err.contains("lenght"), "{err}");
}

#[test]
fn reproduce_experiment3_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["reproduce", "3", "--out", "r3"], dir.path());
    assert!(out.contains("PASS"), "{out}");
    let rows = csv_rows(&dir.path().join("r3/error.csv"));
    let max = rows
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max <= 1e-9, "max error {max}");
}

#[test]
fn reproduce_experiment2_pr_delay() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfb(&["reproduce", "2", "--out", "r2"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("derived prototype"));
    let sweep = csv_rows(&dir.path().join("r2/pr_sweep.csv"));
    for row in &sweep {
        let admissible = row[1] == "true";
        assert_eq!(admissible, row[0] == "12");
        if admissible {
            assert!(row[3].parse::<f64>().unwrap() <= -100.0);
        }
    }
    let table = csv_rows(&dir.path().join("r2/table2.csv"));
    assert!(table.iter().all(|r| r[6].contains("derived prototype")));
}

#[test]
fn reproduce_experiment1_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "reproduce",
            "1",
            "--runs",
            "8",
            "--samples",
            "600",
            "--seed",
            "5",
            "--out",
            out,
        ]
    };
    ok(&args("a"), dir.path());
    ok(&args("b"), dir.path());
    for f in [
        "table1.csv",
        "ensemble_channel0.csv",
        "ensemble_channel1.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let table = csv_rows(&dir.path().join("a/table1.csv"));
    let best = table
        .iter()
        .filter(|r| r[1] == "J" && r[3] == "analytic")
        .min_by(|x, y| {
            x[2].parse::<f64>()
                .unwrap()
                .total_cmp(&y[2].parse::<f64>().unwrap())
        })
        .unwrap();
    assert_eq!(best[0], "10");
    let summary = fs::read_to_string(dir.path().join("a/summary.txt")).unwrap();
    assert!(summary.contains("seed 5"));
}

#[test]
fn simulate_pr_bank_on_modulated_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("nufb.toml"), exp3_nufb().to_toml()).unwrap();
    let out = ok(
        &[
            "simulate",
            "--bank",
            "nufb.toml",
            "--length",
            "7",
            "--delay",
            "0",
            "--design",
            "pr",
            "--input",
            "modulated",
            "--samples",
            "2000",
            "--runs",
            "2",
            "--out",
            "s",
        ],
        dir.path(),
    );
    let line = out.lines().find(|l| l.starts_with("max |e(n)|")).unwrap();
    let after: f64 = line
        .split(':')
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(after <= 1e-9, "{line}");
    assert!(dir.path().join("s/ensemble.csv").exists());
}

#[test]
fn simulate_wiener_matches_analytic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.toml"), EXP1_BANK).unwrap();
    let out = ok(
        &[
            "simulate",
            "--bank",
            "b.toml",
            "--model",
            "ar:0.7,0.1",
            "--length",
            "4",
            "--delay",
            "3",
            "--samples",
            "200000",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    for line in out.lines().filter(|l| l.starts_with("J_")) {
        let nums: Vec<f64> = line
            .split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-'))
            .filter_map(|t| t.parse().ok())
            .filter(|v: &f64| *v < 0.0)
            .collect();
        assert_eq!(nums.len(), 2, "{line}");
        assert!((nums[0] - nums[1]).abs() < 0.3, "{line}");
    }
}

#[test]
fn rejects_unknown_experiment() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!wfb(&["reproduce", "4"], dir.path()).status.success());
}
