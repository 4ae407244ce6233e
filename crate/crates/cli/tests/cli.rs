use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIO: &str = r#"
name = "smoke"
preset = "table1-row1"
n = 16
trials = 50
seed = 4
schemes = ["proposed", "tdma"]
grid_points = 11

[sweep]
points_dbm = [10, 30]

[partitioning]
q = 1.5
epsilon = 0.1
r_bar = 0.3
step_trials = 200
"#;

fn risnoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risnoma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn version_prints_crate_version() {
    let o = risnoma(&["version"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        format!("risnoma {}\n", env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SCENARIO);
    let cfg = cfg.to_str().unwrap();
    let a = risnoma(&["simulate", cfg, "--trials", "1"]);
    let b = risnoma(&["simulate", cfg, "--trials", "1", "--threads", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("scenario,scheme,user,p_dbm,metric,value,half_width\n"));
    assert!(text.ends_with('\n'));
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("smoke,proposed,") || l.starts_with("smoke,tdma,")));
}

#[test]
fn out_flag_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SCENARIO);
    let cfg = cfg.to_str().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for out in [&first, &second] {
        let o = risnoma(&[
            "simulate",
            cfg,
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
    }
    let a = std::fs::read(&first).unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());
    let piped = risnoma(&["simulate", cfg, "--seed", "9"]);
    assert_eq!(a, piped.stdout);
}

#[test]
fn seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SCENARIO);
    let cfg = cfg.to_str().unwrap();
    let a = risnoma(&["simulate", cfg, "--seed", "1"]);
    let b = risnoma(&["simulate", cfg, "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn phase_and_correlation_flags_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SCENARIO);
    let cfg = cfg.to_str().unwrap();
    for args in [
        vec!["--correlated", "on", "--phase-bits", "3", "--kappa", "2.5"],
        vec![
            "--correlated",
            "off",
            "--phase-bits",
            "cont",
            "--kappa",
            "inf",
        ],
    ] {
        let mut all = vec!["simulate", cfg, "--trials", "20"];
        all.extend(args);
        let o = risnoma(&all);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn partition_and_outage_table_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SCENARIO);
    let cfg = cfg.to_str().unwrap();
    let p = risnoma(&["partition", cfg]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    assert!(stdout(&p).contains(",n-thr,"));
    let t = risnoma(&["outage-table", cfg]);
    assert!(t.status.success());
    assert_eq!(stdout(&t).lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let unknown = write_config(dir.path(), "u.toml", &format!("bogus = 1\n{SCENARIO}"));
    let cases: Vec<Vec<String>> = vec![
        vec!["simulate".into(), missing.display().to_string()],
        vec!["simulate".into(), unknown.display().to_string()],
        vec![
            "simulate".into(),
            "x.toml".into(),
            "--kappa".into(),
            "-1".into(),
        ],
        vec![
            "simulate".into(),
            "x.toml".into(),
            "--correlated".into(),
            "maybe".into(),
        ],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = risnoma(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn single_user_partitioning_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.toml",
        &SCENARIO.replace("table1-row1", "table1-row2"),
    );
    let o = risnoma(&["partition", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
