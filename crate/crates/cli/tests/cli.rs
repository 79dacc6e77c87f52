use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blochnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(experiment: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        experiment,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn identical_runs_write_identical_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "film.toml",
        "sites = 120\nphi = [0.0, 0.5, 1.0]\nalpha = 0.2\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_config("film", &cfg, &a, &["--threads", "1"]).status.success());
    assert!(run_config("film", &cfg, &b, &["--threads", "2"]).status.success());
    for name in ["film_T.csv", "film_R.csv"] {
        let fa = fs::read(a.join(name)).unwrap();
        let fb = fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name}");
    }
    let t = fs::read_to_string(a.join("film_T.csv")).unwrap();
    assert!(t.starts_with("phi,T\n"), "{t}");
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", "sites = 100\nalhpa = 0.1\n");
    let o = run_config("film", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alhpa"), "{}", stderr(&o));
}

#[test]
fn mismatched_experiment_tag_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "tag.toml", "experiment = \"ab\"\n");
    let o = run_config("film", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run_config("film", &dir.path().join("none.toml"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn packet_overflowing_its_chain_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "star.toml",
        "m = 2\ninput = 20\narm = 20\n[packet]\nalpha = 0.05\nn0 = 3\n",
    );
    let o = run_config("star", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical error in"), "{}", stderr(&o));
}

#[test]
fn manifest_records_resolved_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "film.toml", "sites = 100\nphi = [0.0]\n");
    let out = dir.path().join("out");
    assert!(run_config("film", &cfg, &out, &["--gauge", "uniform"]).status.success());
    let m: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(m["experiment"].as_str(), Some("film"));
    assert_eq!(m["gauge"].as_str(), Some("uniform"));
    let p = m["parameters"].as_table().unwrap();
    assert_eq!(p["alpha"].as_float(), Some(0.1));
    assert_eq!(p["sites"].as_integer(), Some(100));
    let outputs: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|v| v.as_str())
        .collect();
    assert_eq!(outputs, ["film_T.csv", "film_R.csv"]);
    assert!(p["tau"].as_float().unwrap() > 0.0);
}

#[test]
fn reduce_report_on_quarter_flux_ring_is_one_chain() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config("reduce-report", &configs().join("reduce.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("partition: a(16)"), "{report}");
    let residual: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("residual: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual <= 1e-14);
}

#[test]
fn sweep_over_network_file_matches_flux_periodicity() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "sweep.toml",
        &format!(
            "network = {:?}\ninput_chain = \"A\"\ndetector = \"D:100\"\nphi = {{ min = 0.0, max = 1.0, points = 3 }}\n[packet]\nalpha = 0.3\nn0 = 50\n",
            configs().join("networks/ab_ring.net")
        ),
    );
    let out = dir.path().join("out");
    let o = run_config("sweep", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("flux_Q.csv")).unwrap();
    let q: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(q.len(), 3);
    assert!(q[1] < 1e-10, "half flux Q = {}", q[1]);
    assert!((q[0] - q[2]).abs() < 1e-10);
    assert!(q[0] > 0.3);
}

#[test]
fn sample_ybeam_config_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "y.toml",
        "input = 30\narm_b = 30\narm_c = 30\nt_nb = { min = 0.5, max = 1.0, points = 2 }\nt_nc = { min = 0.5, max = 1.0, points = 2 }\n[packet]\nalpha = 0.3\nn0 = 15\n",
    );
    let out = dir.path().join("out");
    let o = run_config("ybeam", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body = fs::read_to_string(out.join("reflection_scan.csv")).unwrap();
    assert_eq!(body.lines().count(), 5);
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn ybeam_sample_config_reflects_nothing_on_the_matching_circle() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config("ybeam", &configs().join("ybeam.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out.join("reflection_scan.csv"));
    assert_eq!(rows.len(), 21 * 21);
    let circle: Vec<&Vec<f64>> = rows
        .iter()
        .filter(|r| (r[0] * r[0] + r[1] * r[1] - 1.0).abs() < 1e-9)
        .collect();
    assert_eq!(circle.len(), 4);
    for r in circle {
        assert!(r[2] <= 0.02, "R({}, {}) = {}", r[0], r[1], r[2]);
    }
}

#[test]
fn ab_sample_config_is_periodic_in_flux() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config("ab", &configs().join("ab.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out.join("flux_Q.csv"));
    assert_eq!(rows.len(), 2 * 2 * 33);
    let mut compared = 0;
    for a in &rows {
        for b in &rows {
            if a[0] == b[0] && a[1] == b[1] && (b[2] - a[2] - 1.0).abs() < 1e-12 {
                assert!((a[3] - b[3]).abs() <= 1e-9, "{a:?} vs {b:?}");
                compared += 1;
            }
        }
    }
    assert_eq!(compared, 2 * 2 * 25);
}

#[test]
fn spin_y_junction_transmits_into_both_arms() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config("qring", &configs().join("spin_y.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("chain_weights.csv")).unwrap();
    let last: Vec<(String, f64)> = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[0] == "12")
        .map(|r| (r[1].to_string(), r[2].parse().unwrap()))
        .collect();
    assert_eq!(last.len(), 3);
    assert!(last[0].1 <= 0.01, "{last:?}");
    assert!((last[1].1 - last[2].1).abs() <= 1e-9, "{last:?}");
}
