use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn p2atlas(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_p2atlas"));
    c.args(args).current_dir(dir).env_remove("P2ATLAS_THREADS");
    if let Some(t) = threads {
        c.env("P2ATLAS_THREADS", t);
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn config_round_trips_through_file() {
    let d = tempfile::tempdir().unwrap();
    let o = p2atlas(
        &["poles", "--n", "4", "--lambda", "1", "-1", "--window", "-2", "-2", "2", "2", "--seed", "7", "--precision", "extended", "--out-dir", "res", "--dump-config", "a.toml", "--dry-run"],
        d.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = read(d.path().join("a.toml"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), a);
    assert!(a.contains("lambda = [1.0, -1.0]") && a.contains("precision = \"extended\""));
    let o = p2atlas(&["run", "--config", "a.toml", "--dump-config", "b.toml", "--dry-run"], d.path(), None);
    assert_eq!(code(&o), 0);
    assert_eq!(read(d.path().join("b.toml")), a);
    // flags override the file
    let o = p2atlas(&["run", "--config", "a.toml", "--lambda", "inf", "--dry-run"], d.path(), None);
    assert!(String::from_utf8(o.stdout).unwrap().contains("lambda = \"inf\""));
}

#[test]
fn invalid_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.toml"), "command = \"poles\"\nwidth = 3\n").unwrap();
    std::fs::write(d.path().join("broken.toml"), "n = [\n").unwrap();
    let cases: [&[&str]; 8] = [
        &["poles", "--n", "0"],
        &["poles", "--n", "99"],
        &["phase", "--window", "1", "1", "-1", "-1"],
        &["bridge", "--bigN", "0"],
        &["poles", "--lambda", "infinity"],
        &["run", "--config", "bad.toml"],
        &["run", "--config", "broken.toml"],
        &["run", "--config", "absent.toml"],
    ];
    for args in cases {
        let o = p2atlas(args, d.path(), None);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("invalid config"), "{args:?}");
    }
    assert_eq!(code(&p2atlas(&["bridge", "--n", "1"], d.path(), Some("lots"))), 2);
    assert_eq!(code(&p2atlas(&["trajectories", "--nonsense"], d.path(), None)), 2);
}

#[test]
fn degenerate_point_exits_3_with_diagnostic() {
    // at t_cr three zeros of Q merge and no S-curve chain exists in the traced graph
    let d = tempfile::tempdir().unwrap();
    let t_cr = format!("{}", 3.0 * 2f64.powf(-2.0 / 3.0));
    let o = p2atlas(&["trajectories", "--t", &t_cr, "0", "--out-dir", "o"], d.path(), None);
    assert_eq!(code(&o), 3);
    let diag: serde_json::Value = serde_json::from_str(&read(d.path().join("o/p2atlas-diagnostic.json"))).unwrap();
    assert_eq!(diag["schema"], "p2atlas.diagnostic/1");
    assert_eq!(diag["command"], "trajectories");
    assert!(diag["message"].as_str().unwrap().contains("s-curve"));
    assert_eq!(diag["config"]["t"][0].as_f64().unwrap().to_string(), t_cr);
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let d = tempfile::tempdir().unwrap();
    for (dir, threads) in [("a", None), ("b", Some("1")), ("c", Some("2"))] {
        let o = p2atlas(&["bridge", "--n", "3", "--lambda", "1", "1", "--bigN", "2", "--out-dir", dir], d.path(), threads);
        assert_eq!(code(&o), 0);
        let o = p2atlas(&["trajectories", "--t", "4", "1", "--out-dir", dir], d.path(), threads);
        assert_eq!(code(&o), 0);
    }
    for f in ["bridge.csv", "bridge.json", "trajectories.csv", "trajectories.json"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        for other in ["b", "c"] {
            assert_eq!(a, std::fs::read(d.path().join(other).join(f)).unwrap(), "{f}");
        }
    }
    let csv = read(d.path().join("a/bridge.csv"));
    assert_eq!(csv.lines().next().unwrap(), "n,t_re,t_im,bigN,beta_rel,gamma2_rel,p_sub_rel,d_tau_rel");
    assert_eq!(csv.lines().count(), 1 + 3 * 25);
    for line in csv.lines().skip(1) {
        for cell in line.split(',').skip(4) {
            assert!(cell.parse::<f64>().unwrap() < 1e-9, "{line}");
        }
    }
}

#[test]
fn phase_grid_meets_three_labels_only_at_corners() {
    let d = tempfile::tempdir().unwrap();
    let o = p2atlas(&["phase", "--grid", "400", "--out-dir", "o"], d.path(), None);
    assert_eq!(code(&o), 0);
    let csv = read(d.path().join("o/phase.csv"));
    let rows: Vec<(f64, f64, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].to_string())
        })
        .collect();
    let r = 400;
    assert_eq!(rows.len(), r * r);
    let h = 8.0 / (r - 1) as f64;
    let t_cr = 3.0 * 2f64.powf(-2.0 / 3.0);
    let corners: Vec<(f64, f64)> = (0..3).map(|k| {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
        (t_cr * a.cos(), t_cr * a.sin())
    }).collect();
    let mut hit = [false; 3];
    for i in 1..r - 1 {
        for j in 1..r - 1 {
            let mut labels = BTreeSet::new();
            for di in [i - 1, i, i + 1] {
                for dj in [j - 1, j, j + 1] {
                    labels.insert(rows[di * r + dj].2.as_str());
                }
            }
            if labels.len() >= 3 {
                let (x, y) = (rows[i * r + j].0, rows[i * r + j].1);
                let k = (0..3).find(|&k| (x - corners[k].0).hypot(y - corners[k].1) < 2.0 * h);
                assert!(k.is_some(), "three labels meet at ({x}, {y}), away from the corners: {labels:?}");
                hit[k.unwrap()] = true;
            }
        }
    }
    assert_eq!(hit, [true; 3]);
}

#[test]
fn poles_n3_at_infinity() {
    let d = tempfile::tempdir().unwrap();
    let o = p2atlas(&["poles", "--n", "3", "--lambda", "inf", "--window", "-8", "-8", "8", "8", "--out-dir", "o"], d.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path().join("o/poles.csv"));
    assert_eq!(csv.lines().next().unwrap(), "re,im,kind");
    let pts: Vec<(f64, f64, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].to_string())
        })
        .collect();
    let count = |k: &str| pts.iter().filter(|p| p.2 == k).count();
    // frozen from the first passing build
    assert_eq!((count("pole+"), count("pole-"), count("zero")), (21, 32, 59));
    // q_3(z; inf) is real on the real axis, so every kind is closed under conjugation
    for (x, y, k) in &pts {
        let mirror = pts.iter().filter(|q| &q.2 == k).map(|q| (q.0 - x).hypot(q.1 + y)).fold(f64::INFINITY, f64::min);
        assert!(mirror < 1e-8, "{k} at ({x}, {y})");
    }
    let svg = read(d.path().join("o/poles.svg"));
    assert!(svg.starts_with("<?xml") && svg.contains("<!-- p2atlas ") && svg.contains("<polyline"));
    let doc: serde_json::Value = serde_json::from_str(&read(d.path().join("o/poles.json"))).unwrap();
    assert_eq!(doc["schema"], "p2atlas.poles/1");
    assert_eq!(doc["complete"], true);
}

#[test]
fn verify_subset_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = p2atlas(&["verify", "--criteria", "1,2,10", "--json", "v.json"], d.path(), None);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("3/3 criteria pass"), "{out}");
    let doc: serde_json::Value = serde_json::from_str(&read(d.path().join("v.json"))).unwrap();
    assert_eq!(doc["criteria"].as_array().unwrap().len(), 3);
    assert!(doc["criteria"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}
