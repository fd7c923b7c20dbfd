use std::path::Path;
use std::process::{Command, Output};

fn hyperpam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperpam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn strip_wall_time(mut v: Vec<serde_json::Value>) -> Vec<serde_json::Value> {
    for r in v.iter_mut() {
        r.as_object_mut().unwrap().remove("wall_time_s");
    }
    v
}

const SMALL_MC: [&str; 8] = [
    "--set",
    "mc.n_paths=600",
    "--set",
    "mc.t_end=0.2",
    "--set",
    "noise.beta=1.5",
    "--set",
    "noise.alpha=0.6",
];

#[test]
fn validate_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyperpam(&["validate", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 10);
    assert!(!text.contains("FAIL"));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn bounds_below_threshold_give_minus_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hyperpam(&[
        "bounds", "--out", out, "--set", "moment.r=2", "--set", "sweep.beta_min=0.1", "--set",
        "sweep.beta_points=1", "--set", "sweep.p_max=2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("bounds.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["beta", "p", "r", "theta", "upper_exponent", "regime"]
    );
    let row = rdr.records().next().unwrap().unwrap();
    assert_eq!(&row[1], "2");
    assert_eq!(row[4].parse::<f64>().unwrap(), -2.0);
}

#[test]
fn moment_mc_is_reproducible_and_worker_invariant() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let run = |dir: &Path, workers: &str| {
        let mut args = vec!["moment-mc", "--format", "jsonl", "--workers", workers, "--out"];
        args.push(dir.to_str().unwrap());
        args.extend_from_slice(&SMALL_MC);
        let o = hyperpam(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        strip_wall_time(read_jsonl(&dir.join("moments.jsonl")))
    };
    let ra = run(a.path(), "1");
    let rb = run(b.path(), "1");
    assert_eq!(ra, rb);
    let mut rc = run(c.path(), "8");
    for r in rc.iter_mut() {
        r["workers"] = serde_json::json!(1);
    }
    assert_eq!(ra, rc);
    assert_eq!(ra[0]["bias"], "LOWER");
}

#[test]
fn manifest_digests_and_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = hyperpam(&["bounds", "--out", a.path().to_str().unwrap(), "--set", "sweep.beta_points=4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = a.path().join("manifest.json");
    let v = hyperpam(&["verify", manifest.to_str().unwrap()]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stdout));

    let r = hyperpam(&["rerun", manifest.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let ma: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    let mb: serde_json::Value =
        serde_json::from_slice(&std::fs::read(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["config_echo"], mb["config_echo"]);

    std::fs::write(a.path().join("bounds.csv"), "tampered\n").unwrap();
    let v = hyperpam(&["verify", manifest.to_str().unwrap()]);
    assert!(!v.status.success());
}

#[test]
fn dalang_violation_is_rejected_with_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyperpam(&["bounds", "--out", dir.path().to_str().unwrap(), "--set", "noise.alpha=0.2"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("Dalang") && e.contains("0.25"), "{e}");
}

#[test]
fn config_errors_point_at_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nn = 3\nK = = 1\n").unwrap();
    let o = hyperpam(&["bounds", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    std::fs::write(&bad, "[mc]\nn_path = 3\n").unwrap();
    let o = hyperpam(&["bounds", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_path"), "{}", stderr(&o));
}

#[test]
fn remaining_subcommands_emit_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases: [(&[&str], &[&str]); 5] = [
        (&["kernel-table"], &["kernel_exact.csv", "kernel_gbar.csv", "heat_kernel.csv"]),
        (
            &["bm-sample", "--set", "mc.n_paths=20", "--set", "mc.t_end=0.5"],
            &["paths.csv", "radial.csv"],
        ),
        (
            &["phase-diagram", "--set", "sweep.beta_points=3", "--set", "sweep.p_max=3"],
            &["phase.csv", "beta_critical.csv", "p_critical.csv"],
        ),
        (&["slope-check"], &["slope_series.csv", "slope_report.json"]),
        (
            &[
                "intermittency", "--set", "mc.n_paths=300", "--set", "moment.p=3", "--set",
                "mc.times=[0.05, 0.1]",
            ],
            &["intermittency.csv"],
        ),
    ];
    for (args, files) in cases {
        let mut all = args.to_vec();
        all.extend_from_slice(&["--out", out]);
        let o = hyperpam(&all);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        for f in files {
            assert!(dir.path().join(f).exists(), "{args:?} did not write {f}");
        }
    }
}
