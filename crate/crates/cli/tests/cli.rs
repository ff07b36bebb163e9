use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn localmart(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_localmart"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("LOCALMART_THREADS", t),
        None => cmd.env_remove("LOCALMART_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run(config: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    localmart(&args, threads)
}

fn report(out: &Path) -> String {
    fs::read_to_string(out.join("report.json")).unwrap()
}

#[test]
fn ds_example_flags_arbitrage_and_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&scenario("ds-example.conf"), dir.path(), &[], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert!(r.contains("\"ARBITRAGE\""));
    assert!(r.contains("\"VIOLATION_SUSPECTED\""));
    assert!(r.contains("\"master_seed\": 20240601"));
    assert!(r.contains("\"schema_version\": 1"));
    assert!(r.contains("model = ds-example"));
    for f in [
        "star.csv",
        "star.svg",
        "short-hold_strategy_gains.csv",
        "short-hold_strategy_gains.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn gbm_martingale_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&scenario("gbm-martingale.conf"), dir.path(), &["--paths", "5000"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert!(r.contains("\"MARTINGALE_CONSISTENT\""));
    assert!(r.contains("\"paths\": 5000"));
    let csv = fs::read_to_string(dir.path().join("defect.csv")).unwrap();
    assert!(csv.starts_with("t,mean,std_error,defect,z\n"));
    assert!(fs::read_to_string(dir.path().join("defect.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn malformed_config_exits_with_one_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(
        &bad,
        "name = x\nseed = 1\n[process]\nmodel = gbm\nvolatility = 2\n[grid]\nhorizon = 1\nsteps = 4\n[task defect]\n",
    )
    .unwrap();
    let o = run(&bad, &dir.path().join("out"), &[], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5"), "{err}");

    fs::write(&bad, "name = x\n[lattice]\ntree = 1 [1: 2]\n[task oracle]\n").unwrap();
    let o = localmart(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    fs::write(&bad, "name = x\nseed = 1\n[lattice]\ntree = 1 [1: 2]\n[task juggle]\n").unwrap();
    let o = localmart(&["validate", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown task 'juggle'"));
}

#[test]
fn validate_and_list_models() {
    for f in fs::read_dir(scenario("")).unwrap() {
        let p = f.unwrap().path();
        let o = localmart(&["validate", p.to_str().unwrap()], None);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            p.display(),
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = localmart(&["list-models"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for m in [
        "brownian",
        "gbm",
        "cev",
        "bessel",
        "inverse-bessel3",
        "ds-example",
        "abs-bm",
    ] {
        assert!(text.contains(m));
    }
}

#[test]
fn lattice_scenario_reduces_oracle_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&scenario("three-path-lattice.conf"), dir.path(), &[], None);
    assert_eq!(o.status.code(), Some(2));
    let r = report(dir.path());
    assert!(r.contains("\"agree\": true"));
    assert!(r.contains("\"k\": 2"));
    let gains = fs::read_to_string(dir.path().join("reduce_gains.csv")).unwrap();
    let exact: Vec<&str> = gains.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(exact, ["0", "1", "0"]);
}

#[test]
fn seed_override_changes_paths_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(
        &scenario("gbm-martingale.conf"),
        &a,
        &["--paths", "2000", "--seed", "99"],
        None,
    );
    run(&scenario("gbm-martingale.conf"), &b, &["--paths", "2000"], None);
    assert!(report(&a).contains("\"master_seed\": 99"));
    assert_ne!(
        fs::read(a.join("defect.csv")).unwrap(),
        fs::read(b.join("defect.csv")).unwrap()
    );
}

#[test]
fn csv_output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["ds-example.conf", "inverse-bessel.conf", "three-path-lattice.conf"] {
        let outs: Vec<PathBuf> = ["1", "2", "7"]
            .iter()
            .map(|t| {
                let out = dir.path().join(format!("{name}-{t}"));
                let o = run(&scenario(name), &out, &["--paths", "3000"], Some(t));
                assert!(
                    matches!(o.status.code(), Some(0 | 2)),
                    "{}",
                    String::from_utf8_lossy(&o.stderr)
                );
                out
            })
            .collect();
        let mut csvs: Vec<_> = fs::read_dir(&outs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        csvs.sort();
        assert!(!csvs.is_empty());
        for f in &csvs {
            let first = fs::read(outs[0].join(f)).unwrap();
            for o in &outs[1..] {
                assert_eq!(first, fs::read(o.join(f)).unwrap(), "{name}: {f:?} differs");
            }
        }
    }
}

#[test]
fn zero_threads_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&scenario("three-path-lattice.conf"), dir.path(), &[], Some("0"));
    assert_eq!(o.status.code(), Some(1));
}
