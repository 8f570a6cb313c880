use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ngn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngn"))
        .args(args)
        .current_dir(dir)
        .env_remove("NGN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const MINIMAL: &str = "problem = quadratic1d(lambda=1.2, f_star=0.1)\npolicy = ngn(sigma=1)\nsteps = 100\nseeds = 0\n";

#[test]
fn minimal_run_writes_two_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", MINIMAL);
    let out = ngn(&["run", "--config", &cfg, "--out", "res"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> =
        fs::read_dir(tmp.path().join("res")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["aggregate.csv", "trace_seed0.csv"]);
    let trace = fs::read_to_string(tmp.path().join("res/trace_seed0.csv")).unwrap();
    assert_eq!(trace.lines().count(), 101);
    assert!(trace.starts_with("step,batch_ids,loss_batch,gamma,sigma,grad_sq_norm,loss_full,dist_sq,grad_full_sq\n"));
    let agg = fs::read_to_string(tmp.path().join("res/aggregate.csv")).unwrap();
    assert!(agg.starts_with("metric,mean,std,ci_half\n"));
}

#[test]
fn zero_sigma_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", &MINIMAL.replace("sigma=1", "sigma=0"));
    let out = ngn(&["run", "--config", &cfg, "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn unknown_policy_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", &MINIMAL.replace("ngn(sigma=1)", "adam(lr=1)"));
    let out = ngn(&["run", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("adam"), "{err}");
}

#[test]
fn oversized_batch_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", &format!("{MINIMAL}batch_size = 5\n"));
    assert_eq!(ngn(&["run", "--config", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "exp.cfg",
        "problem = logistic(n=50, d=3, classes=3, seed=2, l2=0.01)\npolicy = ngn(sigma=3)\nsteps = 300\nseeds = 0..3\ncadence = 7\nsampler = shuffle\nbatch_size = 4\n",
    );
    for (out, jobs) in [("a", "1"), ("b", "4")] {
        let o = ngn(&["run", "--config", &cfg, "--out", out, "--jobs", jobs], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["trace_seed0.csv", "trace_seed1.csv", "trace_seed2.csv", "aggregate.csv"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn out_dir_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", &format!("{MINIMAL}output = from_config\n"));
    assert!(ngn(&["run", "--config", &cfg], tmp.path()).status.success());
    assert!(tmp.path().join("from_config/trace_seed0.csv").exists());
    let o = Command::new(env!("CARGO_BIN_EXE_ngn"))
        .args(["run", "--config", &cfg])
        .current_dir(tmp.path())
        .env("NGN_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from_env/trace_seed0.csv").exists());
}

#[test]
fn seed_offset_shifts_file_names() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", MINIMAL);
    assert!(ngn(&["run", "--config", &cfg, "--out", "o", "--seed-offset", "5"], tmp.path()).status.success());
    assert!(tmp.path().join("o/trace_seed5.csv").exists());
}

#[test]
fn sweep_marks_best_and_neighbors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.cfg",
        "problem = quadratic1d(lambda=1.2, f_star=0)\npolicy = constant(gamma=1)\nsteps = 30\nsampler = full_batch\nx0 = 3\nsweep_param = gamma\nsweep_values = 0.03, 0.1, 0.3, 0.8, 3\n",
    );
    let o = ngn(&["sweep", "--config", &cfg, "--out", "s"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    let marks: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[7].to_string())
        })
        .collect();
    // γ = 0.8 ≈ 1/λ is best; 0.3 and 3 are about 3x away
    assert_eq!(
        marks,
        [("0.03", ""), ("0.1", ""), ("0.3", "neighbor"), ("0.8", "best"), ("3", "neighbor")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    assert!(fs::read_to_string(tmp.path().join("s/sweep_best.txt")).unwrap().contains("best gamma=0.8"));
}

#[test]
fn sweep_requires_axis() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "exp.cfg", MINIMAL);
    assert_eq!(ngn(&["sweep", "--config", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let tmp = TempDir::new().unwrap();
    let o = ngn(&["verify", "lemmas", "--out", "v"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = fs::read_to_string(tmp.path().join("v/verify_lemmas.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.lines().skip(1).all(|l| l.contains(",true,")));
    assert_eq!(ngn(&["verify", "bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(ngn(&["verify"], tmp.path()).status.code(), Some(2));
}

#[test]
fn datagen_round_trip_and_determinism() {
    let tmp = TempDir::new().unwrap();
    for name in ["a.libsvm", "b.libsvm"] {
        let o = ngn(&["datagen", "blobs(n=200, d=5, classes=3, seed=7)", name], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(tmp.path().join("a.libsvm")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b.libsvm")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 200);
    let loaded = ngn_core::objectives::load_libsvm(tmp.path().join("a.libsvm")).unwrap();
    let original = ngn_core::objectives::gaussian_blobs(200, 5, 3, 7, 2.0).unwrap();
    assert_eq!(loaded, original);

    let o = ngn(&["datagen", "linreg(d=4, n=30, seed=1, noise=0.1)", "r.libsvm"], tmp.path());
    assert!(o.status.success());
    let cfg = write(tmp.path(), "r.cfg", "problem = linear_regression(file=r.libsvm)\npolicy = ngn(sigma=1)\nsteps = 50\n");
    assert!(ngn(&["run", "--config", &cfg, "--out", "r"], tmp.path()).status.success());

    assert_eq!(ngn(&["datagen", "spiral(n=3)", "x"], tmp.path()).status.code(), Some(2));
    assert_eq!(ngn(&["datagen", "blobs(n=3, d=2)", "missing_dir/x"], tmp.path()).status.code(), Some(1));
}
