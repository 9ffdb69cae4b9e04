use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn ruc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruc"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ruc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_toml(path: &Path) -> toml::Value {
    toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn objective(dir: &Path) -> f64 {
    read_toml(&dir.join("solution.toml"))["objective"]
        .as_float()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_input_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = ruc(&[
        "solve-uc",
        "--system",
        "/no/such/file.toml",
        "--set",
        s(&data("one_bus_set.toml")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = ruc(&[
        "solve-uc",
        "--set",
        s(&data("one_bus_set.toml")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "a missing --system is a usage error"
    );
}

#[test]
fn out_of_range_flags_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let (system, set) = (data("one_bus.toml"), data("one_bus_set.toml"));
    let base = [
        "solve-uc",
        "--system",
        s(&system),
        "--set",
        s(&set),
        "--out",
        s(tmp.path()),
    ];
    let mut args = base.to_vec();
    args.extend(["--rho", "1.5"]);
    assert_eq!(ruc(&args).status.code(), Some(2));
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "seed = 1\nunknown_key = 3\n").unwrap();
    let mut args = base.to_vec();
    args.extend(["--config", s(&config)]);
    assert_eq!(ruc(&args).status.code(), Some(2));
}

#[test]
fn time_limit_exits_with_five() {
    let tmp = TempDir::new().unwrap();
    let out = ruc(&[
        "solve-uc",
        "--system",
        s(&data("six_bus.toml")),
        "--set",
        s(&data("six_bus_set.toml")),
        "--time-limit",
        "1e-9",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn infeasible_system_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let text = std::fs::read_to_string(data("one_bus.toml"))
        .unwrap()
        .replace(
            "[ 80.0, 90.0, 110.0, 120.0, 105.0, 95.0,]",
            "[ 800.0, 900.0, 1100.0, 1200.0, 1050.0, 950.0,]",
        );
    let system = tmp.path().join("heavy.toml");
    std::fs::write(&system, text).unwrap();
    let out = ruc(&[
        "solve-uc",
        "--system",
        s(&system),
        "--set",
        s(&data("one_bus_set.toml")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn zero_gamma_robust_equals_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("robust"), tmp.path().join("det"));
    let (system, set) = (data("three_bus.toml"), data("three_bus_set.toml"));
    let common = [
        "--system",
        s(&system),
        "--set",
        s(&set),
        "--gamma",
        "0",
        "--gap",
        "1e-7",
    ];
    let mut args = vec!["solve-uc", "--out", s(&a)];
    args.extend(common);
    ok(&args);
    let mut args = vec!["solve-det-uc", "--reserve-gamma", "0", "--out", s(&b)];
    args.extend(common);
    ok(&args);
    let (za, zb) = (objective(&a), objective(&b));
    assert!((za - zb).abs() <= 1e-5 * za.abs(), "{za} vs {zb}");
}

#[test]
fn manifest_records_the_run() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "solve-uc",
        "--system",
        s(&data("one_bus.toml")),
        "--set",
        s(&data("one_bus_set.toml")),
        "--seed",
        "77",
        "--out",
        s(tmp.path()),
    ]);
    let m = read_toml(&tmp.path().join("manifest.toml"));
    assert_eq!(m["command"].as_str(), Some("solve-uc"));
    assert_eq!(m["seed"].as_integer(), Some(77));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["inputs"].as_array().unwrap().len() >= 2);
    assert!(m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o.to_string().contains("solution.toml")));
}

#[test]
fn estimate_then_solve_then_simulate() {
    let tmp = TempDir::new().unwrap();
    let est = tmp.path().join("est");
    let out = ok(&[
        "estimate",
        "--system",
        s(&data("six_bus.toml")),
        "--series",
        s(&data("six_bus_history.csv")),
        "--nv",
        "2",
        "--out",
        s(&est),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("captured variance"));
    let (set, model) = (est.join("set.toml"), est.join("model.toml"));
    assert!(set.exists() && model.exists());
    let uc = tmp.path().join("uc");
    ok(&[
        "solve-uc",
        "--system",
        s(&data("six_bus.toml")),
        "--set",
        s(&set),
        "--out",
        s(&uc),
    ]);
    let sim = tmp.path().join("sim");
    ok(&[
        "simulate",
        "--system",
        s(&data("six_bus.toml")),
        "--set",
        s(&set),
        "--model",
        s(&model),
        "--solution",
        s(&uc.join("solution.toml")),
        "--trajectories",
        "4",
        "--out",
        s(&sim),
    ]);
    let report = read_toml(&sim.join("report.toml"));
    assert_eq!(report["completed"].as_integer(), Some(4));
    let csv = std::fs::read_to_string(sim.join("logs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 24);
}

#[test]
fn compare_cells_match_individual_runs() {
    let tmp = TempDir::new().unwrap();
    let (system, set) = (data("one_bus.toml"), data("one_bus_set.toml"));
    let common = [
        "--system",
        s(&system),
        "--set",
        s(&set),
        "--seed",
        "5",
        "--trajectories",
        "6",
    ];
    let cmp = tmp.path().join("cmp");
    let mut args = vec!["compare", "--gammas", "1.5", "--out", s(&cmp)];
    args.extend(common);
    ok(&args);
    let cells = read_toml(&cmp.join("compare.toml"));
    let cells = cells["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    let cell = |method: &str| {
        cells
            .iter()
            .find(|c| c["method"].as_str() == Some(method))
            .unwrap()
            .clone()
    };

    let run = |solve: &str, extra: &[&str], engine: &str, name: &str| -> (f64, toml::Value) {
        let uc = tmp.path().join(format!("{name}-uc"));
        let mut args = vec![solve, "--gamma", "1.5", "--out", s(&uc)];
        args.extend(common);
        args.extend(extra);
        ok(&args);
        let sim = tmp.path().join(format!("{name}-sim"));
        let solution = uc.join("solution.toml");
        let mut args = vec![
            "simulate",
            "--gamma",
            "1.5",
            "--engine",
            engine,
            "--solution",
            s(&solution),
            "--out",
            s(&sim),
        ];
        args.extend(common);
        ok(&args);
        (objective(&uc), read_toml(&sim.join("report.toml")))
    };

    let (z, report) = run("solve-uc", &[], "policy-guided", "dyn");
    let c = cell("RobUC-Dynamic");
    assert_eq!(c["objective"].as_float(), Some(z));
    assert_eq!(c["report"], report);

    let (z, report) = run(
        "solve-det-uc",
        &["--reserve-gamma", "1.5"],
        "deterministic",
        "det",
    );
    let c = cell("DetUC");
    assert_eq!(c["objective"].as_float(), Some(z));
    assert_eq!(c["report"], report);

    for method in ["RobUC-Dynamic", "RobUC-Static", "DetUC"] {
        assert!(cmp
            .join(method)
            .join("gamma_1.5")
            .join("report.toml")
            .exists());
    }
}

#[test]
fn seeds_make_runs_repeatable() {
    let tmp = TempDir::new().unwrap();
    let uc = tmp.path().join("uc");
    ok(&[
        "solve-uc",
        "--system",
        s(&data("three_bus.toml")),
        "--set",
        s(&data("three_bus_set.toml")),
        "--out",
        s(&uc),
    ]);
    let sim = |name: &str, seed: &str| -> String {
        let dir = tmp.path().join(name);
        ok(&[
            "simulate",
            "--system",
            s(&data("three_bus.toml")),
            "--set",
            s(&data("three_bus_set.toml")),
            "--solution",
            s(&uc.join("solution.toml")),
            "--trajectories",
            "5",
            "--seed",
            seed,
            "--out",
            s(&dir),
        ]);
        std::fs::read_to_string(dir.join("logs.csv")).unwrap()
    };
    assert_eq!(sim("a", "3"), sim("b", "3"));
    assert_ne!(sim("a", "3"), sim("c", "4"));
}
