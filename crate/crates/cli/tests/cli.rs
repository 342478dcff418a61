use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvt_cli::commands::{product_from_centroids, verify_product};
use cvt_cli::output::read_centroids;
use cvt_cli::{solve_scenario, Scenario};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn cvt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvt"))
        .args(args)
        .env_remove("CVT_SEED")
        .output()
        .expect("binary runs")
}

fn solve_into(name: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = scenario(name);
    let mut args = vec![
        "solve",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cvt(&args)
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn solve_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into("fig4", dir.path(), &["--verify"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let centroids = std::fs::read_to_string(dir.path().join("fig4.centroids.csv")).unwrap();
    assert_eq!(centroids.lines().count(), 257);
    assert!(centroids.starts_with("k,x_1,x_2\n1,"));
    let cells = std::fs::read_to_string(dir.path().join("fig4.cells.csv")).unwrap();
    assert!(cells.starts_with("k,lo_1,hi_1,lo_2,hi_2\n"));
    assert_eq!(cells.lines().count(), 257);
    let r = report(dir.path(), "fig4");
    assert_eq!(r["cells"], 256);
    assert_eq!(r["verified"], true);
    assert_eq!(r["energy"]["method"], "analytic-separable");
    let raw = r["energy_raw"].as_f64().unwrap();
    assert!((raw - 2.975e-4).abs() < 1e-6, "{raw}");
    assert!(r["energy_normalized"].as_f64().unwrap() > raw);
    assert_eq!(r["factors"].as_array().unwrap().len(), 2);
}

#[test]
fn normalized_flag_changes_energy_not_centroids() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(solve_into("section3", a.path(), &[]).status.success());
    assert!(solve_into("section3", b.path(), &["--normalized"])
        .status
        .success());
    let read = |d: &Path| std::fs::read_to_string(d.join("section3.centroids.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let (ra, rb) = (report(a.path(), "section3"), report(b.path(), "section3"));
    assert_eq!(rb["normalized"], true);
    assert_eq!(ra["energy"]["value"], ra["energy_raw"]);
    assert_eq!(rb["energy"]["value"], rb["energy_normalized"]);
}

#[test]
fn bad_config_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "name = \"bad\"\nmarginals = [\"gaussian(1)\"]\ndomain = [[0.0, 1.0]]\ndims = [2]\n",
    )
    .unwrap();
    let out = cvt(&[
        "solve",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    let out = cvt(&["solve", "/nonexistent.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stiff.toml");
    std::fs::write(
        &cfg,
        "name = \"stiff\"\nmarginals = [\"gaussian(0.3, 0.1)\"]\ndomain = [[0.0, 1.0]]\ndims = [200]\n\
         [solver]\nmethod = \"lloyd\"\nmax_iterations = 2\n",
    )
    .unwrap();
    let out = cvt(&[
        "solve",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn verify_accepts_solved_file_and_rejects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    assert!(solve_into("fig4", dir.path(), &[]).status.success());
    let good = dir.path().join("fig4.centroids.csv");
    let cfg = scenario("fig4");
    let out = cvt(&[
        "verify",
        cfg.to_str().unwrap(),
        "--grid-res",
        "256",
        "--centroids",
        good.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );

    // shift one centroid: the file no longer describes a product tessellation
    let text = std::fs::read_to_string(&good).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut f: Vec<String> = lines[40].split(',').map(String::from).collect();
    f[2] = format!("{:.16e}", f[2].parse::<f64>().unwrap() + 0.01);
    lines[40] = f.join(",");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = cvt(&[
        "verify",
        cfg.to_str().unwrap(),
        "--centroids",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // shift a whole grid line: still a product, but not centroidal
    let rows = read_centroids(&good).unwrap();
    let shifted: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let x2 = if k % 16 == 3 { z[1] + 0.01 } else { z[1] };
            format!("{},{:.16e},{:.16e}", k + 1, z[0], x2)
        })
        .collect();
    std::fs::write(&bad, format!("k,x_1,x_2\n{}\n", shifted.join("\n"))).unwrap();
    let out = cvt(&[
        "verify",
        cfg.to_str().unwrap(),
        "--centroids",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn csv_round_trip_preserves_residual() {
    let dir = tempfile::tempdir().unwrap();
    assert!(solve_into("fig5", dir.path(), &[]).status.success());
    let s = Scenario::load(&scenario("fig5")).unwrap();
    let solved = solve_scenario(&s, false).unwrap();
    let rows = read_centroids(&dir.path().join("fig5.centroids.csv")).unwrap();
    let p = product_from_centroids(&s, &rows).unwrap();
    assert_eq!(p, solved.product);
    let d = s.density(false).unwrap();
    let a = cvt_core::centroidality_residual(&p, &d).unwrap();
    assert!((a - solved.energy.centroidality_residual).abs() <= 1e-12);
    let v = verify_product(&p, &d, 256).unwrap();
    assert_eq!(v.residual, a);
}

#[test]
fn one_dimensional_verify_passes() {
    let cfg = scenario("fig1_gaussian");
    let out = cvt(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_rejects_high_dimensions() {
    let out = cvt(&[
        "verify",
        "--grid-res",
        "16",
        scenario("fig6").to_str().unwrap(),
    ]);
    // three dimensions are allowed; the oracle then fails on empty cells
    assert_ne!(out.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("four.toml");
    std::fs::write(
        &cfg,
        "name = \"four\"\nmarginals = [\"uniform\", \"uniform\", \"uniform\", \"uniform\"]\n\
         domain = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]\ndims = [2, 2, 2, 2]\n",
    )
    .unwrap();
    let out = cvt(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_override_reaches_monte_carlo() {
    let cfg = scenario("fig4_monte_carlo");
    let run = |seed: Option<&str>| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Command::new(env!("CARGO_BIN_EXE_cvt"));
        c.args([
            "solve",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        match seed {
            Some(s) => c.env("CVT_SEED", s),
            None => c.env_remove("CVT_SEED"),
        };
        let out = c.output().unwrap();
        (
            out.status.code(),
            dir.path()
                .exists()
                .then(|| report(dir.path(), "fig4_monte_carlo")),
        )
    };
    let (code, base) = run(None);
    assert_eq!(code, Some(0));
    let base = base.unwrap();
    assert_eq!(base["seed"], 7);
    let (_, other) = run(Some("8"));
    let other = other.unwrap();
    assert_eq!(other["seed"], 8);
    assert_ne!(base["energy"]["value"], other["energy"]["value"]);
    let exact = base["energy_raw"].as_f64().unwrap();
    for r in [&base, &other] {
        let e = r["energy"]["value"].as_f64().unwrap();
        let se = r["energy"]["std_error"].as_f64().unwrap();
        assert!((e - exact).abs() <= 4.0 * se);
    }
    let out = {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cvt"));
        c.args(["solve", cfg.to_str().unwrap()])
            .env("CVT_SEED", "x");
        c.output().unwrap()
    };
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenario("fig4_monte_carlo");
    for (dir, t) in [(&a, "1"), (&b, "3")] {
        let out = cvt(&[
            "--threads",
            t,
            "solve",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let (ra, rb) = (
        report(a.path(), "fig4_monte_carlo"),
        report(b.path(), "fig4_monte_carlo"),
    );
    assert_eq!(ra["energy"]["value"], rb["energy"]["value"]);
}

#[test]
fn bench_writes_csv_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t1.csv");
    let out = cvt(&["bench", "table1", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let md = String::from_utf8_lossy(&out.stdout);
    assert!(md.contains("| 12 | 4096 | 2^12 |"));
    assert!(md.contains("| 8 | 6561 | 3^8 |"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/table1.toml");
    let out = cvt(&["bench", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(cvt(&["bench", "table9"]).status.code(), Some(1));
}

#[test]
fn plotdata_writes_edges_for_planar_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("section3");
    let out = cvt(&[
        "plotdata",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let edges = std::fs::read_to_string(dir.path().join("section3.edges.csv")).unwrap();
    // (2 + 1) horizontal lines and (3 + 1) vertical lines, two rows each
    assert_eq!(edges.lines().count(), 1 + 2 * (3 + 4));
    let scatter = std::fs::read_to_string(dir.path().join("section3.scatter.csv")).unwrap();
    let mass: f64 = scatter
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    let total = Scenario::load(&cfg)
        .unwrap()
        .density(false)
        .unwrap()
        .total_mass()
        .unwrap();
    assert!((mass - total).abs() < 1e-12);
    let bp = std::fs::read_to_string(dir.path().join("section3.breakpoints.csv")).unwrap();
    assert_eq!(bp.lines().count(), 1 + 4 + 3);
}
