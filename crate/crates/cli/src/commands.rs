//! The `solve`, `bench`, `verify` and `plotdata` commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cvt_core::oracle::verify_fixed_point;
use cvt_core::{
    build_product_with_stats, centroidality_residual, energy_grid_quadrature, energy_monte_carlo,
    energy_separable, Cvt1D, Density1D, EnergyReport, FactorStats, ProductCvt, SeparableDensity,
    SolverConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{
    fmt_f64, read_centroids, write_cells, write_centroids, write_json, write_table,
};
use crate::scenario::{EnergyChoice, Scenario};
use crate::CliError;

/// Centroidality threshold for `--verify` and `verify`.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;
/// Accepted range of the oracle displacement ratio when the grid doubles.
pub const RATIO_RANGE: (f64, f64) = (1.4, 2.6);
pub const DEFAULT_GRID_RES: usize = 256;

/// Everything `solve` computes, before anything is written.
#[derive(Debug, Clone)]
pub struct Solved {
    pub product: ProductCvt,
    pub stats: Vec<FactorStats>,
    pub density: SeparableDensity,
    pub energy: EnergyReport,
    pub energy_raw: f64,
    pub energy_normalized: f64,
    pub wall_time_ms: f64,
}

pub fn solve_scenario(s: &Scenario, normalized: bool) -> Result<Solved, CliError> {
    let start = Instant::now();
    let raw = s.density(false)?;
    let norm = s.density(true)?;
    let density = if normalized {
        norm.clone()
    } else {
        raw.clone()
    };
    let (product, stats) = build_product_with_stats(&density, &s.dims, &s.solver)?;
    let energy = match s.energy_method {
        EnergyChoice::AnalyticSeparable => energy_separable(&product, &density)?,
        EnergyChoice::MonteCarlo => energy_monte_carlo(&product, &density, s.samples, s.seed)?,
        EnergyChoice::GridQuadrature => energy_grid_quadrature(&product, &density, s.grid_points)?,
    };
    let energy_raw = energy_separable(&product, &raw)?.value;
    let energy_normalized = energy_separable(&product, &norm)?.value;
    Ok(Solved {
        product,
        stats,
        density,
        energy,
        energy_raw,
        energy_normalized,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, Serialize)]
struct FactorRecord {
    dimension: usize,
    cells: usize,
    iterations: usize,
    residual: f64,
    method: String,
}

pub fn report_json(
    s: &Scenario,
    solved: &Solved,
    normalized: bool,
    verified: Option<bool>,
) -> serde_json::Value {
    let factors: Vec<FactorRecord> = solved
        .stats
        .iter()
        .zip(&s.dims)
        .enumerate()
        .map(|(i, (st, &n))| FactorRecord {
            dimension: i + 1,
            cells: n,
            iterations: st.iterations,
            residual: st.residual,
            method: st.method.to_string(),
        })
        .collect();
    json!({
        "name": s.name,
        "dimension": s.dimension(),
        "dims": s.dims,
        "cells": s.cells(),
        "marginals": s.marginals.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "domain": s.domain.iter().map(|d| [d.lo(), d.hi()]).collect::<Vec<_>>(),
        "normalized": normalized,
        "seed": s.seed,
        "solver": {
            "method": s.solver.method.to_string(),
            "tolerance": s.solver.tolerance,
            "max_iterations": s.solver.max_iterations,
        },
        "energy": solved.energy.record(),
        "energy_raw": solved.energy_raw,
        "energy_normalized": solved.energy_normalized,
        "factors": factors,
        "verified": verified,
        "wall_time_ms": solved.wall_time_ms,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub verify: bool,
    pub normalized: bool,
    pub out_dir: PathBuf,
}

/// Solves a scenario and writes `<name>.centroids.csv`, `<name>.cells.csv`
/// and `<name>.report.json` into `opts.out_dir`.
pub fn cmd_solve(s: &Scenario, opts: &SolveOptions) -> Result<(), CliError> {
    let normalized = opts.normalized || s.normalized;
    let solved = solve_scenario(s, normalized)?;
    let residual = solved.energy.centroidality_residual;
    let verified = opts.verify.then_some(residual <= RESIDUAL_THRESHOLD);
    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", opts.out_dir.display())))?;
    let file = |ext: &str| opts.out_dir.join(format!("{}.{ext}", s.name));
    write_centroids(&file("centroids.csv"), &solved.product)?;
    write_cells(&file("cells.csv"), &solved.product)?;
    write_json(
        &file("report.json"),
        &report_json(s, &solved, normalized, verified),
    )?;
    println!(
        "{}: {} cells, energy {} ({}), residual {:.3e}",
        s.name,
        s.cells(),
        fmt_f64(solved.energy.value),
        solved.energy.method,
        residual
    );
    if verified == Some(false) {
        return Err(CliError::Verify(format!(
            "centroidality residual {residual:.3e} exceeds {RESIDUAL_THRESHOLD:e}"
        )));
    }
    Ok(())
}

/// Rebuilds a product tessellation from centroids listed in index order.
pub fn product_from_centroids(s: &Scenario, rows: &[Vec<f64>]) -> Result<ProductCvt, CliError> {
    let n = s.dimension();
    let bad = |msg: String| CliError::Verify(format!("centroid file: {msg}"));
    if rows.len() != s.cells() {
        return Err(bad(format!(
            "{} rows, scenario has {} cells",
            rows.len(),
            s.cells()
        )));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != n) {
        return Err(bad(format!(
            "row {} has the wrong number of coordinates",
            k + 1
        )));
    }
    let stride = |i: usize| s.dims[i + 1..].iter().product::<usize>();
    let factors = (0..n)
        .map(|i| {
            let z = (0..s.dims[i]).map(|j| rows[j * stride(i)][i]).collect();
            Cvt1D::from_centroids(s.domain[i], z).map_err(|e| bad(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let p = ProductCvt::new(factors)?;
    for (k, (a, b)) in p.materialize().iter().zip(rows).enumerate() {
        if a != b {
            return Err(bad(format!("row {} is not on the product grid", k + 1)));
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub residual: f64,
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
    pub grid_res: usize,
    pub dimension: usize,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.residual <= RESIDUAL_THRESHOLD && (!self.ratio_checked() || self.ratio_in_range())
    }

    pub fn ratio_in_range(&self) -> bool {
        (RATIO_RANGE.0..=RATIO_RANGE.1).contains(&self.ratio)
    }

    /// In one dimension the product is the 1D tessellation itself, so the
    /// residual alone decides.
    pub fn ratio_checked(&self) -> bool {
        self.dimension > 1
    }
}

pub fn verify_product(
    p: &ProductCvt,
    d: &SeparableDensity,
    grid_res: usize,
) -> Result<Verification, CliError> {
    if d.dim() > cvt_core::oracle::MAX_STEP_DIM {
        return Err(CliError::Config(format!(
            "verify supports at most {} dimensions",
            cvt_core::oracle::MAX_STEP_DIM
        )));
    }
    let residual = centroidality_residual(p, d)?;
    let coarse = verify_fixed_point(p, d, grid_res).map_err(oracle_err)?;
    let fine = verify_fixed_point(p, d, 2 * grid_res).map_err(oracle_err)?;
    Ok(Verification {
        residual,
        coarse,
        fine,
        ratio: coarse / fine,
        grid_res,
        dimension: d.dim(),
    })
}

fn oracle_err(e: cvt_core::CvtError) -> CliError {
    match e {
        cvt_core::CvtError::InvalidConfig(_) | cvt_core::CvtError::CapExceeded { .. } => {
            CliError::Config(e.to_string())
        }
        e => CliError::Solver(e),
    }
}

/// Checks the product CVT of `s` (or the tessellation stored in
/// `centroids`) against the grid oracle at `grid_res` and `2 * grid_res`.
pub fn cmd_verify(
    s: &Scenario,
    grid_res: usize,
    centroids: Option<&Path>,
    normalized: bool,
) -> Result<Verification, CliError> {
    if s.dimension() > cvt_core::oracle::MAX_STEP_DIM {
        return Err(CliError::Config(format!(
            "verify supports at most {} dimensions, scenario has {}",
            cvt_core::oracle::MAX_STEP_DIM,
            s.dimension()
        )));
    }
    let d = s.density(normalized || s.normalized)?;
    let p = match centroids {
        Some(path) => product_from_centroids(s, &read_centroids(path)?)?,
        None => build_product_with_stats(&d, &s.dims, &s.solver)?.0,
    };
    let v = verify_product(&p, &d, grid_res)?;
    println!("centroidality residual: {:.6e}", v.residual);
    println!("oracle displacement at {}: {:.6e}", grid_res, v.coarse);
    println!("oracle displacement at {}: {:.6e}", 2 * grid_res, v.fine);
    if v.ratio_checked() {
        println!("ratio: {:.4}", v.ratio);
    } else {
        println!("ratio: {:.4} (not checked in one dimension)", v.ratio);
    }
    if v.passed() {
        println!("PASS");
        Ok(v)
    } else {
        println!("FAIL");
        Err(CliError::Verify(format!(
            "residual {:.3e} (limit {RESIDUAL_THRESHOLD:e}), ratio {:.4} (accepted {}..{})",
            v.residual, v.ratio, RATIO_RANGE.0, RATIO_RANGE.1
        )))
    }
}

/// One row of the high-dimensional benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dims: Vec<usize>,
    pub reference_energy: f64,
    pub reference_minutes: f64,
}

/// Built-in benchmark rows with published reference energies and times:
/// `e^{-10 x^2}` on `[-1, 1]^n`.
pub fn table1_rows() -> Vec<BenchRow> {
    let row = |dims: Vec<usize>, reference_energy, reference_minutes| BenchRow {
        dims,
        reference_energy,
        reference_minutes,
    };
    vec![
        row(vec![8; 4], 0.68e-3, 6.174),
        row(vec![4, 4, 4, 8, 8], 1.2e-3, 4.248),
        row(vec![3; 8], 0.74e-3, 0.641),
        row(vec![2; 12], 0.21e-3, 0.480),
    ]
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    rows: Vec<BenchFileRow>,
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFileRow {
    dims: Vec<usize>,
    reference_energy: f64,
    reference_minutes: f64,
}

/// Resolves `table1` to the built-in rows, anything else to a TOML file
/// with a `[[rows]]` array.
pub fn load_bench(name: &str) -> Result<Vec<BenchRow>, CliError> {
    if name == "table1" {
        return Ok(table1_rows());
    }
    let path = Path::new(name);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("unknown benchmark `{name}` ({e})")))?;
    let file: BenchFile =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    if file
        .rows
        .iter()
        .any(|r| r.dims.is_empty() || r.dims.contains(&0))
    {
        return Err(CliError::Config(format!(
            "{name}: every row needs positive dims"
        )));
    }
    Ok(file
        .rows
        .into_iter()
        .map(|r| BenchRow {
            dims: r.dims,
            reference_energy: r.reference_energy,
            reference_minutes: r.reference_minutes,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub row: BenchRow,
    pub cells: usize,
    pub energy_raw: f64,
    pub energy_normalized: f64,
    pub seconds: f64,
}

impl BenchResult {
    pub fn ratio_raw(&self) -> f64 {
        self.energy_raw / self.row.reference_energy
    }

    pub fn ratio_normalized(&self) -> f64 {
        self.energy_normalized / self.row.reference_energy
    }
}

pub fn run_bench(rows: &[BenchRow], cfg: &SolverConfig) -> Result<Vec<BenchResult>, CliError> {
    rows.iter()
        .map(|row| {
            let start = Instant::now();
            let raw_marginal = Density1D::exp_quadratic(10.0, -1.0, 1.0)?;
            let raw = SeparableDensity::new(vec![raw_marginal.clone(); row.dims.len()])?;
            let norm = raw.normalize()?;
            let (p, _) = build_product_with_stats(&raw, &row.dims, cfg)?;
            let energy_raw = energy_separable(&p, &raw)?.value;
            let energy_normalized = energy_separable(&p, &norm)?.value;
            Ok(BenchResult {
                row: row.clone(),
                cells: p.len(),
                energy_raw,
                energy_normalized,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn dims_label(dims: &[usize]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < dims.len() {
        let run = dims[i..].iter().take_while(|&&d| d == dims[i]).count();
        parts.push(if run == 1 {
            dims[i].to_string()
        } else {
            format!("{}^{}", dims[i], run)
        });
        i += run;
    }
    parts.join("x")
}

pub fn bench_markdown(results: &[BenchResult]) -> String {
    let mut s = String::from(
        "| n | N | dims | energy (raw) | energy (normalized) | reference | raw / ref | normalized / ref | time (s) | reference time (min) |\n\
         |---|---|------|--------------|---------------------|-----------|-----------|------------------|----------|----------------------|\n",
    );
    for r in results {
        s.push_str(&format!(
            "| {} | {} | {} | {:.4e} | {:.4e} | {:.2e} | {:.3} | {:.3} | {:.3} | {} |\n",
            r.row.dims.len(),
            r.cells,
            dims_label(&r.row.dims),
            r.energy_raw,
            r.energy_normalized,
            r.row.reference_energy,
            r.ratio_raw(),
            r.ratio_normalized(),
            r.seconds,
            r.row.reference_minutes
        ));
    }
    let within =
        |f: &dyn Fn(&BenchResult) -> f64| results.iter().all(|r| (1.0 / 3.0..=3.0).contains(&f(r)));
    s.push('\n');
    s.push_str(&format!(
        "Raw mode within a factor of 3 of the reference on every row: {}.\n\
         Normalized mode within a factor of 3 on every row: {}.\n\
         The reference energies match the unnormalized density e^(-10 x^2); \
         rescaling each marginal to unit mass multiplies the energy by 1 / prod(mass_i).\n",
        if within(&BenchResult::ratio_raw) {
            "yes"
        } else {
            "no"
        },
        if within(&BenchResult::ratio_normalized) {
            "yes"
        } else {
            "no"
        },
    ));
    s
}

pub fn write_bench_csv(path: &Path, results: &[BenchResult]) -> Result<(), CliError> {
    let rows = results
        .iter()
        .map(|r| {
            vec![
                r.row.dims.len().to_string(),
                r.cells.to_string(),
                dims_label(&r.row.dims),
                fmt_f64(r.energy_raw),
                fmt_f64(r.energy_normalized),
                fmt_f64(r.row.reference_energy),
                fmt_f64(r.ratio_raw()),
                fmt_f64(r.ratio_normalized()),
                format!("{:.6}", r.seconds),
                r.row.reference_minutes.to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        &[
            "n",
            "N",
            "dims",
            "energy_raw",
            "energy_normalized",
            "reference_energy",
            "ratio_raw",
            "ratio_normalized",
            "wall_time_s",
            "reference_time_min",
        ],
        rows,
    )
}

/// Scatter data (`<name>.scatter.csv`: k, x_1..x_n, mass), per-axis
/// breakpoints (`<name>.breakpoints.csv`) and, for up to three dimensions,
/// cell edges as two-point polylines (`<name>.edges.csv`).
pub fn cmd_plotdata(
    s: &Scenario,
    out_dir: &Path,
    normalized: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let d = s.density(normalized || s.normalized)?;
    let (p, _) = build_product_with_stats(&d, &s.dims, &s.solver)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let file = |ext: &str| out_dir.join(format!("{}.{ext}", s.name));
    let mut written = Vec::new();

    let masses: Vec<Vec<f64>> = p
        .factors()
        .iter()
        .zip(d.marginals())
        .map(|(f, m)| f.cells().map(|c| m.mass(&c)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let scatter = p
        .index()
        .columns()
        .enumerate()
        .map(|(k, t)| {
            let z = p.centroid_of(k).expect("k < len");
            let mass: f64 = t.iter().enumerate().map(|(i, &j)| masses[i][j]).product();
            std::iter::once((k + 1).to_string())
                .chain(z.into_iter().map(fmt_f64))
                .chain(std::iter::once(fmt_f64(mass)))
                .collect()
        })
        .collect();
    let mut header: Vec<String> = vec!["k".into()];
    header.extend((1..=p.dim()).map(|i| format!("x_{i}")));
    header.push("mass".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = file("scatter.csv");
    write_table(&path, &header_refs, scatter)?;
    written.push(path);

    let breaks = p
        .factors()
        .iter()
        .enumerate()
        .flat_map(|(i, f)| {
            f.breakpoints()
                .iter()
                .enumerate()
                .map(move |(j, &b)| vec![(i + 1).to_string(), j.to_string(), fmt_f64(b)])
        })
        .collect();
    let path = file("breakpoints.csv");
    write_table(&path, &["axis", "j", "value"], breaks)?;
    written.push(path);

    if (2..=3).contains(&p.dim()) {
        let path = file("edges.csv");
        let mut header: Vec<String> = vec!["line".into()];
        header.extend((1..=p.dim()).map(|i| format!("x_{i}")));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(&path, &header_refs, edge_rows(&p))?;
        written.push(path);
    }
    for w in &written {
        println!("wrote {}", w.display());
    }
    Ok(written)
}

/// Every cell edge is a segment parallel to one axis whose other
/// coordinates are breakpoints. Each segment contributes two rows.
fn edge_rows(p: &ProductCvt) -> Vec<Vec<String>> {
    let n = p.dim();
    let breaks: Vec<&[f64]> = p.factors().iter().map(Cvt1D::breakpoints).collect();
    let mut rows = Vec::new();
    let mut line = 0usize;
    for axis in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
        let counts: Vec<usize> = others.iter().map(|&i| breaks[i].len()).collect();
        let total: usize = counts.iter().product();
        for flat in 0..total {
            let mut x = vec![0.0; n];
            let mut rest = flat;
            for (&i, &c) in others.iter().zip(&counts).rev() {
                x[i] = breaks[i][rest % c];
                rest /= c;
            }
            line += 1;
            for end in [breaks[axis][0], *breaks[axis].last().expect("nonempty")] {
                x[axis] = end;
                let mut row = vec![line.to_string()];
                row.extend(x.iter().map(|&v| fmt_f64(v)));
                rows.push(row);
            }
        }
    }
    rows
}
