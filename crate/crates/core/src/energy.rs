//! Quantization energy of product tessellations and centroidality checks.
//!
//! Three routes evaluate the energy `Σ_k ∫_{V_k} ρ(x) |x - z_k|^2 dx`:
//!
//! * [`energy_separable`] expands the squared norm coordinate-wise and
//!   factors the product density, reducing everything to 1D integrals.
//! * [`energy_monte_carlo`] samples the density and looks up the nearest
//!   generator; it shares nothing with the analytic route except `locate`.
//! * [`energy_grid_quadrature`] applies tensor Gauss-Legendre rules per cell
//!   to the joint density with an exhaustive nearest-generator scan.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cvt1d::energy_1d;
use crate::density::{Density1D, SeparableDensity};
use crate::error::{CvtError, Result};
use crate::product::ProductCvt;
use crate::quadrature::GaussLegendre;

/// Minimum sample count for Monte Carlo estimates.
pub const MIN_SAMPLES: usize = 1_000;
/// Fixed shard count; results do not depend on the worker count.
pub const MC_SHARDS: u64 = 64;
pub const DEFAULT_GRID_POINTS: usize = 64;
/// Largest dimension accepted by the grid-quadrature oracle.
pub const GRID_MAX_DIM: usize = 3;

const CDF_SEGMENTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyMethod {
    AnalyticSeparable,
    MonteCarlo { samples: usize, std_error: f64 },
    GridQuadrature { points_per_dim: usize },
}

impl fmt::Display for EnergyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyMethod::AnalyticSeparable => "analytic-separable",
            EnergyMethod::MonteCarlo { .. } => "monte-carlo",
            EnergyMethod::GridQuadrature { .. } => "grid-quadrature",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub value: f64,
    pub method: EnergyMethod,
    /// Sup-norm distance between generators and the mass centroids of their
    /// cells, over all generators and coordinates.
    pub centroidality_residual: f64,
    pub wall_time: Duration,
}

/// Flat serialized form of an [`EnergyReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub value: f64,
    pub method: String,
    pub samples: Option<usize>,
    pub std_error: Option<f64>,
    pub residual: f64,
    pub wall_time_ms: f64,
}

impl EnergyReport {
    pub fn std_error(&self) -> Option<f64> {
        match self.method {
            EnergyMethod::MonteCarlo { std_error, .. } => Some(std_error),
            _ => None,
        }
    }

    pub fn record(&self) -> EnergyRecord {
        let samples = match self.method {
            EnergyMethod::MonteCarlo { samples, .. } => Some(samples),
            _ => None,
        };
        EnergyRecord {
            value: self.value,
            method: self.method.to_string(),
            samples,
            std_error: self.std_error(),
            residual: self.centroidality_residual,
            wall_time_ms: self.wall_time.as_secs_f64() * 1e3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.record()).expect("record is plain data")
    }
}

fn check_domains(p: &ProductCvt, d: &SeparableDensity) -> Result<()> {
    if p.dim() != d.dim() {
        return Err(CvtError::DomainMismatch(format!(
            "tessellation has {} dimensions, density has {}",
            p.dim(),
            d.dim()
        )));
    }
    for (i, (f, m)) in p.factors().iter().zip(d.marginals()).enumerate() {
        if f.domain() != m.domain() {
            return Err(CvtError::DomainMismatch(format!(
                "dimension {i}: tessellation on {}, density on {}",
                f.domain(),
                m.domain()
            )));
        }
    }
    Ok(())
}

/// Largest `|centroid(ρ_i, cell) - z|` over all axes and factor cells.
///
/// Every product cell is a box, so coordinate `i` of its mass centroid is the
/// 1D centroid of the matching factor cell under `ρ_i`; the maximum over
/// product cells equals the maximum over factor cells.
pub fn centroidality_residual(p: &ProductCvt, d: &SeparableDensity) -> Result<f64> {
    check_domains(p, d)?;
    let mut worst = 0.0f64;
    for (f, m) in p.factors().iter().zip(d.marginals()) {
        for (cell, &z) in f.cells().zip(f.centroids()) {
            worst = worst.max((m.centroid(&cell)? - z).abs());
        }
    }
    Ok(worst)
}

/// Energy by the separability identity
/// `K = Σ_i K_i · Π_{l≠i} M_l`, with `K_i` the 1D energy and `M_l` the
/// total mass of axis `l`.
pub fn energy_separable(p: &ProductCvt, d: &SeparableDensity) -> Result<EnergyReport> {
    let start = Instant::now();
    check_domains(p, d)?;
    let energies = p
        .factors()
        .iter()
        .zip(d.marginals())
        .map(|(f, m)| energy_1d(m, f))
        .collect::<Result<Vec<_>>>()?;
    let masses = d
        .marginals()
        .iter()
        .map(Density1D::total_mass)
        .collect::<Result<Vec<_>>>()?;
    let value = energies
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let others: f64 = masses
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != i)
                .map(|(_, m)| m)
                .product();
            e * others
        })
        .sum();
    let centroidality_residual = centroidality_residual(p, d)?;
    Ok(EnergyReport {
        value,
        method: EnergyMethod::AnalyticSeparable,
        centroidality_residual,
        wall_time: start.elapsed(),
    })
}

/// Energy as an explicit sum over all `N` product cells, each cell integral
/// split by Fubini into 1D masses and second moments of that cell.
pub fn energy_cellwise(p: &ProductCvt, d: &SeparableDensity) -> Result<f64> {
    check_domains(p, d)?;
    // per-axis tables of cell masses and second moments
    let tables = p
        .factors()
        .iter()
        .zip(d.marginals())
        .map(|(f, m)| {
            f.cells()
                .zip(f.centroids())
                .map(|(cell, &z)| Ok((m.mass(&cell)?, m.second_moment_about(&cell, z)?)))
                .collect::<Result<Vec<(f64, f64)>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = p.dim();
    let mut tuple = vec![0; n];
    let mut total = 0.0;
    for k in 0..p.len() {
        p.index().column_into(k, &mut tuple)?;
        let mut cell = 0.0;
        for i in 0..n {
            let mut term = tables[i][tuple[i]].1;
            for l in (0..n).filter(|&l| l != i) {
                term *= tables[l][tuple[l]].0;
            }
            cell += term;
        }
        total += cell;
    }
    Ok(total)
}

/// Inverse-CDF sampler: a cumulative mass table locates the segment, then a
/// bisection-safeguarded Newton iteration on the mass function refines `x`
/// to `1e-12`.
pub struct InverseCdf<'a> {
    density: &'a Density1D,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<'a> InverseCdf<'a> {
    pub fn new(density: &'a Density1D) -> Self {
        let domain = density.domain();
        let h = domain.width() / CDF_SEGMENTS as f64;
        let mut nodes: Vec<f64> = (0..=CDF_SEGMENTS)
            .map(|i| domain.lo() + i as f64 * h)
            .collect();
        nodes[CDF_SEGMENTS] = domain.hi();
        let mut cumulative = Vec::with_capacity(nodes.len());
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            let last = *cumulative.last().expect("non-empty");
            cumulative.push(last + density.raw_mass(w[0], w[1]));
        }
        Self {
            density,
            nodes,
            cumulative,
        }
    }

    /// Maps `u ∈ [0, 1)` to a sample of the normalized density.
    pub fn sample(&self, u: f64) -> f64 {
        let total = self.cumulative[CDF_SEGMENTS];
        let target = u * total;
        let seg = self
            .cumulative
            .partition_point(|&c| c <= target)
            .clamp(1, CDF_SEGMENTS)
            - 1;
        let (a, b) = (self.nodes[seg], self.nodes[seg + 1]);
        let local = target - self.cumulative[seg];
        let raw_density = |x: f64| self.density.value(x) / self.density.scale();
        let (mut lo, mut hi) = (a, b);
        let mut x = (a + local / raw_density(a).max(f64::MIN_POSITIVE)).clamp(a, b);
        for _ in 0..100 {
            let g = self.density.raw_mass(a, x) - local;
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = raw_density(x);
            let mut next = x - g / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step <= 1e-12 || hi - lo <= 1e-12 {
                break;
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }
}

/// Monte Carlo estimate `M · mean(|x - z(x)|^2)` with `x` drawn from the
/// normalized product density, `M` its total mass and `z(x)` the generator
/// returned by [`ProductCvt::locate`].
///
/// Samples are split into [`MC_SHARDS`] shards, each driven by its own
/// ChaCha stream of the master seed, so the result is bit-identical for a
/// given seed regardless of how many threads run the shards.
pub fn energy_monte_carlo(
    p: &ProductCvt,
    d: &SeparableDensity,
    samples: usize,
    seed: u64,
) -> Result<EnergyReport> {
    let start = Instant::now();
    check_domains(p, d)?;
    if samples < MIN_SAMPLES {
        return Err(CvtError::InvalidConfig(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let total_mass = d.total_mass()?;
    let samplers: Vec<InverseCdf> = d.marginals().iter().map(InverseCdf::new).collect();
    let generators = p.materialize();
    let per_shard = samples as u64 / MC_SHARDS;
    let remainder = samples as u64 % MC_SHARDS;
    let shards: Vec<Moments> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = per_shard + u64::from(shard < remainder);
            let mut x = vec![0.0; samplers.len()];
            let mut acc = Moments::default();
            for _ in 0..count {
                for (xi, s) in x.iter_mut().zip(&samplers) {
                    *xi = s.sample(rng.random::<f64>());
                }
                let k = p.locate(&x).expect("samples lie in the domain");
                let z = &generators[k];
                acc.push(x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum());
            }
            acc
        })
        .collect();
    let moments = shards.into_iter().fold(Moments::default(), Moments::merge);
    let n = moments.count as f64;
    let variance = moments.m2 / (n - 1.0);
    let std_error = total_mass * (variance / n).sqrt();
    let centroidality_residual = centroidality_residual(p, d)?;
    Ok(EnergyReport {
        value: total_mass * moments.mean,
        method: EnergyMethod::MonteCarlo { samples, std_error },
        centroidality_residual,
        wall_time: start.elapsed(),
    })
}

/// Tensor Gauss-Legendre quadrature of the joint density on every product
/// cell, `points_per_dim` nodes per cell and axis. Each node is charged to
/// its nearest generator by exhaustive scan (ties to the lowest index), so
/// the result does not rely on the cells being Voronoi regions.
pub fn energy_grid_quadrature(
    p: &ProductCvt,
    d: &SeparableDensity,
    points_per_dim: usize,
) -> Result<EnergyReport> {
    let start = Instant::now();
    check_domains(p, d)?;
    if p.dim() > GRID_MAX_DIM {
        return Err(CvtError::InvalidConfig(format!(
            "grid quadrature supports at most {GRID_MAX_DIM} dimensions"
        )));
    }
    if points_per_dim == 0 {
        return Err(CvtError::InvalidConfig(
            "points_per_dim must be positive".into(),
        ));
    }
    let rule = GaussLegendre::new(points_per_dim);
    let generators = p.materialize();
    let n = p.dim();
    let per_cell: Vec<f64> = (0..p.len())
        .into_par_iter()
        .map(|k| {
            let cell = p.cell_of(k).expect("k < len");
            // per-axis weighted nodes: (x, w * ρ_i(x))
            let axes: Vec<Vec<(f64, f64)>> = cell
                .sides()
                .iter()
                .zip(d.marginals())
                .map(|(side, m)| {
                    rule.on(side.lo(), side.hi())
                        .map(|(x, w)| (x, w * m.value(x)))
                        .collect()
                })
                .collect();
            let m = rule.len();
            let total_nodes = m.pow(n as u32);
            let mut x = vec![0.0; n];
            let mut sum = 0.0;
            for flat in 0..total_nodes {
                let mut rest = flat;
                let mut weight = 1.0;
                for i in (0..n).rev() {
                    let (xi, wi) = axes[i][rest % m];
                    rest /= m;
                    x[i] = xi;
                    weight *= wi;
                }
                sum += weight * nearest_sq_distance(&generators, &x);
            }
            sum
        })
        .collect();
    let value = per_cell.iter().sum();
    let centroidality_residual = centroidality_residual(p, d)?;
    Ok(EnergyReport {
        value,
        method: EnergyMethod::GridQuadrature { points_per_dim },
        centroidality_residual,
        wall_time: start.elapsed(),
    })
}

fn nearest_sq_distance(generators: &[Vec<f64>], x: &[f64]) -> f64 {
    generators
        .iter()
        .map(|z| z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}
