//! Brute-force verification on a dense grid.
//!
//! The domain is replaced by a tensor grid of weighted nodes and Lloyd's
//! algorithm runs directly in n dimensions: every node is assigned to its
//! nearest generator by exhaustive scan, and generators move to the weighted
//! means of their nodes. No breakpoints or separability are used, so
//! agreement with [`crate::product`] is independent evidence.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cvt1d::SolverConfig;
use crate::density::{Region, SeparableDensity};
use crate::error::{CvtError, Result};
use crate::product::ProductCvt;

pub const MIN_POINTS_PER_DIM: usize = 16;
pub const MAX_GRID_NODES: usize = 10_000_000;
pub const MAX_STEP_DIM: usize = 3;
pub const MAX_SOLVE_DIM: usize = 2;
pub const MAX_SOLVE_CENTROIDS: usize = 16;
/// Empty-cluster reseeds allowed per solve.
pub const MAX_RESCUES: usize = 10;

const CHUNK: usize = 4096;

/// Density sampled on `points_per_dim` equally spaced nodes per axis,
/// endpoints included. Node weights are `ρ(x) · Π h_i`.
#[derive(Debug, Clone)]
pub struct GridDiscretization {
    region: Region,
    points_per_dim: usize,
    coords: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl GridDiscretization {
    pub fn from_density(d: &SeparableDensity, points_per_dim: usize) -> Result<Self> {
        let n = d.dim();
        if n > MAX_STEP_DIM {
            return Err(CvtError::InvalidConfig(format!(
                "grid oracle supports at most {MAX_STEP_DIM} dimensions, got {n}"
            )));
        }
        if points_per_dim < MIN_POINTS_PER_DIM {
            return Err(CvtError::InvalidConfig(format!(
                "grid needs at least {MIN_POINTS_PER_DIM} points per dimension"
            )));
        }
        let total = (points_per_dim as u128).pow(n as u32);
        if total > MAX_GRID_NODES as u128 {
            return Err(CvtError::CapExceeded {
                requested: total,
                cap: MAX_GRID_NODES,
            });
        }
        let region = d.domain();
        let coords: Vec<Vec<f64>> = region
            .sides()
            .iter()
            .map(|s| {
                let h = s.width() / (points_per_dim - 1) as f64;
                let mut c: Vec<f64> = (0..points_per_dim).map(|i| s.lo() + i as f64 * h).collect();
                c[points_per_dim - 1] = s.hi();
                c
            })
            .collect();
        let cell_volume: f64 = region
            .sides()
            .iter()
            .map(|s| s.width() / (points_per_dim - 1) as f64)
            .product();
        let axis_values: Vec<Vec<f64>> = coords
            .iter()
            .zip(d.marginals())
            .map(|(c, m)| c.iter().map(|&x| m.value(x)).collect())
            .collect();
        let total = total as usize;
        let weights = (0..total)
            .map(|flat| {
                let mut rest = flat;
                let mut w = cell_volume;
                for axis in axis_values.iter().rev() {
                    w *= axis[rest % points_per_dim];
                    rest /= points_per_dim;
                }
                w
            })
            .collect();
        Ok(Self {
            region,
            points_per_dim,
            coords,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Node spacing per axis.
    pub fn spacing(&self) -> Vec<f64> {
        self.region
            .sides()
            .iter()
            .map(|s| s.width() / (self.points_per_dim - 1) as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for i in (0..self.dim()).rev() {
            out[i] = self.coords[i][rest % self.points_per_dim];
            rest /= self.points_per_dim;
        }
    }

    fn node_vec(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node(flat, &mut x);
        x
    }
}

/// Per-cluster weighted sums from one assignment pass.
struct Assignment {
    sums: Vec<f64>,
    mass: Vec<f64>,
    energy: f64,
    /// Node farthest from its generator, with its squared distance.
    farthest: (usize, f64),
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, z) in centroids.iter().enumerate() {
        let d: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(centroids: &[Vec<f64>], grid: &GridDiscretization) -> Assignment {
    let n = grid.dim();
    let k = centroids.len();
    // fixed chunking and in-order reduction keep sums bit-reproducible
    let partials: Vec<Assignment> = (0..grid.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Assignment {
                sums: vec![0.0; k * n],
                mass: vec![0.0; k],
                energy: 0.0,
                farthest: (0, -1.0),
            };
            let mut x = vec![0.0; n];
            for flat in c * CHUNK..((c + 1) * CHUNK).min(grid.len()) {
                grid.node(flat, &mut x);
                let w = grid.weights[flat];
                let (j, d2) = nearest(centroids, &x);
                acc.mass[j] += w;
                for (s, xi) in acc.sums[j * n..(j + 1) * n].iter_mut().zip(&x) {
                    *s += w * xi;
                }
                acc.energy += w * d2;
                if d2 > acc.farthest.1 {
                    acc.farthest = (flat, d2);
                }
            }
            acc
        })
        .collect();
    let mut total = Assignment {
        sums: vec![0.0; k * n],
        mass: vec![0.0; k],
        energy: 0.0,
        farthest: (0, -1.0),
    };
    for p in partials {
        for (a, b) in total.sums.iter_mut().zip(&p.sums) {
            *a += b;
        }
        for (a, b) in total.mass.iter_mut().zip(&p.mass) {
            *a += b;
        }
        total.energy += p.energy;
        if p.farthest.1 > total.farthest.1 {
            total.farthest = p.farthest;
        }
    }
    total
}

fn check_centroids(centroids: &[Vec<f64>], grid: &GridDiscretization) -> Result<()> {
    if centroids.is_empty() {
        return Err(CvtError::InvalidConfig("need at least one centroid".into()));
    }
    if centroids.iter().any(|z| z.len() != grid.dim()) {
        return Err(CvtError::DomainMismatch(format!(
            "centroids must have {} coordinates",
            grid.dim()
        )));
    }
    for (a, za) in centroids.iter().enumerate() {
        if centroids[..a].iter().any(|zb| zb == za) {
            return Err(CvtError::InvalidConfig(format!(
                "centroid {a} is duplicated"
            )));
        }
    }
    Ok(())
}

fn means(a: &Assignment, k: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    (0..k)
        .map(|j| {
            if a.mass[j] > 0.0 {
                Ok((0..n).map(|i| a.sums[j * n + i] / a.mass[j]).collect())
            } else {
                Err(CvtError::EmptyCluster { cluster: j })
            }
        })
        .collect()
}

fn sup_displacement(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// One discrete Lloyd step: nearest-generator assignment (ties to the lowest
/// index) followed by weighted means.
pub fn lloyd_nd_step(centroids: &[Vec<f64>], grid: &GridDiscretization) -> Result<Vec<Vec<f64>>> {
    check_centroids(centroids, grid)?;
    let a = assign(centroids, grid);
    means(&a, centroids.len(), grid.dim())
}

/// Weighted quantization energy of `centroids` on the grid.
pub fn discrete_energy(centroids: &[Vec<f64>], grid: &GridDiscretization) -> Result<f64> {
    check_centroids(centroids, grid)?;
    Ok(assign(centroids, grid).energy)
}

/// Sup-norm displacement of one grid Lloyd step started at `generators`.
pub fn fixed_point_displacement(
    generators: &[Vec<f64>],
    d: &SeparableDensity,
    grid_res: usize,
) -> Result<f64> {
    let grid = GridDiscretization::from_density(d, grid_res)?;
    let next = lloyd_nd_step(generators, &grid)?;
    Ok(sup_displacement(&next, generators))
}

/// Displacement of one grid Lloyd step from the product generators.
/// For a genuine CVT this is discretization error only, shrinking like
/// `1 / grid_res`.
pub fn verify_fixed_point(p: &ProductCvt, d: &SeparableDensity, grid_res: usize) -> Result<f64> {
    if p.dim() != d.dim() || p.domain() != d.domain() {
        return Err(CvtError::DomainMismatch(
            "tessellation and density domains differ".into(),
        ));
    }
    if p.dim() > MAX_STEP_DIM {
        return Err(CvtError::InvalidConfig(format!(
            "grid oracle supports at most {MAX_STEP_DIM} dimensions"
        )));
    }
    fixed_point_displacement(&p.materialize(), d, grid_res)
}

/// Result of a discrete n-dimensional Lloyd solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NdSolution {
    pub centroids: Vec<Vec<f64>>,
    /// Updates that moved some generator by more than the tolerance.
    pub iterations: usize,
    pub energy: f64,
    /// Discrete energy before each update.
    pub energy_history: Vec<f64>,
    pub rescues: usize,
}

/// Discrete Lloyd from `n_centroids` distinct grid nodes drawn with
/// probability proportional to their weights.
pub fn lloyd_nd_solve(
    grid: &GridDiscretization,
    n_centroids: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<NdSolution> {
    if grid.dim() > MAX_SOLVE_DIM {
        return Err(CvtError::InvalidConfig(format!(
            "n-dimensional Lloyd oracle supports at most {MAX_SOLVE_DIM} dimensions"
        )));
    }
    if n_centroids == 0 || n_centroids > MAX_SOLVE_CENTROIDS {
        return Err(CvtError::InvalidConfig(format!(
            "n-dimensional Lloyd oracle needs 1..={MAX_SOLVE_CENTROIDS} centroids"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picker = WeightedIndex::new(grid.weights())
        .map_err(|e| CvtError::InvalidDensity(format!("grid weights: {e}")))?;
    let mut picked: Vec<usize> = Vec::with_capacity(n_centroids);
    let mut attempts = 0;
    while picked.len() < n_centroids {
        let i = picker.sample(&mut rng);
        if !picked.contains(&i) {
            picked.push(i);
        }
        attempts += 1;
        if attempts > 1000 * n_centroids {
            return Err(CvtError::InvalidConfig(
                "could not draw distinct initial centroids".into(),
            ));
        }
    }
    let init: Vec<Vec<f64>> = picked.iter().map(|&i| grid.node_vec(i)).collect();
    lloyd_nd_solve_from(grid, init, cfg)
}

/// Discrete Lloyd from explicit initial generators. Empty clusters are
/// reseeded at the node farthest from its generator, at most
/// [`MAX_RESCUES`] times.
pub fn lloyd_nd_solve_from(
    grid: &GridDiscretization,
    init: Vec<Vec<f64>>,
    cfg: &SolverConfig,
) -> Result<NdSolution> {
    cfg.validate()?;
    check_centroids(&init, grid)?;
    let k = init.len();
    let n = grid.dim();
    let mut z = init;
    let mut rescues = 0;
    let mut energy_history = Vec::new();
    let mut moves = 0;
    let mut disp = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let a = assign(&z, grid);
        energy_history.push(a.energy);
        let next = match means(&a, k, n) {
            Ok(next) => next,
            Err(CvtError::EmptyCluster { cluster }) => {
                if rescues == MAX_RESCUES {
                    return Err(CvtError::EmptyCluster { cluster });
                }
                rescues += 1;
                z[cluster] = grid.node_vec(a.farthest.0);
                continue;
            }
            Err(e) => return Err(e),
        };
        disp = sup_displacement(&next, &z);
        if disp <= cfg.tolerance {
            return Ok(NdSolution {
                energy: a.energy,
                centroids: z,
                iterations: moves,
                energy_history,
                rescues,
            });
        }
        moves += 1;
        z = next;
    }
    Err(CvtError::MaxIterationsExceeded {
        iterations: cfg.max_iterations,
        residual: disp,
        last: z.into_iter().flatten().collect(),
    })
}

/// Whether two generator sets coincide up to permutation, each point matched
/// within `tol` in the sup norm.
pub fn configurations_match(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|p| {
        let hit = b
            .iter()
            .enumerate()
            .find(|(j, q)| !used[*j] && p.iter().zip(q.iter()).all(|(x, y)| (x - y).abs() <= tol));
        match hit {
            Some((j, _)) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}
