//! One-dimensional centroidal Voronoi tessellations.
//!
//! In one dimension the Voronoi cell of a sorted generator `z_j` is bounded by
//! the midpoints to its neighbours, so a tessellation is fully described by
//! its sorted centroids. Two solvers are provided: Lloyd's fixed-point
//! iteration and a damped Newton solve of `z = T(z)`, where `T` maps
//! generators to the mass centroids of their cells.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density::{Density1D, Interval};
use crate::error::{CvtError, Result};

/// Largest cell count for which the default method prefers Newton.
pub const NEWTON_PREFERRED_MAX_CELLS: usize = 64;
/// Iteration cap applied to Newton inside the fallback method.
pub const NEWTON_MAX_ITERATIONS: usize = 100;
pub const LLOYD_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

const FD_RELATIVE_STEP: f64 = 1e-7;
const MAX_HALVINGS: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lloyd,
    Newton,
    NewtonWithLloydFallback,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lloyd => "lloyd",
            Method::Newton => "newton",
            Method::NewtonWithLloydFallback => "newton-with-lloyd-fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Bound on the sup-norm centroid displacement, in domain units.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: LLOYD_MAX_ITERATIONS,
            method: Method::NewtonWithLloydFallback,
        }
    }
}

impl SolverConfig {
    pub fn lloyd() -> Self {
        Self {
            method: Method::Lloyd,
            ..Self::default()
        }
    }

    pub fn newton() -> Self {
        Self {
            method: Method::Newton,
            max_iterations: NEWTON_MAX_ITERATIONS,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(CvtError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(CvtError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sorted centroids of a 1D tessellation and the cell breakpoints they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct Cvt1D {
    domain: Interval,
    centroids: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl Cvt1D {
    /// Builds the tessellation whose interior breakpoints are the midpoints
    /// between consecutive centroids.
    pub fn from_centroids(domain: Interval, centroids: Vec<f64>) -> Result<Self> {
        check_generators(&domain, &centroids)?;
        let breakpoints = breakpoints(&domain, &centroids);
        Ok(Self {
            domain,
            centroids,
            breakpoints,
        })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn cell(&self, j: usize) -> Interval {
        Interval::new(self.breakpoints[j], self.breakpoints[j + 1])
            .expect("breakpoints are strictly increasing")
    }

    pub fn cells(&self) -> impl Iterator<Item = Interval> + '_ {
        (0..self.len()).map(|j| self.cell(j))
    }

    /// Index of the cell containing `x`. A point on an interior breakpoint
    /// belongs to the lower cell.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        let interior = &self.breakpoints[1..self.breakpoints.len() - 1];
        Some(interior.partition_point(|&b| b < x))
    }
}

/// Outcome of a 1D solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub cvt: Cvt1D,
    pub iterations: usize,
    /// Sup-norm of `T(z) - z` at the returned centroids.
    pub residual: f64,
    /// Solver that produced the result.
    pub method: Method,
}

fn check_generators(domain: &Interval, z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(CvtError::InvalidConfig(
            "at least one generator is required".into(),
        ));
    }
    let ordered = z.windows(2).all(|w| w[0] < w[1]);
    let inside = domain.contains_interior(z[0]) && domain.contains_interior(z[z.len() - 1]);
    if ordered && inside && z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CvtError::InvalidConfig(
            "generators must be strictly increasing and inside the domain".into(),
        ))
    }
}

fn is_admissible(domain: &Interval, z: &[f64]) -> bool {
    check_generators(domain, z).is_ok()
}

fn breakpoints(domain: &Interval, z: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(z.len() + 1);
    b.push(domain.lo());
    b.extend(z.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    b.push(domain.hi());
    b
}

/// Equal-mass initialization: the `j`-th generator sits at the
/// `(2j - 1) / 2n` quantile of the normalized density.
pub fn initial_centroids(d: &Density1D, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| d.quantile((2 * j - 1) as f64 / (2 * n) as f64))
        .collect()
}

/// One Lloyd update: every generator moves to the mass centroid of its cell.
pub fn lloyd_step(d: &Density1D, centroids: &[f64]) -> Result<Vec<f64>> {
    let domain = d.domain();
    check_generators(&domain, centroids)?;
    centroid_map(d, centroids)
}

fn centroid_map(d: &Density1D, z: &[f64]) -> Result<Vec<f64>> {
    let b = breakpoints(&d.domain(), z);
    b.windows(2)
        .map(|w| {
            let cell = Interval::new(w[0], w[1]).map_err(|_| CvtError::NonPositiveMass {
                lo: w[0],
                hi: w[1],
                mass: 0.0,
            })?;
            d.centroid(&cell)
        })
        .collect()
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Sup-norm Lloyd displacement `|T(z) - z|` of a tessellation.
pub fn lloyd_residual(d: &Density1D, cvt: &Cvt1D) -> Result<f64> {
    let next = lloyd_step(d, cvt.centroids())?;
    Ok(sup_distance(&next, cvt.centroids()))
}

/// Solves with the method selected in `cfg`.
pub fn solve(d: &Density1D, n: usize, cfg: &SolverConfig) -> Result<Solution> {
    match cfg.method {
        Method::Lloyd => solve_lloyd(d, n, cfg),
        Method::Newton => solve_newton(d, n, cfg),
        Method::NewtonWithLloydFallback => {
            if n > NEWTON_PREFERRED_MAX_CELLS {
                return solve_lloyd(d, n, cfg);
            }
            let newton_cfg = SolverConfig {
                max_iterations: cfg.max_iterations.min(NEWTON_MAX_ITERATIONS),
                ..*cfg
            };
            match solve_newton(d, n, &newton_cfg) {
                Ok(solution) => Ok(solution),
                Err(
                    CvtError::SingularJacobian { .. }
                    | CvtError::OrderingViolated { .. }
                    | CvtError::MaxIterationsExceeded { .. },
                ) => solve_lloyd(d, n, cfg),
                Err(e) => Err(e),
            }
        }
    }
}

fn single_cell(d: &Density1D, method: Method) -> Result<Solution> {
    let z = d.centroid(&d.domain())?;
    Ok(Solution {
        cvt: Cvt1D::from_centroids(d.domain(), vec![z])?,
        iterations: 0,
        residual: 0.0,
        method,
    })
}

/// Lloyd iteration from the equal-mass initialization.
///
/// Stops once the displacement is within tolerance and the geometric tail
/// estimate `disp * r / (1 - r)`, with `r` the observed contraction ratio,
/// is within tolerance as well. Lloyd contracts slowly for many cells, so a
/// small step alone does not bound the distance to the fixed point.
pub fn solve_lloyd(d: &Density1D, n: usize, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if n == 0 {
        return Err(CvtError::InvalidConfig(
            "need at least one generator".into(),
        ));
    }
    if n == 1 {
        return single_cell(d, Method::Lloyd);
    }
    let tol = cfg.tolerance;
    let mut z = initial_centroids(d, n);
    check_generators(&d.domain(), &z)?;
    let mut prev_disp = f64::INFINITY;
    let mut disp = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let next = centroid_map(d, &z)?;
        disp = sup_distance(&next, &z);
        z = next;
        if disp <= tol {
            let ratio = disp / prev_disp;
            let tail = if ratio < 1.0 {
                disp * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            // at the quadrature noise floor the ratio is meaningless
            if tail <= tol || disp <= 1e-3 * tol {
                let cvt = Cvt1D::from_centroids(d.domain(), z)?;
                let residual = lloyd_residual(d, &cvt)?;
                return Ok(Solution {
                    cvt,
                    iterations: it,
                    residual,
                    method: Method::Lloyd,
                });
            }
        }
        prev_disp = disp;
    }
    Err(CvtError::MaxIterationsExceeded {
        iterations: cfg.max_iterations,
        residual: disp,
        last: z,
    })
}

/// Tridiagonal Jacobian of `F(z) = z - T(z)`.
struct Tridiagonal {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl Tridiagonal {
    /// Thomas algorithm. Returns `None` on a vanishing or NaN pivot.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.diag.len();
        let scale = self.diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot.abs() > tiny) {
            return None;
        }
        c[0] = self.sup[0] / pivot;
        y[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.sub[i] * c[i - 1];
            if !(pivot.abs() > tiny) {
                return None;
            }
            c[i] = self.sup[i] / pivot;
            y[i] = (rhs[i] - self.sub[i] * y[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y.iter().all(|v| v.is_finite()).then_some(y)
    }
}

/// Central-difference Jacobian. `T_i` depends only on `z_{i-1}, z_i, z_{i+1}`,
/// so coordinates congruent mod 3 are perturbed together.
fn jacobian(d: &Density1D, z: &[f64]) -> Result<Tridiagonal> {
    let n = z.len();
    let domain = d.domain();
    let base_step = FD_RELATIVE_STEP * domain.width();
    let steps: Vec<f64> = (0..n)
        .map(|j| {
            let left = if j == 0 {
                z[0] - domain.lo()
            } else {
                z[j] - z[j - 1]
            };
            let right = if j + 1 == n {
                domain.hi() - z[j]
            } else {
                z[j + 1] - z[j]
            };
            base_step.min(0.25 * left.min(right))
        })
        .collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut sup = vec![0.0; n];
    for color in 0..3.min(n) {
        let mut plus = z.to_vec();
        let mut minus = z.to_vec();
        for j in (color..n).step_by(3) {
            plus[j] += steps[j];
            minus[j] -= steps[j];
        }
        let tp = centroid_map(d, &plus)?;
        let tm = centroid_map(d, &minus)?;
        for i in 0..n {
            // the perturbed coordinate among i-1, i, i+1, if any
            let Some(j) = (i.saturating_sub(1)..=(i + 1).min(n - 1)).find(|j| j % 3 == color)
            else {
                continue;
            };
            let dt = (tp[i] - tm[i]) / (2.0 * steps[j]);
            if j + 1 == i {
                sub[i] = -dt;
            } else if j == i {
                diag[i] = 1.0 - dt;
            } else {
                sup[i] = -dt;
            }
        }
    }
    Ok(Tridiagonal { sub, diag, sup })
}

/// Damped Newton solve of the centroid system `z_j = centroid(cell_j(z))`.
///
/// Steps are halved until the residual decreases and the iterate stays
/// strictly ordered inside the domain. Convergence requires both the
/// residual and the last step to be within tolerance.
pub fn solve_newton(d: &Density1D, n: usize, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if n == 0 {
        return Err(CvtError::InvalidConfig(
            "need at least one generator".into(),
        ));
    }
    if n == 1 {
        return single_cell(d, Method::Newton);
    }
    let domain = d.domain();
    let tol = cfg.tolerance;
    let mut z = initial_centroids(d, n);
    check_generators(&domain, &z)?;
    let residual_of = |z: &[f64]| -> Result<(Vec<f64>, f64)> {
        let t = centroid_map(d, z)?;
        let f: Vec<f64> = z.iter().zip(&t).map(|(a, b)| a - b).collect();
        let norm = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok((f, norm))
    };
    let (mut f, mut res) = residual_of(&z)?;
    let mut last_step = f64::INFINITY;
    for it in 0..cfg.max_iterations {
        if res <= tol && last_step <= tol {
            return Ok(Solution {
                cvt: Cvt1D::from_centroids(domain, z)?,
                iterations: it,
                residual: res,
                method: Method::Newton,
            });
        }
        let jac = jacobian(d, &z)?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = jac
            .solve(&rhs)
            .ok_or(CvtError::SingularJacobian { iteration: it })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut ordered_seen = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = z.iter().zip(&delta).map(|(a, s)| a + lambda * s).collect();
            if is_admissible(&domain, &cand) {
                ordered_seen = true;
                if let Ok((fc, rc)) = residual_of(&cand) {
                    if rc < res {
                        accepted = Some((cand, fc, rc));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, fc, rc)) => {
                last_step = lambda * delta.iter().map(|v| v.abs()).fold(0.0, f64::max);
                z = cand;
                f = fc;
                res = rc;
            }
            // no further decrease is possible at the noise floor
            None if res <= tol => {
                return Ok(Solution {
                    cvt: Cvt1D::from_centroids(domain, z)?,
                    iterations: it,
                    residual: res,
                    method: Method::Newton,
                });
            }
            None if !ordered_seen => return Err(CvtError::OrderingViolated { iteration: it }),
            None => {
                return Err(CvtError::MaxIterationsExceeded {
                    iterations: it,
                    residual: res,
                    last: z,
                })
            }
        }
    }
    if res <= tol && last_step <= tol {
        return Ok(Solution {
            cvt: Cvt1D::from_centroids(domain, z)?,
            iterations: cfg.max_iterations,
            residual: res,
            method: Method::Newton,
        });
    }
    Err(CvtError::MaxIterationsExceeded {
        iterations: cfg.max_iterations,
        residual: res,
        last: z,
    })
}

/// Quantization energy `Σ_j ∫_{cell_j} ρ(x) (x - z_j)^2 dx`.
pub fn energy_1d(d: &Density1D, cvt: &Cvt1D) -> Result<f64> {
    if d.domain() != cvt.domain() {
        return Err(CvtError::DomainMismatch(format!(
            "density on {} but tessellation on {}",
            d.domain(),
            cvt.domain()
        )));
    }
    cvt.cells()
        .zip(cvt.centroids())
        .map(|(cell, &z)| d.second_moment_about(&cell, z))
        .sum()
}
