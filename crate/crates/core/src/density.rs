//! One-dimensional densities on bounded intervals and their separable products.
//!
//! Every centroid and energy computation in the crate reduces to three
//! integrals over a subinterval: the mass, the first moment and the second
//! moment about a point. Uniform and Gaussian kinds use closed forms; the
//! other kinds integrate numerically.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CvtError, Result};
use crate::quadrature::{adaptive_simpson, ABS_TOL, MAX_DEPTH};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A bounded closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(CvtError::InvalidInterval { lo, hi })
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Closed containment.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_interior(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn covers(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Axis-aligned box, the product of one interval per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Region(Vec<Interval>);

impl Region {
    pub fn new(sides: Vec<Interval>) -> Self {
        Self(sides)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sides(&self) -> &[Interval] {
        &self.0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.0.len() && self.0.iter().zip(x).all(|(s, &v)| s.contains(v))
    }

    pub fn contains_interior(&self, x: &[f64]) -> bool {
        x.len() == self.0.len() && self.0.iter().zip(x).all(|(s, &v)| s.contains_interior(v))
    }

    pub fn volume(&self) -> f64 {
        self.0.iter().map(Interval::width).product()
    }
}

/// Piecewise-linear density through strictly increasing sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    rhos: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct TableRow {
    x: f64,
    rho: f64,
}

impl Table {
    pub fn new(xs: Vec<f64>, rhos: Vec<f64>) -> Result<Self> {
        if xs.len() != rhos.len() || xs.len() < 2 {
            return Err(CvtError::InvalidDensity(
                "table needs at least two (x, rho) samples".into(),
            ));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) || xs.iter().any(|x| !x.is_finite()) {
            return Err(CvtError::InvalidDensity(
                "table x values must be finite and strictly increasing".into(),
            ));
        }
        if rhos.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(CvtError::InvalidDensity(
                "table rho values must be finite and strictly positive".into(),
            ));
        }
        Ok(Self { xs, rhos })
    }

    /// Reads a CSV with header `x,rho`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let err = |message: String| CvtError::Table {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| err(e.to_string()))?;
        let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "rho"] {
            return Err(err(format!(
                "expected header `x,rho`, found `{}`",
                headers.as_slice()
            )));
        }
        let mut xs = Vec::new();
        let mut rhos = Vec::new();
        for row in reader.deserialize::<TableRow>() {
            let row = row.map_err(|e| err(e.to_string()))?;
            xs.push(row.x);
            rhos.push(row.rho);
        }
        Self::new(xs, rhos).map_err(|e| err(e.to_string()))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn value(&self, x: f64) -> f64 {
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= self.xs.len() => self.xs.len() - 2,
            i => i - 1,
        };
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.rhos[i] + t * (self.rhos[i + 1] - self.rhos[i])
    }

    /// Integrates `g(x) * rho(x)` over `[a, b]` for polynomial `g` of degree
    /// at most two. Simpson's rule is exact per linear piece.
    fn integrate<G: Fn(f64) -> f64>(&self, a: f64, b: f64, g: G) -> f64 {
        let start = self.xs.partition_point(|&k| k <= a).saturating_sub(1);
        let mut total = 0.0;
        for i in start..self.xs.len() - 1 {
            let u = a.max(self.xs[i]);
            let v = b.min(self.xs[i + 1]);
            if u >= v {
                if self.xs[i] >= b {
                    break;
                }
                continue;
            }
            let m = 0.5 * (u + v);
            let (ru, rm, rv) = (self.value(u), self.value(m), self.value(v));
            total += (v - u) / 6.0 * (g(u) * ru + 4.0 * g(m) * rm + g(v) * rv);
        }
        total
    }
}

/// Shape of a one-dimensional density.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// Constant `1` on the domain.
    Uniform,
    /// Normal probability density with the given mean and variance,
    /// truncated to the domain.
    Gaussian { mean: f64, variance: f64 },
    /// `exp(-a x^2)`, unnormalized.
    ExpQuadratic { a: f64 },
    /// Linear interpolation of positive samples. Not necessarily
    /// log-concave, so the 1D tessellation may not be unique.
    Tabulated {
        source: Option<PathBuf>,
        table: Table,
    },
}

impl DensityKind {
    /// Parses `uniform`, `gaussian(mean,var)`, `expquad(a)` or
    /// `table(path.csv)`. Table paths are resolved against `base_dir`.
    pub fn parse(spec: &str, base_dir: &Path) -> Result<Self> {
        let spec = spec.trim();
        let bad = || CvtError::InvalidDensity(format!("unrecognized density spec `{spec}`"));
        if spec == "uniform" {
            return Ok(DensityKind::Uniform);
        }
        let open = spec.find('(').ok_or_else(bad)?;
        if !spec.ends_with(')') {
            return Err(bad());
        }
        let name = spec[..open].trim();
        let args = &spec[open + 1..spec.len() - 1];
        let numbers = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        match name {
            "gaussian" => match numbers()?.as_slice() {
                &[mean, variance] => Ok(DensityKind::Gaussian { mean, variance }),
                _ => Err(bad()),
            },
            "expquad" => match numbers()?.as_slice() {
                &[a] => Ok(DensityKind::ExpQuadratic { a }),
                _ => Err(bad()),
            },
            "table" => {
                let path = base_dir.join(args.trim());
                let table = Table::from_csv(&path)?;
                Ok(DensityKind::Tabulated {
                    source: Some(path),
                    table,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::Uniform => write!(f, "uniform"),
            DensityKind::Gaussian { mean, variance } => write!(f, "gaussian({mean},{variance})"),
            DensityKind::ExpQuadratic { a } => write!(f, "expquad({a})"),
            DensityKind::Tabulated {
                source: Some(path), ..
            } => write!(f, "table({})", path.display()),
            DensityKind::Tabulated { source: None, .. } => write!(f, "table(<memory>)"),
        }
    }
}

/// A positive density on a bounded interval.
///
/// When `normalized` is set the density is rescaled so that its mass over the
/// whole domain is one. Otherwise the raw shape is used: `1` for uniform,
/// the untruncated normal pdf for Gaussian and `exp(-a x^2)` for the
/// exponential-quadratic kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    kind: DensityKind,
    domain: Interval,
    normalized: bool,
    scale: f64,
}

impl Density1D {
    pub fn new(kind: DensityKind, domain: Interval, normalized: bool) -> Result<Self> {
        match &kind {
            DensityKind::Uniform => {}
            &DensityKind::Gaussian { mean, variance } => {
                if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
                    return Err(CvtError::InvalidDensity(format!(
                        "gaussian needs finite mean and positive variance, got ({mean}, {variance})"
                    )));
                }
            }
            &DensityKind::ExpQuadratic { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(CvtError::InvalidDensity(format!(
                        "expquad needs a positive scale, got {a}"
                    )));
                }
            }
            DensityKind::Tabulated { table, .. } => {
                let (lo, hi) = table.support();
                if domain.lo() < lo || domain.hi() > hi {
                    return Err(CvtError::InvalidDensity(format!(
                        "table support [{lo}, {hi}] does not cover domain {domain}"
                    )));
                }
            }
        }
        let mut density = Self {
            kind,
            domain,
            normalized: false,
            scale: 1.0,
        };
        if normalized {
            density = density.normalize()?;
        }
        Ok(density)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DensityKind::Uniform, Interval::new(lo, hi)?, false)
    }

    pub fn gaussian(mean: f64, variance: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            DensityKind::Gaussian { mean, variance },
            Interval::new(lo, hi)?,
            false,
        )
    }

    pub fn exp_quadratic(a: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            DensityKind::ExpQuadratic { a },
            Interval::new(lo, hi)?,
            false,
        )
    }

    pub fn tabulated(table: Table, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            DensityKind::Tabulated {
                source: None,
                table,
            },
            Interval::new(lo, hi)?,
            false,
        )
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Constant factor applied to the raw shape.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same shape rescaled to unit mass over the domain.
    pub fn normalize(&self) -> Result<Self> {
        let raw = self.raw_mass(self.domain.lo, self.domain.hi);
        if !(raw > 0.0 && raw.is_finite()) {
            return Err(CvtError::NonPositiveMass {
                lo: self.domain.lo,
                hi: self.domain.hi,
                mass: raw,
            });
        }
        Ok(Self {
            kind: self.kind.clone(),
            domain: self.domain,
            normalized: true,
            scale: 1.0 / raw,
        })
    }

    /// Raw (unnormalized) version of this density.
    pub fn raw(&self) -> Self {
        Self {
            kind: self.kind.clone(),
            domain: self.domain,
            normalized: false,
            scale: 1.0,
        }
    }

    /// Multiplies the density by `c > 0`. The result is no longer flagged
    /// as normalized.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "scale factor must be positive");
        Self {
            kind: self.kind.clone(),
            domain: self.domain,
            normalized: false,
            scale: self.scale * c,
        }
    }

    /// Density value at `x` (no domain check).
    pub fn value(&self, x: f64) -> f64 {
        let raw = match &self.kind {
            DensityKind::Uniform => 1.0,
            &DensityKind::Gaussian { mean, variance } => {
                let sigma = variance.sqrt();
                let t = (x - mean) / sigma;
                FRAC_1_SQRT_2PI * (-0.5 * t * t).exp() / sigma
            }
            &DensityKind::ExpQuadratic { a } => (-a * x * x).exp(),
            DensityKind::Tabulated { table, .. } => table.value(x),
        };
        self.scale * raw
    }

    /// Mass over the whole domain.
    pub fn total_mass(&self) -> Result<f64> {
        self.mass(&self.domain)
    }

    /// `∫_seg ρ(x) dx`.
    pub fn mass(&self, seg: &Interval) -> Result<f64> {
        let (a, b) = self.check(seg)?;
        let m = self.scale * self.raw_mass(a, b);
        if m > 0.0 && m.is_finite() {
            Ok(m)
        } else {
            Err(CvtError::NonPositiveMass {
                lo: a,
                hi: b,
                mass: m,
            })
        }
    }

    /// `∫_seg x ρ(x) dx`.
    pub fn first_moment(&self, seg: &Interval) -> Result<f64> {
        let (a, b) = self.check(seg)?;
        let raw = match &self.kind {
            DensityKind::Uniform => 0.5 * (b - a) * (a + b),
            &DensityKind::Gaussian { mean, variance } => {
                let sigma = variance.sqrt();
                let (alpha, beta) = ((a - mean) / sigma, (b - mean) / sigma);
                mean * normal_cdf_diff(alpha, beta) + sigma * (std_pdf(alpha) - std_pdf(beta))
            }
            &DensityKind::ExpQuadratic { a: s } => {
                adaptive_simpson(|x| x * (-s * x * x).exp(), a, b, ABS_TOL, MAX_DEPTH)
            }
            DensityKind::Tabulated { table, .. } => table.integrate(a, b, |x| x),
        };
        Ok(self.scale * raw)
    }

    /// Mass centroid `∫ x ρ / ∫ ρ` of `seg`.
    pub fn centroid(&self, seg: &Interval) -> Result<f64> {
        let mass = self.mass(seg)?;
        let (a, b) = (seg.lo.max(self.domain.lo), seg.hi.min(self.domain.hi));
        let c = match &self.kind {
            DensityKind::Uniform => 0.5 * (a + b),
            &DensityKind::Gaussian { mean, variance } => {
                // the mean is factored out to avoid cancellation in the tails
                let sigma = variance.sqrt();
                let (alpha, beta) = ((a - mean) / sigma, (b - mean) / sigma);
                mean + sigma * (std_pdf(alpha) - std_pdf(beta)) / normal_cdf_diff(alpha, beta)
            }
            _ => self.first_moment(seg)? / mass,
        };
        Ok(c.clamp(a, b))
    }

    /// `∫_seg ρ(x) (x - z)^2 dx`.
    pub fn second_moment_about(&self, seg: &Interval, z: f64) -> Result<f64> {
        let (a, b) = self.check(seg)?;
        let raw = match &self.kind {
            DensityKind::Uniform => ((b - z).powi(3) - (a - z).powi(3)) / 3.0,
            &DensityKind::Gaussian { mean, variance } => {
                let sigma = variance.sqrt();
                let (alpha, beta) = ((a - mean) / sigma, (b - mean) / sigma);
                let (pa, pb) = (std_pdf(alpha), std_pdf(beta));
                let p = normal_cdf_diff(alpha, beta);
                let shift = mean - z;
                let central = variance * (p - (beta * pb - alpha * pa));
                central + 2.0 * shift * sigma * (pa - pb) + shift * shift * p
            }
            &DensityKind::ExpQuadratic { a: s } => adaptive_simpson(
                |x| (x - z) * (x - z) * (-s * x * x).exp(),
                a,
                b,
                ABS_TOL,
                MAX_DEPTH,
            ),
            DensityKind::Tabulated { table, .. } => table.integrate(a, b, |x| (x - z) * (x - z)),
        };
        Ok((self.scale * raw).max(0.0))
    }

    /// Inverse of the normalized cumulative mass, by bisection to an
    /// absolute tolerance of `1e-12` in `x`.
    pub fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = (self.domain.lo, self.domain.hi);
        if p <= 0.0 {
            return lo;
        }
        if p >= 1.0 {
            return hi;
        }
        let target = p * self.raw_mass(lo, hi);
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-12 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.raw_mass(lo, m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Unscaled mass of `[a, b]`, `a <= b`, no domain check.
    pub(crate) fn raw_mass(&self, a: f64, b: f64) -> f64 {
        if a >= b {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => b - a,
            &DensityKind::Gaussian { mean, variance } => {
                let sigma = variance.sqrt();
                normal_cdf_diff((a - mean) / sigma, (b - mean) / sigma)
            }
            &DensityKind::ExpQuadratic { a: s } => {
                adaptive_simpson(|x| (-s * x * x).exp(), a, b, ABS_TOL, MAX_DEPTH)
            }
            DensityKind::Tabulated { table, .. } => table.integrate(a, b, |_| 1.0),
        }
    }

    fn check(&self, seg: &Interval) -> Result<(f64, f64)> {
        let slack = 4.0
            * f64::EPSILON
            * self
                .domain
                .width()
                .max(self.domain.lo.abs().max(self.domain.hi.abs()));
        if seg.lo < self.domain.lo - slack || seg.hi > self.domain.hi + slack {
            return Err(CvtError::SegmentOutsideDomain {
                lo: seg.lo,
                hi: seg.hi,
                domain_lo: self.domain.lo,
                domain_hi: self.domain.hi,
            });
        }
        Ok((seg.lo.max(self.domain.lo), seg.hi.min(self.domain.hi)))
    }
}

#[inline]
fn std_pdf(t: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// `Φ(beta) - Φ(alpha)` computed from the tail that avoids cancellation.
fn normal_cdf_diff(alpha: f64, beta: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if alpha >= 0.0 {
        0.5 * (libm::erfc(alpha * s) - libm::erfc(beta * s))
    } else if beta <= 0.0 {
        0.5 * (libm::erfc(-beta * s) - libm::erfc(-alpha * s))
    } else {
        0.5 * (libm::erf(beta * s) - libm::erf(alpha * s))
    }
}

/// Joint density `ρ(x) = Π_i ρ_i(x_i)` over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableDensity {
    marginals: Vec<Density1D>,
}

impl SeparableDensity {
    pub fn new(marginals: Vec<Density1D>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(CvtError::InvalidDensity(
                "separable density needs at least one marginal".into(),
            ));
        }
        Ok(Self { marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Density1D] {
        &self.marginals
    }

    pub fn domain(&self) -> Region {
        Region::new(self.marginals.iter().map(Density1D::domain).collect())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.marginals
            .iter()
            .zip(x)
            .map(|(d, &v)| d.value(v))
            .product()
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.marginals.iter().map(Density1D::total_mass).product()
    }

    /// Every marginal rescaled to unit mass.
    pub fn normalize(&self) -> Result<Self> {
        Ok(Self {
            marginals: self
                .marginals
                .iter()
                .map(Density1D::normalize)
                .collect::<Result<_>>()?,
        })
    }

    /// Every marginal in raw units.
    pub fn raw(&self) -> Self {
        Self {
            marginals: self.marginals.iter().map(Density1D::raw).collect(),
        }
    }
}
