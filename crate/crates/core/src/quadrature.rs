//! One-dimensional quadrature rules.
//!
//! [`adaptive_simpson`] is the workhorse behind every density kind without a
//! closed form. [`GaussLegendre`] supplies the fixed tensor rules used by the
//! grid-quadrature energy oracle.

/// Absolute tolerance used for density integrals.
pub const ABS_TOL: f64 = 1e-12;
/// Recursion depth cap for [`adaptive_simpson`].
pub const MAX_DEPTH: u32 = 60;

const MIN_DEPTH: u32 = 2;

/// Integrates `f` over `[a, b]` by adaptive Simpson with Richardson correction.
///
/// Subintervals are accepted when the two-panel and one-panel estimates
/// differ by at most `15 * eps` (with `eps` halved per level), when the
/// difference is at rounding level, or when the depth budget is spent.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, eps: f64, max_depth: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, eps, max_depth, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth_left: u32,
    level: u32,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    if !(a < lm && lm < m && m < rm && rm < b) {
        // interval exhausted at floating-point resolution
        return whole;
    }
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let sum = left + right;
    let delta = sum - whole;
    let converged = delta.abs() <= 15.0 * eps || delta.abs() <= 64.0 * f64::EPSILON * sum.abs();
    if depth_left == 0 || (level >= MIN_DEPTH && converged) {
        return sum + delta / 15.0;
    }
    simpson_step(
        f,
        a,
        m,
        fa,
        flm,
        fm,
        left,
        0.5 * eps,
        depth_left - 1,
        level + 1,
    ) + simpson_step(
        f,
        m,
        b,
        fm,
        frm,
        fb,
        right,
        0.5 * eps,
        depth_left - 1,
        level + 1,
    )
}

/// Gauss-Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Returns `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
