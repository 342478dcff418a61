//! Product tessellations: n one-dimensional CVTs combined into a CVT of the box
//! they span, valid whenever the density factorizes over the coordinates.
//!
//! Cells are enumerated with the last dimension varying fastest. The product
//! is stored as its factors plus the index enumeration; n-dimensional
//! centroids are only built on request.

use rayon::prelude::*;

use crate::cvt1d::{solve, Cvt1D, Method, SolverConfig};
use crate::density::{Region, SeparableDensity};
use crate::error::{CvtError, Result};

/// Default bound on the number of product cells.
pub const DEFAULT_CAP: usize = 10_000_000;

/// Enumeration of all index tuples `(k_1, …, k_n)` with `k_i < N_i`.
///
/// Column `k` of the conceptual `n × N` matrix is decoded on demand in mixed
/// radix, last dimension fastest. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMatrix {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl IndexMatrix {
    pub fn new(dims: &[usize]) -> Result<Self> {
        Self::with_cap(dims, DEFAULT_CAP)
    }

    pub fn with_cap(dims: &[usize], cap: usize) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(CvtError::InvalidConfig(format!(
                "every dimension needs at least one cell, got {dims:?}"
            )));
        }
        let requested: u128 = dims.iter().map(|&d| d as u128).product();
        if requested > cap as u128 {
            return Err(CvtError::CapExceeded { requested, cap });
        }
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len() - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Self {
            dims: dims.to_vec(),
            strides,
            len: requested as usize,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of dimensions `n`.
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Number of columns `N = Π N_i`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn column(&self, k: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.dims.len()];
        self.column_into(k, &mut out)?;
        Ok(out)
    }

    pub fn column_into(&self, k: usize, out: &mut [usize]) -> Result<()> {
        if k >= self.len {
            return Err(CvtError::IndexOutOfRange {
                index: k,
                len: self.len,
            });
        }
        for ((o, &s), &d) in out.iter_mut().zip(&self.strides).zip(&self.dims) {
            *o = (k / s) % d;
        }
        Ok(())
    }

    /// Inverse of [`column`](Self::column).
    pub fn linear_index(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.strides).map(|(t, s)| t * s).sum()
    }

    pub fn columns(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len).map(|k| self.column(k).expect("k < len"))
    }

    /// Dense `n × N` matrix, row `i` holding the dimension-`i` indices.
    pub fn entries(&self) -> Vec<Vec<usize>> {
        (0..self.rank())
            .map(|i| {
                (0..self.len)
                    .map(|k| (k / self.strides[i]) % self.dims[i])
                    .collect()
            })
            .collect()
    }
}

/// Solver statistics for one factor of a product build.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorStats {
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
}

/// n-dimensional tessellation assembled from one 1D tessellation per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCvt {
    factors: Vec<Cvt1D>,
    index: IndexMatrix,
}

impl ProductCvt {
    pub fn new(factors: Vec<Cvt1D>) -> Result<Self> {
        Self::with_cap(factors, DEFAULT_CAP)
    }

    pub fn with_cap(factors: Vec<Cvt1D>, cap: usize) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(Cvt1D::len).collect();
        let index = IndexMatrix::with_cap(&dims, cap)?;
        Ok(Self { factors, index })
    }

    pub fn factors(&self) -> &[Cvt1D] {
        &self.factors
    }

    pub fn index(&self) -> &IndexMatrix {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    /// Number of generators `N`.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn domain(&self) -> Region {
        Region::new(self.factors.iter().map(Cvt1D::domain).collect())
    }

    /// Generator `k`: coordinate `i` is centroid `k_i` of factor `i`.
    pub fn centroid_of(&self, k: usize) -> Result<Vec<f64>> {
        let tuple = self.index.column(k)?;
        Ok(self
            .factors
            .iter()
            .zip(&tuple)
            .map(|(f, &j)| f.centroids()[j])
            .collect())
    }

    /// Cell `k` as the product of the factor cells.
    pub fn cell_of(&self, k: usize) -> Result<Region> {
        let tuple = self.index.column(k)?;
        Ok(Region::new(
            self.factors
                .iter()
                .zip(&tuple)
                .map(|(f, &j)| f.cell(j))
                .collect(),
        ))
    }

    /// Index of the cell containing `x`, by binary search per axis. Points on
    /// an interior breakpoint go to the lower cell of that axis.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(CvtError::DomainMismatch(format!(
                "point has {} coordinates, tessellation has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut k = 0;
        for (i, (f, &v)) in self.factors.iter().zip(x).enumerate() {
            let j = f.locate(v).ok_or(CvtError::OutOfDomain { dim: i })?;
            k = k * f.len() + j;
        }
        Ok(k)
    }

    /// All generators in enumeration order.
    pub fn materialize(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|k| self.centroid_of(k).expect("k < len"))
            .collect()
    }
}

/// Solves every axis independently and assembles the product tessellation.
pub fn build_product(
    density: &SeparableDensity,
    dims: &[usize],
    cfg: &SolverConfig,
) -> Result<ProductCvt> {
    build_product_with_stats(density, dims, cfg).map(|(p, _)| p)
}

/// [`build_product`] plus per-axis solver statistics.
pub fn build_product_with_stats(
    density: &SeparableDensity,
    dims: &[usize],
    cfg: &SolverConfig,
) -> Result<(ProductCvt, Vec<FactorStats>)> {
    if density.dim() != dims.len() {
        return Err(CvtError::DomainMismatch(format!(
            "{} marginals for {} dimensions",
            density.dim(),
            dims.len()
        )));
    }
    // reject oversized products before solving anything
    IndexMatrix::new(dims)?;
    let solutions = density
        .marginals()
        .par_iter()
        .zip(dims.par_iter())
        .enumerate()
        .map(|(i, (d, &n))| solve(d, n, cfg).map_err(|e| e.in_dimension(i)))
        .collect::<Result<Vec<_>>>()?;
    let stats = solutions
        .iter()
        .map(|s| FactorStats {
            iterations: s.iterations,
            residual: s.residual,
            method: s.method,
        })
        .collect();
    let factors = solutions.into_iter().map(|s| s.cvt).collect();
    Ok((ProductCvt::new(factors)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Density1D, Interval};

    fn uniform_grid(n: usize, dims: usize) -> ProductCvt {
        let d = Density1D::uniform(0.0, 1.0).unwrap();
        let sep = SeparableDensity::new(vec![d; dims]).unwrap();
        build_product(&sep, &vec![n; dims], &SolverConfig::default()).unwrap()
    }

    #[test]
    fn index_matrix_two_by_three() {
        let m = IndexMatrix::new(&[2, 3]).unwrap();
        let cols: Vec<Vec<usize>> = m.columns().collect();
        let one_based: Vec<Vec<usize>> = cols
            .iter()
            .map(|c| c.iter().map(|v| v + 1).collect())
            .collect();
        assert_eq!(
            one_based,
            vec![
                vec![1, 1],
                vec![1, 2],
                vec![1, 3],
                vec![2, 1],
                vec![2, 2],
                vec![2, 3]
            ]
        );
        assert_eq!(
            m.entries(),
            vec![vec![0, 0, 0, 1, 1, 1], vec![0, 1, 2, 0, 1, 2]]
        );
    }

    #[test]
    fn index_matrix_trivial_shapes() {
        let m = IndexMatrix::new(&[1, 1, 1]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.column(0).unwrap(), vec![0, 0, 0]);
        let m = IndexMatrix::new(&[3]).unwrap();
        assert_eq!(
            m.columns().collect::<Vec<_>>(),
            vec![vec![0], vec![1], vec![2]]
        );
    }

    #[test]
    fn index_matrix_cap_and_range() {
        assert!(matches!(
            IndexMatrix::new(&[10_000, 10_000]),
            Err(CvtError::CapExceeded { .. })
        ));
        assert!(IndexMatrix::with_cap(&[4, 4], 16).is_ok());
        assert!(IndexMatrix::with_cap(&[4, 5], 16).is_err());
        assert!(IndexMatrix::new(&[2, 0]).is_err());
        let m = IndexMatrix::new(&[2, 3]).unwrap();
        assert!(matches!(m.column(6), Err(CvtError::IndexOutOfRange { .. })));
    }

    #[test]
    fn index_matrix_is_a_bijection() {
        let m = IndexMatrix::new(&[3, 1, 4, 2]).unwrap();
        for k in 0..m.len() {
            assert_eq!(m.linear_index(&m.column(k).unwrap()), k);
        }
        let mut cols: Vec<_> = m.columns().collect();
        cols.sort();
        cols.dedup();
        assert_eq!(cols.len(), 24);
    }

    #[test]
    fn centroid_and_cell_lookup() {
        let p = uniform_grid(2, 2);
        let c = p.centroid_of(3).unwrap();
        assert!((c[0] - 0.75).abs() < 1e-12 && (c[1] - 0.75).abs() < 1e-12);
        let cell = p.cell_of(0).unwrap();
        assert_eq!(cell.sides()[0], Interval::new(0.0, 0.5).unwrap());
        assert_eq!(cell.sides()[1], Interval::new(0.0, 0.5).unwrap());
        assert!(p.centroid_of(4).is_err());
        assert!(p.cell_of(4).is_err());
    }

    #[test]
    fn locate_examples() {
        let p = uniform_grid(2, 2);
        let k = p.locate(&[0.1, 0.9]).unwrap();
        let c = p.centroid_of(k).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-12 && (c[1] - 0.75).abs() < 1e-12);
        assert_eq!(p.locate(&[0.5, 0.5]).unwrap(), 0);
        assert!(matches!(
            p.locate(&[0.5, 1.5]),
            Err(CvtError::OutOfDomain { dim: 1 })
        ));
        assert!(p.locate(&[0.5]).is_err());
    }

    #[test]
    fn degenerate_trailing_factors() {
        let sep = SeparableDensity::new(vec![
            Density1D::gaussian(0.0, 1.0, -3.0, 3.0).unwrap(),
            Density1D::gaussian(1.0, 2.0, -3.0, 3.0).unwrap(),
            Density1D::uniform(2.0, 5.0).unwrap(),
        ])
        .unwrap();
        let p = build_product(&sep, &[5, 1, 1], &SolverConfig::default()).unwrap();
        let c1 = sep.marginals()[1]
            .centroid(&sep.marginals()[1].domain())
            .unwrap();
        for z in p.materialize() {
            assert_eq!(z[1], c1);
            assert!((z[2] - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let sep = SeparableDensity::new(vec![Density1D::uniform(0.0, 1.0).unwrap()]).unwrap();
        assert!(matches!(
            build_product(&sep, &[2, 2], &SolverConfig::default()),
            Err(CvtError::DomainMismatch(_))
        ));
    }

    #[test]
    fn solver_errors_carry_dimension() {
        let sep = SeparableDensity::new(vec![
            Density1D::uniform(0.0, 1.0).unwrap(),
            Density1D::gaussian(0.0, 1.0, -1.0, 1.0).unwrap(),
        ])
        .unwrap();
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::lloyd()
        };
        match build_product(&sep, &[1, 6], &cfg) {
            Err(CvtError::InDimension { dim, .. }) => assert_eq!(dim, 1),
            other => panic!("{other:?}"),
        }
    }
}
