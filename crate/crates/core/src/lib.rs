//! Centroidal Voronoi tessellations (CVTs) built from one-dimensional pieces.
//!
//! A 1D CVT is computed per axis ([`cvt1d`]) and the axes are combined into a
//! tensor-product tessellation of a box ([`product`]). When the density is a
//! product of its marginals, the result is itself a CVT of the box. The
//! [`energy`] and [`oracle`] modules check that claim numerically by routes
//! that do not depend on it.

pub mod cvt1d;
pub mod density;
pub mod energy;
pub mod error;
pub mod oracle;
pub mod product;
pub mod quadrature;

pub use cvt1d::{
    energy_1d, lloyd_step, solve, solve_lloyd, solve_newton, Cvt1D, Method, Solution, SolverConfig,
};
pub use density::{Density1D, DensityKind, Interval, Region, SeparableDensity, Table};
pub use energy::{
    centroidality_residual, energy_cellwise, energy_grid_quadrature, energy_monte_carlo,
    energy_separable, EnergyMethod, EnergyRecord, EnergyReport,
};
pub use error::{CvtError, Result};
pub use product::{build_product, build_product_with_stats, FactorStats, IndexMatrix, ProductCvt};
