//! Discretized GSFE functional on a periodic grid.
//!
//! The energy of the relative displacement `u` is
//!
//! ```text
//! E(u) = sum_n [ k/2 ((u[n+1] - u[n-1]) / (2 dx))^2
//!              - 2 v0 cos(2 pi (r[n] + sqrt(2) u[n]) / p) ] dx
//! ```
//!
//! with periodic indices, where `r[n]` is the unrelaxed disregistry at grid
//! point `n` and `p` the stacking period. The same functional serves the
//! dimensional model (`k = kappa`, `v0 = V0`, `p = (1 - theta) a`, cell length
//! `a_M`) and its nondimensionalization (`k = 1 / eta^2`, `v0 = 1`, cell
//! length 1).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lbfgs::{self, MinimizeOptions, Objective, Termination};
use crate::params::{disregistry0, moire_period, wrap, ModelParams};

/// Smallest grid for which the central-difference stencil is meaningful.
pub const MIN_GRID_POINTS: usize = 8;
/// Default number of grid points per moire cell.
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Default gradient tolerance in units of the stiffness coefficient.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-10;

const LENGTH_MATCH: f64 = 1e-12;

/// Uniform periodic grid `x[n] = origin + n dx`, `n = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    dx: f64,
    domain_length: f64,
    origin: f64,
}

impl Grid {
    pub fn new(n_points: usize, domain_length: f64) -> Result<Self> {
        if n_points < MIN_GRID_POINTS {
            return Err(Error::InvalidParameter {
                name: "n_points",
                value: n_points as f64,
                reason: "at least 8 grid points are required",
            });
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "domain_length",
                value: domain_length,
                reason: "domain length must be positive and finite",
            });
        }
        Ok(Self {
            n_points,
            dx: domain_length / n_points as f64,
            domain_length,
            origin: 0.0,
        })
    }

    /// Grid spanning one moire cell of `params`.
    pub fn moire(n_points: usize, params: &ModelParams) -> Result<Self> {
        Self::new(n_points, moire_period(params))
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn x(&self, n: usize) -> f64 {
        self.origin + n as f64 * self.dx
    }
}

/// Samples of the relative displacement `u_-` on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Zero field plus uniform noise of the given amplitude from a seeded
    /// generator.
    pub fn perturbed(grid: Grid, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.n_points())
            .map(|_| amplitude * rng.gen_range(-1.0..1.0))
            .collect();
        Self { grid, values }
    }

    /// Value at any integer index, wrapped periodically.
    pub fn value(&self, n: isize) -> f64 {
        let len = self.values.len() as isize;
        self.values[n.rem_euclid(len) as usize]
    }

    /// Max-norm of the samples.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Finite-difference approximation of `du/dx` in the elastic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(u[n+1] - u[n-1]) / (2 dx)`.
    #[default]
    Central,
    /// `(u[n+1] - u[n]) / dx`.
    Forward,
}

/// Stacking period used by the nondimensional functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackingPeriod {
    /// Period `1 - theta`: exactly the nondimensionalization of the
    /// dimensional functional.
    Layer2,
    /// Period 1: the small-`theta` simplification.
    Unit,
}

/// A discretized GSFE energy with its analytic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GsfeFunctional {
    grid: Grid,
    stiffness: f64,
    amplitude: f64,
    period: f64,
    registry: Vec<f64>,
    stencil: Stencil,
}

impl GsfeFunctional {
    /// The dimensional functional of `params` on `grid`, which must span one
    /// moire cell.
    pub fn dimensional(params: &ModelParams, grid: Grid) -> Result<Self> {
        let expected = moire_period(params);
        if (grid.domain_length() - expected).abs() > LENGTH_MATCH * expected {
            return Err(Error::GridMismatch {
                domain_length: grid.domain_length(),
                expected,
            });
        }
        let registry = (0..grid.n_points())
            .map(|n| disregistry0(grid.x(n), params))
            .collect();
        Ok(Self {
            grid,
            stiffness: params.kappa(),
            amplitude: params.v0(),
            period: params.stacking_period(),
            registry,
            stencil: Stencil::Central,
        })
    }

    /// The energy divided by `a_M V0` as a function of `U = u / a` on the unit
    /// cell, for coupling strength `eta > 0`.
    pub fn nondimensional(
        eta: f64,
        theta: f64,
        grid: Grid,
        period: StackingPeriod,
    ) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "the nondimensional functional needs eta > 0",
            });
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "lattice mismatch must lie in (0, 1)",
            });
        }
        if (grid.domain_length() - 1.0).abs() > LENGTH_MATCH {
            return Err(Error::GridMismatch {
                domain_length: grid.domain_length(),
                expected: 1.0,
            });
        }
        let period = match period {
            StackingPeriod::Layer2 => 1.0 - theta,
            StackingPeriod::Unit => 1.0,
        };
        let registry = (0..grid.n_points())
            .map(|n| period * wrap(grid.x(n), 1.0))
            .collect();
        Ok(Self {
            grid,
            stiffness: 1.0 / (eta * eta),
            amplitude: 1.0,
            period,
            registry,
            stencil: Stencil::Central,
        })
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Unrelaxed disregistry at each grid point.
    pub fn registry(&self) -> &[f64] {
        &self.registry
    }

    /// Gradient tolerance `1e-10 k` used by [`GsfeFunctional::relax`] by
    /// default.
    pub fn default_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            tolerance: DEFAULT_RELATIVE_TOLERANCE * self.stiffness,
            ..MinimizeOptions::default()
        }
    }

    fn phase(&self, n: usize, u: f64) -> f64 {
        2.0 * PI * (self.registry[n] + SQRT_2 * u) / self.period
    }

    /// Elastic and stacking parts of the energy.
    pub fn energy_parts(&self, u: &[f64]) -> (f64, f64) {
        let n = u.len();
        let dx = self.grid.dx();
        let mut elastic = 0.0;
        let mut stacking = 0.0;
        for i in 0..n {
            let slope = match self.stencil {
                Stencil::Central => (u[(i + 1) % n] - u[(i + n - 1) % n]) / (2.0 * dx),
                Stencil::Forward => (u[(i + 1) % n] - u[i]) / dx,
            };
            elastic += 0.5 * self.stiffness * slope * slope * dx;
            stacking -= 2.0 * self.amplitude * libm::cos(self.phase(i, u[i])) * dx;
        }
        (elastic, stacking)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let (elastic, stacking) = self.energy_parts(u);
        elastic + stacking
    }

    /// Exact gradient of [`GsfeFunctional::energy`].
    pub fn gradient_into(&self, u: &[f64], grad: &mut [f64]) {
        let n = u.len();
        let dx = self.grid.dx();
        let force = 4.0 * SQRT_2 * PI * self.amplitude / self.period * dx;
        for i in 0..n {
            let elastic = match self.stencil {
                Stencil::Central => {
                    self.stiffness / (4.0 * dx) * (2.0 * u[i] - u[(i + n - 2) % n] - u[(i + 2) % n])
                }
                Stencil::Forward => {
                    self.stiffness / dx * (2.0 * u[i] - u[(i + n - 1) % n] - u[(i + 1) % n])
                }
            };
            grad[i] = elastic + force * libm::sin(self.phase(i, u[i]));
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; u.len()];
        self.gradient_into(u, &mut grad);
        grad
    }

    fn check_field(&self, field: &DisplacementField) -> Result<()> {
        if (field.grid.domain_length() - self.grid.domain_length()).abs()
            > LENGTH_MATCH * self.grid.domain_length()
        {
            return Err(Error::GridMismatch {
                domain_length: field.grid.domain_length(),
                expected: self.grid.domain_length(),
            });
        }
        if field.values.len() != self.grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.n_points(),
                found: field.values.len(),
            });
        }
        Ok(())
    }

    /// Minimizes the energy with L-BFGS starting from `initial`.
    pub fn relax(
        &self,
        initial: &DisplacementField,
        opts: &MinimizeOptions,
    ) -> Result<RelaxationResult> {
        self.check_field(initial)?;
        let min = lbfgs::minimize(self, &initial.values, opts)?;
        Ok(RelaxationResult {
            converged: min.converged(),
            field: DisplacementField {
                grid: self.grid,
                values: min.x,
            },
            energy: min.f,
            gradient_norm: min.gradient_norm,
            iterations: min.iterations,
            termination: min.termination,
        })
    }
}

impl Objective for GsfeFunctional {
    fn dimension(&self) -> usize {
        self.grid.n_points()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.energy(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.gradient_into(x, grad)
    }
}

/// Outcome of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationResult {
    pub field: DisplacementField,
    pub energy: f64,
    /// Max-norm of the energy gradient at `field`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

/// Dimensional discrete energy of `field` under `params`.
pub fn discrete_energy(field: &DisplacementField, params: &ModelParams) -> Result<f64> {
    let functional = GsfeFunctional::dimensional(params, field.grid)?;
    functional.check_field(field)?;
    Ok(functional.energy(&field.values))
}

/// Gradient of [`discrete_energy`] with respect to each grid value.
pub fn discrete_gradient(field: &DisplacementField, params: &ModelParams) -> Result<Vec<f64>> {
    let functional = GsfeFunctional::dimensional(params, field.grid)?;
    functional.check_field(field)?;
    Ok(functional.gradient(&field.values))
}

/// Relaxes the dimensional functional from `initial`.
pub fn relax(
    initial: &DisplacementField,
    params: &ModelParams,
    opts: &MinimizeOptions,
) -> Result<RelaxationResult> {
    GsfeFunctional::dimensional(params, initial.grid)?.relax(initial, opts)
}

/// Relaxed disregistry sampled at the grid points plus the closing point of
/// the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DisregistryProfile {
    pub x: Vec<f64>,
    /// `theta x + sqrt(2) u`, without reduction to one stacking period.
    pub unreduced: Vec<f64>,
    /// `unreduced` reduced to `[0, (1 - theta) a)`.
    pub reduced: Vec<f64>,
    pub period: f64,
}

impl DisregistryProfile {
    /// `delta(a_M) - delta(0)`.
    pub fn winding(&self) -> f64 {
        self.unreduced[self.unreduced.len() - 1] - self.unreduced[0]
    }

    /// Fraction of grid points (closing point excluded) whose reduced
    /// disregistry lies within `tolerance` of perfect stacking.
    pub fn aligned_fraction(&self, tolerance: f64) -> f64 {
        let n = self.reduced.len() - 1;
        let aligned = self.reduced[..n]
            .iter()
            .filter(|d| d.min(self.period - **d) < tolerance)
            .count();
        aligned as f64 / n as f64
    }
}

pub fn relaxed_disregistry(field: &DisplacementField, params: &ModelParams) -> DisregistryProfile {
    let grid = field.grid;
    let period = params.stacking_period();
    let n = grid.n_points();
    let mut x = Vec::with_capacity(n + 1);
    let mut unreduced = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let xi = grid.x(i);
        x.push(xi);
        unreduced.push(params.theta() * xi + SQRT_2 * field.value(i as isize));
    }
    let reduced = unreduced.iter().map(|d| wrap(*d, period)).collect();
    DisregistryProfile {
        x,
        unreduced,
        reduced,
        period,
    }
}
