//! Mechanical relaxation of one-dimensional bilayer moire chains.
//!
//! Two models are provided. The continuum GSFE model couples linear
//! elasticity to a sinusoidal stacking energy and is minimized on a periodic
//! grid ([`gsfe`]). The atomistic model sums pair potentials over a
//! commensurate supercell with periodic images ([`atomistic`]); its
//! Cauchy-Born stiffness and lattice-summed stacking energy define the
//! continuum model it reduces to when the moire period grows at fixed
//! coupling strength `eta`.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod atomistic;
pub mod error;
pub mod gsfe;
pub mod lbfgs;
pub mod params;

pub use error::{Error, Result};
pub use gsfe::{
    discrete_energy, discrete_gradient, relax, relaxed_disregistry, DisplacementField,
    DisregistryProfile, Grid, GsfeFunctional, RelaxationResult, StackingPeriod, Stencil,
    DEFAULT_GRID_POINTS, MIN_GRID_POINTS,
};
pub use lbfgs::{
    check_gradient, minimize, LineSearch, MinimizeOptions, Minimum, Objective, Termination,
};
pub use params::{
    dimensionless_groups, disregistry0, lattice_counts, lattice_counts_for_theta, moire_period,
    params_from_eta, DimensionlessGroups, ModelParams, StackingForm, StackingPotentialSpec,
};
