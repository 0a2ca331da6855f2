//! Bilayer chain model: pair potentials, the periodic supercell, its
//! continuum limit and the comparison with the GSFE model.

pub mod comparison;
pub mod continuum;
pub mod potential;
pub mod system;

pub use comparison::{
    atomistic_options, compare_at, continuum_comparison, default_inter_potential, inter_for_eta,
    relative_displacement, relax_atomistic, AtomisticRelaxation, ComparisonOptions, ComparisonRow,
};
pub use continuum::{
    cauchy_born_density, fit_sinusoid, stacking_potential, stiffness, tabulate_stacking,
    DerivedContinuum, SinusoidFit, TabulatedPeriodic,
};
pub use potential::{validate_potential, PairPotential, Potential};
pub use system::{atomistic_gradient, inter_energy, intra_energy, AtomisticSystem};
