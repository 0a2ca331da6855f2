//! Atomistic relaxation and comparison with the GSFE minimizer at fixed
//! coupling strength.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use super::continuum::DerivedContinuum;
use super::potential::{PairPotential, Potential};
use super::system::AtomisticSystem;
use crate::error::{Error, Result};
use crate::gsfe::{DisplacementField, Grid, GsfeFunctional, StackingPeriod};
use crate::lbfgs::{self, LineSearch, MinimizeOptions, Objective, Termination};
use crate::params::lattice_counts_for_theta;

/// Total energy of the flat state with the rigid-translation mode projected
/// out of the gradient. Inadmissible states evaluate to infinity.
struct GaugedObjective<'a> {
    system: &'a AtomisticSystem,
}

impl Objective for GaugedObjective<'_> {
    fn dimension(&self) -> usize {
        self.system.dimension()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.system.energy_of(x).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        if self.system.gradient_of(x, grad).is_err() {
            grad.iter_mut().for_each(|g| *g = f64::NAN);
            return;
        }
        remove_mean(grad);
    }
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomisticRelaxation {
    /// The system at the relaxed displacements, mean displacement zero.
    pub system: AtomisticSystem,
    pub energy: f64,
    /// Max-norm of the gauge-projected gradient.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Energy after every accepted step.
    pub trace: Vec<f64>,
}

/// Default options for atomistic relaxations: strong Wolfe line search and a
/// gradient tolerance of `1e-12 kappa_tilde`.
pub fn atomistic_options(kappa_tilde: f64) -> MinimizeOptions {
    MinimizeOptions {
        tolerance: 1e-12 * kappa_tilde,
        line_search: LineSearch::StrongWolfe,
        ..MinimizeOptions::default()
    }
}

/// Minimizes the total energy over both layers with the mean displacement of
/// all atoms held at zero.
pub fn relax_atomistic(
    system: &AtomisticSystem,
    opts: &MinimizeOptions,
) -> Result<AtomisticRelaxation> {
    let mut x0 = system.state();
    remove_mean(&mut x0);
    system.energy_of(&x0)?;
    let min = lbfgs::minimize(&GaugedObjective { system }, &x0, opts)?;
    let converged = min.converged();
    let mut x = min.x;
    remove_mean(&mut x);
    let mut relaxed = system.clone();
    relaxed.set_state(&x)?;
    let energy = relaxed.energy()?;
    Ok(AtomisticRelaxation {
        system: relaxed,
        energy,
        gradient_norm: min.gradient_norm,
        iterations: min.iterations,
        converged,
        termination: min.termination,
        trace: min.trace,
    })
}

/// Relative displacement `(U1 - U2) / sqrt(2)` at the layer-1 sites, with
/// layer 2 interpolated linearly (and periodically) between its own sites.
pub fn relative_displacement(system: &AtomisticSystem) -> Vec<f64> {
    let (m, n) = system.counts();
    let spacing = 1.0 - system.theta();
    (0..m)
        .map(|i| {
            let t = i as f64 / spacing;
            let k = libm::floor(t);
            let frac = t - k;
            let k = k as usize;
            let u2 = system.layer2[k % n] * (1.0 - frac) + system.layer2[(k + 1) % n] * frac;
            (system.layer1[i] - u2) / SQRT_2
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonOptions {
    /// Tabulation points per period for the sinusoid fit.
    pub fit_samples: usize,
    /// Lower bound on GSFE grid points; the grid is a multiple of `M` so that
    /// layer-1 sites are grid points.
    pub min_grid_points: usize,
    pub max_iterations: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            fit_samples: 256,
            min_grid_points: 512,
            max_iterations: 20_000,
        }
    }
}

/// One row of the atomistic-to-continuum comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub theta: f64,
    pub epsilon: f64,
    /// Coupling strength realized by the rescaled interlayer potential.
    pub eta: f64,
    /// Layer-1 atom count `M`.
    pub atoms: usize,
    /// Root-mean-square difference of the two relative-displacement profiles
    /// at the layer-1 sites.
    pub l2_error: f64,
    /// `|E_atomistic / v0_tilde - E_gsfe|` after removing the zero-strain and
    /// mean-stacking constants from the atomistic energy.
    pub energy_gap: f64,
    pub atomistic_energy: f64,
    pub continuum_energy: f64,
    pub kappa_tilde: f64,
    pub v0_tilde: f64,
    /// Relative displacement of the relaxed atomistic model at layer-1 sites.
    pub atomistic_profile: Vec<f64>,
    pub atomistic_iterations: usize,
    /// GSFE minimizer sampled at the same sites.
    pub continuum_profile: Vec<f64>,
    pub converged: bool,
}

/// Rescales `inter` so that the continuum limit of the pair `(intra, inter)`
/// at mismatch `theta` has coupling strength `eta`, i.e. a fundamental
/// stacking amplitude of `eta^2 epsilon^2 kappa_tilde`. Also returns the
/// continuum parameters of the rescaled pair.
pub fn inter_for_eta(
    intra: &Potential,
    inter: &Potential,
    theta: f64,
    eta: f64,
    fit_samples: usize,
) -> Result<(Potential, DerivedContinuum)> {
    lattice_counts_for_theta(theta)?;
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "coupling strength must be non-negative and finite",
        });
    }
    let epsilon = theta / (1.0 - theta);
    let base = DerivedContinuum::derive(intra, inter, theta, fit_samples)?;
    if eta > 0.0 && !(base.v0_tilde > 0.0) {
        return Err(Error::InvalidPotential {
            reason: "interlayer potential has no attractive fundamental stacking mode",
            at: 0.0,
        });
    }
    let scale = if eta > 0.0 {
        eta * eta * epsilon * epsilon * base.kappa_tilde / base.v0_tilde
    } else {
        0.0
    };
    let inter = inter.scaled(scale);
    let derived = DerivedContinuum::derive(intra, &inter, theta, fit_samples)?;
    Ok((inter, derived))
}

/// Relaxes the atomistic model and the GSFE model it reduces to, for one
/// commensurate `theta` at coupling strength `eta`.
///
/// The interlayer potential is rescaled so that the lattice-summed stacking
/// energy has fundamental amplitude `eta^2 epsilon^2 kappa_tilde`.
pub fn compare_at(
    theta: f64,
    eta: f64,
    intra: &Potential,
    inter: &Potential,
    opts: &ComparisonOptions,
) -> Result<ComparisonRow> {
    let (m, _) = lattice_counts_for_theta(theta)?;
    let epsilon = theta / (1.0 - theta);
    let (inter, derived) = inter_for_eta(intra, inter, theta, eta, opts.fit_samples)?;

    let system = AtomisticSystem::new(theta, *intra, inter)?;
    let atom_opts = MinimizeOptions {
        max_iterations: opts.max_iterations,
        ..atomistic_options(derived.kappa_tilde)
    };
    let relaxed = relax_atomistic(&system, &atom_opts)?;
    let atomistic_profile = relative_displacement(&relaxed.system);

    let refine = opts.min_grid_points.div_ceil(m).max(1);
    let grid = Grid::new(m * refine, 1.0)?;
    let (continuum_profile, continuum_energy, gsfe_converged) = if eta > 0.0 {
        let functional = GsfeFunctional::nondimensional(eta, theta, grid, StackingPeriod::Layer2)?;
        let gsfe_opts = MinimizeOptions {
            max_iterations: opts.max_iterations,
            ..functional.default_options()
        };
        let r = functional.relax(&DisplacementField::zeros(grid), &gsfe_opts)?;
        let profile = (0..m).map(|i| r.field.values[i * refine]).collect();
        (profile, r.energy, r.converged)
    } else {
        (vec![0.0; m], 0.0, true)
    };

    let l2_error = libm::sqrt(
        atomistic_profile
            .iter()
            .zip(&continuum_profile)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / m as f64,
    );
    let offset = 2.0 * derived.cauchy_born_offset + derived.fit.mean;
    let energy_gap = if eta > 0.0 {
        ((relaxed.energy - offset) / derived.v0_tilde - continuum_energy).abs()
    } else {
        (relaxed.energy - offset).abs()
    };

    Ok(ComparisonRow {
        theta,
        epsilon,
        eta: if eta > 0.0 { derived.eta(epsilon) } else { 0.0 },
        atoms: m,
        l2_error,
        energy_gap,
        atomistic_energy: relaxed.energy,
        continuum_energy,
        kappa_tilde: derived.kappa_tilde,
        v0_tilde: derived.v0_tilde,
        atomistic_profile,
        atomistic_iterations: relaxed.iterations,
        continuum_profile,
        converged: relaxed.converged && gsfe_converged,
    })
}

/// [`compare_at`] for each mismatch in `thetas`.
pub fn continuum_comparison(
    thetas: &[f64],
    eta: f64,
    intra: &Potential,
    inter: &Potential,
    opts: &ComparisonOptions,
) -> Result<Vec<ComparisonRow>> {
    thetas
        .iter()
        .map(|theta| compare_at(*theta, eta, intra, inter, opts))
        .collect()
}

/// Interlayer potential used by default in the convergence study.
///
/// A Gaussian of width 0.3: wide enough that the second stacking harmonic is
/// about `1e-3` of the fundamental, narrow enough that the mean stacking
/// energy (which favours compressing either layer) stays a few times the
/// fundamental.
pub fn default_inter_potential() -> Potential {
    Potential::gaussian(1.0, 0.3)
}

/// Sum of [`PairPotential::value`] over a displacement-free chain, used to
/// report absolute atomistic energies.
pub fn chain_energy_per_atom<P: PairPotential + ?Sized>(potential: &P) -> f64 {
    let reach = libm::floor(potential.cutoff()) as i64;
    (-reach..=reach)
        .filter(|j| *j != 0)
        .map(|j| potential.value(j as f64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncoupled_chain_stays_at_ground_state() {
        let system = AtomisticSystem::new(
            0.1,
            Potential::harmonic_nearest_neighbor(),
            Potential::Zero { cutoff: 5.0 },
        )
        .unwrap();
        let r = relax_atomistic(&system, &atomistic_options(2.0)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn relaxation_keeps_gauge_and_descends() {
        let system = AtomisticSystem::new(
            0.1,
            Potential::harmonic_nearest_neighbor(),
            Potential::gaussian(0.01, 0.3),
        )
        .unwrap();
        let e0 = system.energy().unwrap();
        let r = relax_atomistic(&system, &atomistic_options(2.0)).unwrap();
        assert!(r.converged, "{:?}", r.termination);
        assert!(r.energy < e0);
        let state = r.system.state();
        assert!(state.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn relative_displacement_of_rigid_offset() {
        let system = AtomisticSystem::new(
            0.1,
            Potential::harmonic_nearest_neighbor(),
            Potential::Zero { cutoff: 1.0 },
        )
        .unwrap()
        .with_displacements(vec![0.1; 9], vec![-0.1; 10])
        .unwrap();
        for u in relative_displacement(&system) {
            assert!((u - 0.2 / SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn eta_zero_comparison_is_trivial() {
        let row = compare_at(
            0.1,
            0.0,
            &Potential::harmonic_nearest_neighbor(),
            &default_inter_potential(),
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert_eq!(row.l2_error, 0.0);
        assert!(row.energy_gap < 1e-15);
        assert!(row.converged);
    }

    #[test]
    fn rescaled_potential_realizes_requested_eta() {
        let row = compare_at(
            0.1,
            1.0,
            &Potential::harmonic_nearest_neighbor(),
            &default_inter_potential(),
            &ComparisonOptions::default(),
        )
        .unwrap();
        assert!((row.eta - 1.0).abs() < 1e-12);
        assert!(row.converged);
    }

    #[test]
    fn chain_energy_matches_cauchy_born_offset() {
        let lj = Potential::lennard_jones(1.0);
        let d = DerivedContinuum::derive(&lj, &default_inter_potential(), 0.1, 64).unwrap();
        assert_eq!(chain_energy_per_atom(&lj), d.cauchy_born_offset);
    }
}
