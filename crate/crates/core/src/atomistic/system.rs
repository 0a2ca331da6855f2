//! Atomistic bilayer energy with periodic images.
//!
//! Lengths are in units of the layer-1 lattice constant. Layer-1 atom `i`
//! sits at `i + U1[i]`, layer-2 atom `k` at `(1 - theta) k + U2[k]`; both
//! layers repeat with the supercell length `M`. Energies are averages per
//! atom of each layer:
//!
//! ```text
//! E_intra = 1/M sum_i sum_j W_intra(j + U1[i+j] - U1[i])
//!         + 1/N sum_k sum_j W_intra(j + (U2[k+j] - U2[k]) / (1 - theta))
//! E_inter = 1/M sum_i sum_k W_inter(i + U1[i] - (1 - theta) k - U2[k])
//! ```
//!
//! where a pair is included when its unrelaxed separation is within the
//! potential's cutoff.

use alloc::vec;
use alloc::vec::Vec;

use super::potential::{PairPotential, Potential};
use crate::error::{Error, Result};
use crate::params::lattice_counts_for_theta;

/// Neighbour separation change, in lattice spacings, that counts as chain
/// crossing.
pub const CROSSING_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomisticSystem {
    theta: f64,
    cells: usize,
    m: usize,
    n: usize,
    /// Layer-1 displacements `U1`, length `M`.
    pub layer1: Vec<f64>,
    /// Layer-2 displacements `U2`, length `N = M + cells`.
    pub layer2: Vec<f64>,
    intra: Potential,
    inter: Potential,
    image_range: usize,
}

impl AtomisticSystem {
    /// One undisplaced moire supercell.
    pub fn new(theta: f64, intra: Potential, inter: Potential) -> Result<Self> {
        Self::with_cells(theta, 1, intra, inter)
    }

    /// An undisplaced supercell spanning `cells` moire periods.
    pub fn with_cells(
        theta: f64,
        cells: usize,
        intra: Potential,
        inter: Potential,
    ) -> Result<Self> {
        let (m1, n1) = lattice_counts_for_theta(theta)?;
        if cells == 0 {
            return Err(Error::InvalidParameter {
                name: "cells",
                value: 0.0,
                reason: "at least one moire cell is required",
            });
        }
        let intra = intra.validated()?;
        let inter = inter.validated()?;
        let image_range = libm::ceil(intra.cutoff().max(inter.cutoff())) as usize;
        let (m, n) = (m1 * cells, n1 * cells);
        Ok(Self {
            theta,
            cells,
            m,
            n,
            layer1: vec![0.0; m],
            layer2: vec![0.0; n],
            intra,
            inter,
            image_range,
        })
    }

    pub fn with_displacements(mut self, layer1: Vec<f64>, layer2: Vec<f64>) -> Result<Self> {
        if layer1.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: layer1.len(),
            });
        }
        if layer2.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: layer2.len(),
            });
        }
        self.layer1 = layer1;
        self.layer2 = layer2;
        Ok(self)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Atom counts `(M, N)` of the two layers.
    pub fn counts(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Number of displacement unknowns `M + N`.
    pub fn dimension(&self) -> usize {
        self.m + self.n
    }

    /// Largest lattice-sum offset, at least the cutoff of both potentials.
    pub fn image_range(&self) -> usize {
        self.image_range
    }

    pub fn intra(&self) -> &Potential {
        &self.intra
    }

    pub fn inter(&self) -> &Potential {
        &self.inter
    }

    pub fn with_inter(mut self, inter: Potential) -> Result<Self> {
        self.inter = inter.validated()?;
        self.image_range = libm::ceil(self.intra.cutoff().max(self.inter.cutoff())) as usize;
        Ok(self)
    }

    /// Supercell length in layer-1 lattice constants.
    pub fn length(&self) -> f64 {
        self.m as f64
    }

    /// `layer1` followed by `layer2`.
    pub fn state(&self) -> Vec<f64> {
        let mut x = self.layer1.clone();
        x.extend_from_slice(&self.layer2);
        x
    }

    pub fn set_state(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        self.layer1.copy_from_slice(&x[..self.m]);
        self.layer2.copy_from_slice(&x[self.m..]);
        Ok(())
    }

    fn split<'a>(&self, x: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(x.split_at(self.m))
    }

    fn check_crossing(&self, u1: &[f64], u2: &[f64]) -> Result<()> {
        let spacing2 = 1.0 - self.theta;
        for (layer, u, spacing) in [(1u8, u1, 1.0), (2u8, u2, spacing2)] {
            let len = u.len();
            for i in 0..len {
                let change = (u[(i + 1) % len] - u[i]) / spacing;
                if !(change.abs() < CROSSING_LIMIT) {
                    return Err(Error::ChainCrossing {
                        layer,
                        index: i,
                        separation: 1.0 + change,
                    });
                }
            }
        }
        Ok(())
    }

    fn intra_offsets(&self) -> impl Iterator<Item = isize> {
        let reach = libm::floor(self.intra.cutoff()) as isize;
        (-reach..=reach).filter(|j| *j != 0)
    }

    /// Layer-2 images `k` interacting with layer-1 atom `i`.
    fn inter_range(&self, i: usize) -> core::ops::RangeInclusive<isize> {
        let spacing = 1.0 - self.theta;
        let c = self.inter.cutoff();
        let lo = libm::ceil((i as f64 - c) / spacing) as isize;
        let hi = libm::floor((i as f64 + c) / spacing) as isize;
        lo..=hi
    }

    fn layer_intra(&self, u: &[f64], scale: f64) -> f64 {
        let len = u.len() as isize;
        let mut total = 0.0;
        for i in 0..len {
            for j in self.intra_offsets() {
                let other = u[(i + j).rem_euclid(len) as usize];
                total += self.intra.value(j as f64 + (other - u[i as usize]) / scale);
            }
        }
        total / len as f64
    }

    fn intra_of(&self, u1: &[f64], u2: &[f64]) -> f64 {
        self.layer_intra(u1, 1.0) + self.layer_intra(u2, 1.0 - self.theta)
    }

    fn inter_of(&self, u1: &[f64], u2: &[f64]) -> f64 {
        let spacing = 1.0 - self.theta;
        let n = self.n as isize;
        let mut total = 0.0;
        for (i, ui) in u1.iter().enumerate() {
            for k in self.inter_range(i) {
                let uk = u2[k.rem_euclid(n) as usize];
                total += self.inter.value(i as f64 + ui - spacing * k as f64 - uk);
            }
        }
        total / self.m as f64
    }

    /// Total energy of the flat state `x = [U1 | U2]`.
    pub fn energy_of(&self, x: &[f64]) -> Result<f64> {
        let (u1, u2) = self.split(x)?;
        self.check_crossing(u1, u2)?;
        Ok(self.intra_of(u1, u2) + self.inter_of(u1, u2))
    }

    /// Exact gradient of [`AtomisticSystem::energy_of`] with respect to the
    /// flat state.
    pub fn gradient_of(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        let (u1, u2) = self.split(x)?;
        self.check_crossing(u1, u2)?;
        if grad.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: grad.len(),
            });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (g1, g2) = grad.split_at_mut(self.m);
        self.layer_intra_gradient(u1, 1.0, g1);
        self.layer_intra_gradient(u2, 1.0 - self.theta, g2);

        let spacing = 1.0 - self.theta;
        let n = self.n as isize;
        let weight = 1.0 / self.m as f64;
        for (i, ui) in u1.iter().enumerate() {
            for k in self.inter_range(i) {
                let kk = k.rem_euclid(n) as usize;
                let force = weight * self.inter.d1(i as f64 + ui - spacing * k as f64 - u2[kk]);
                g1[i] += force;
                g2[kk] -= force;
            }
        }
        Ok(())
    }

    fn layer_intra_gradient(&self, u: &[f64], scale: f64, grad: &mut [f64]) {
        let len = u.len() as isize;
        let weight = 1.0 / (len as f64 * scale);
        for i in 0..len {
            for j in self.intra_offsets() {
                let other = (i + j).rem_euclid(len) as usize;
                let force = weight * self.intra.d1(j as f64 + (u[other] - u[i as usize]) / scale);
                grad[other] += force;
                grad[i as usize] -= force;
            }
        }
    }

    pub fn intra_energy(&self) -> Result<f64> {
        self.check_crossing(&self.layer1, &self.layer2)?;
        Ok(self.intra_of(&self.layer1, &self.layer2))
    }

    pub fn inter_energy(&self) -> Result<f64> {
        self.check_crossing(&self.layer1, &self.layer2)?;
        Ok(self.inter_of(&self.layer1, &self.layer2))
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(self.intra_energy()? + self.inter_energy()?)
    }

    /// Gradient with respect to `(U1, U2)`.
    pub fn gradient(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.state();
        let mut grad = vec![0.0; x.len()];
        self.gradient_of(&x, &mut grad)?;
        let g2 = grad.split_off(self.m);
        Ok((grad, g2))
    }

    /// Unrelaxed disregistry `i mod (1 - theta)` at each layer-1 atom.
    pub fn unrelaxed_disregistry(&self) -> Vec<f64> {
        let spacing = 1.0 - self.theta;
        (0..self.m)
            .map(|i| crate::params::wrap(i as f64, spacing))
            .collect()
    }
}

pub fn intra_energy(system: &AtomisticSystem) -> Result<f64> {
    system.intra_energy()
}

pub fn inter_energy(system: &AtomisticSystem) -> Result<f64> {
    system.inter_energy()
}

pub fn atomistic_gradient(system: &AtomisticSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    system.gradient()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomistic::continuum::stacking_potential;
    use crate::lbfgs::{check_gradient, FnObjective};

    fn harmonic() -> Potential {
        Potential::harmonic_nearest_neighbor()
    }

    fn zero() -> Potential {
        Potential::Zero { cutoff: 1.0 }
    }

    fn wobble(len: usize, amplitude: f64, phase: f64) -> Vec<f64> {
        (0..len)
            .map(|i| amplitude * libm::sin(1.3 * i as f64 + phase) * libm::cos(0.7 * i as f64))
            .collect()
    }

    #[test]
    fn layer_sizes_follow_lattice_counts() {
        let s = AtomisticSystem::new(1.0 / 50.0, harmonic(), zero()).unwrap();
        assert_eq!(s.counts(), (49, 50));
        assert!(s.image_range() as f64 >= 1.5);
        let s = AtomisticSystem::with_cells(0.1, 2, harmonic(), zero()).unwrap();
        assert_eq!(s.counts(), (18, 20));
        assert!(AtomisticSystem::new(0.3, harmonic(), zero()).is_err());
    }

    #[test]
    fn harmonic_ground_state_has_zero_energy() {
        let s = AtomisticSystem::new(1.0 / 50.0, harmonic(), zero()).unwrap();
        assert_eq!(s.intra_energy().unwrap(), 0.0);
        let (g1, g2) = s.gradient().unwrap();
        assert!(g1.iter().chain(&g2).all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn lennard_jones_energy_per_atom_is_size_independent() {
        let lj = Potential::lennard_jones(1.0);
        let a = AtomisticSystem::new(1.0 / 50.0, lj, zero()).unwrap();
        let b = AtomisticSystem::with_cells(1.0 / 50.0, 2, lj, zero()).unwrap();
        // Oracle: direct sum over neighbours of one atom in each layer.
        let per_atom: f64 = (1..=5).map(|j| 2.0 * lj.value(j as f64)).sum();
        assert!((a.intra_energy().unwrap() - 2.0 * per_atom).abs() < 1e-12);
        assert!((a.intra_energy().unwrap() - b.intra_energy().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn uniform_shift_of_one_layer_leaves_intra_unchanged() {
        let s = AtomisticSystem::new(0.1, Potential::lennard_jones(1.0), zero()).unwrap();
        let u1 = wobble(9, 0.05, 0.0);
        let u2 = wobble(10, 0.05, 1.0);
        let base = s
            .clone()
            .with_displacements(u1.clone(), u2.clone())
            .unwrap();
        let shifted = s
            .with_displacements(u1.iter().map(|u| u + 0.25).collect(), u2)
            .unwrap();
        let (e0, e1) = (
            base.intra_energy().unwrap(),
            shifted.intra_energy().unwrap(),
        );
        assert!((e0 - e1).abs() < 1e-14 * e0.abs());
    }

    #[test]
    fn inter_energy_matches_stacking_potential() {
        let theta = 1.0 / 50.0;
        let g = Potential::gaussian(1.0, 0.1);
        let s = AtomisticSystem::new(theta, harmonic(), g).unwrap();
        let oracle: f64 = (0..49)
            .map(|i| stacking_potential(&g, theta, i as f64))
            .sum::<f64>()
            / 49.0;
        assert!((s.inter_energy().unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn common_shift_leaves_inter_unchanged() {
        let g = Potential::gaussian(1.0, 0.3);
        let s = AtomisticSystem::new(0.1, harmonic(), g).unwrap();
        let u1 = wobble(9, 0.05, 0.0);
        let u2 = wobble(10, 0.05, 1.0);
        let base = s
            .clone()
            .with_displacements(u1.clone(), u2.clone())
            .unwrap();
        let shifted = s
            .with_displacements(
                u1.iter().map(|u| u + 0.125).collect(),
                u2.iter().map(|u| u + 0.125).collect(),
            )
            .unwrap();
        let (e0, e1) = (base.energy().unwrap(), shifted.energy().unwrap());
        assert!((e0 - e1).abs() < 1e-12 * e0.abs().max(1.0));
    }

    #[test]
    fn zero_inter_potential_gives_zero_energy() {
        let s = AtomisticSystem::new(0.1, harmonic(), Potential::Zero { cutoff: 5.0 })
            .unwrap()
            .with_displacements(wobble(9, 0.1, 0.0), wobble(10, 0.1, 2.0))
            .unwrap();
        assert_eq!(s.inter_energy().unwrap(), 0.0);
    }

    #[test]
    fn rigid_shift_of_layer1_has_zero_intra_gradient() {
        let s = AtomisticSystem::new(0.1, Potential::lennard_jones(1.0), zero())
            .unwrap()
            .with_displacements(vec![0.2; 9], vec![0.0; 10])
            .unwrap();
        let (g1, g2) = s.gradient().unwrap();
        assert!(g1.iter().chain(&g2).all(|g| g.abs() < 1e-13));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = AtomisticSystem::new(
            1.0 / 11.0,
            Potential::lennard_jones(1.0),
            Potential::gaussian(0.5, 0.3),
        )
        .unwrap();
        let x: Vec<f64> = wobble(10, 0.03, 0.3)
            .into_iter()
            .chain(wobble(11, 0.03, 2.1))
            .collect();
        let obj = FnObjective::new(
            s.dimension(),
            |x: &[f64]| s.energy_of(x).unwrap(),
            |x: &[f64], g: &mut [f64]| s.gradient_of(x, g).unwrap(),
        );
        assert!(check_gradient(&obj, &x, 1e-7).unwrap() < 1e-5);
    }

    #[test]
    fn chain_crossing_is_detected() {
        let mut u1 = vec![0.0; 9];
        u1[3] = 0.6;
        let s = AtomisticSystem::new(0.1, harmonic(), zero())
            .unwrap()
            .with_displacements(u1, vec![0.0; 10])
            .unwrap();
        assert!(matches!(
            s.energy(),
            Err(Error::ChainCrossing { layer: 1, .. })
        ));
        assert!(s.gradient().is_err());
    }
}
