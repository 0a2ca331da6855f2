//! Continuum quantities derived from the pair potentials: Cauchy-Born
//! stiffness and the lattice-summed stacking energy with its sinusoidal fit.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::potential::PairPotential;
use crate::error::{Error, Result};

/// Smallest tabulation accepted by [`fit_sinusoid`].
pub const MIN_FIT_SAMPLES: usize = 64;

fn chain_offsets<P: PairPotential + ?Sized>(potential: &P) -> impl Iterator<Item = f64> {
    let reach = libm::floor(potential.cutoff()) as i64;
    (-reach..=reach).filter(|j| *j != 0).map(|j| j as f64)
}

/// Cauchy-Born energy density `sum_{j != 0} W(j (1 + z)) - sum_{j != 0} W(j)`,
/// over `0 < |j| <= cutoff`, so that the density vanishes at `z = 0`.
pub fn cauchy_born_density<P: PairPotential + ?Sized>(potential: &P, z: f64) -> f64 {
    chain_offsets(potential)
        .map(|j| potential.value(j * (1.0 + z)) - potential.value(j))
        .sum()
}

/// Second strain derivative of the Cauchy-Born density at zero strain,
/// `sum_{j != 0} j^2 W''(j)`.
pub fn stiffness<P: PairPotential + ?Sized>(potential: &P) -> Result<f64> {
    let kappa_tilde: f64 = chain_offsets(potential)
        .map(|j| j * j * potential.d2(j))
        .sum();
    if !(kappa_tilde > 0.0) {
        return Err(Error::DegenerateStiffness { kappa_tilde });
    }
    Ok(kappa_tilde)
}

/// Central second difference of [`cauchy_born_density`] at zero strain.
pub fn stiffness_finite_difference<P: PairPotential + ?Sized>(potential: &P, step: f64) -> f64 {
    let plus = cauchy_born_density(potential, step);
    let minus = cauchy_born_density(potential, -step);
    (plus + minus) / (step * step)
}

/// Stacking energy `sum_j W(z - (1 - theta) j)` over images within the
/// cutoff. Periodic in `z` with period `1 - theta`.
pub fn stacking_potential<P: PairPotential + ?Sized>(potential: &P, theta: f64, z: f64) -> f64 {
    let spacing = 1.0 - theta;
    let c = potential.cutoff();
    let lo = libm::ceil((z - c) / spacing) as i64;
    let hi = libm::floor((z + c) / spacing) as i64;
    (lo..=hi)
        .map(|j| potential.value(z - spacing * j as f64))
        .sum()
}

/// Samples of a periodic function on a uniform grid over one period,
/// `values[k]` at `z = k period / len`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPeriodic {
    pub period: f64,
    pub values: Vec<f64>,
}

impl TabulatedPeriodic {
    pub fn sample(period: f64, samples: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..samples)
            .map(|k| f(period * k as f64 / samples as f64))
            .collect();
        Self { period, values }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Tabulates [`stacking_potential`] over one period `1 - theta`.
pub fn tabulate_stacking<P: PairPotential + ?Sized>(
    potential: &P,
    theta: f64,
    samples: usize,
) -> TabulatedPeriodic {
    TabulatedPeriodic::sample(1.0 - theta, samples, |z| {
        stacking_potential(potential, theta, z)
    })
}

/// Fundamental-mode fit `mean - 2 v0_tilde cos(2 pi z / period) + b sin(...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub v0_tilde: f64,
    pub mean: f64,
    /// Coefficient of the fundamental sine; zero for even potentials.
    pub sine: f64,
    /// Max-norm of the samples minus the fit.
    pub residual: f64,
}

/// Discrete Fourier analysis of one period of a tabulated stacking energy.
pub fn fit_sinusoid(table: &TabulatedPeriodic) -> Result<SinusoidFit> {
    let n = table.values.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: n as f64,
            reason: "at least 64 samples per period are required",
        });
    }
    let angle = |k: usize| 2.0 * PI * k as f64 / n as f64;
    let mean = table.mean();
    let (mut cosine, mut sine) = (0.0, 0.0);
    for (k, v) in table.values.iter().enumerate() {
        cosine += v * libm::cos(angle(k));
        sine += v * libm::sin(angle(k));
    }
    cosine *= 2.0 / n as f64;
    sine *= 2.0 / n as f64;
    let residual = table
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mean - cosine * libm::cos(angle(k)) - sine * libm::sin(angle(k))).abs())
        .fold(0.0, f64::max);
    Ok(SinusoidFit {
        v0_tilde: -0.5 * cosine,
        mean,
        sine,
        residual,
    })
}

/// Continuum parameters of an atomistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedContinuum {
    pub kappa_tilde: f64,
    pub v_tilde: TabulatedPeriodic,
    pub v0_tilde: f64,
    pub fit: SinusoidFit,
    /// Cauchy-Born lattice sum at zero strain before normalization,
    /// `sum_{j != 0} W_intra(j)`.
    pub cauchy_born_offset: f64,
}

impl DerivedContinuum {
    pub fn derive<I, J>(intra: &I, inter: &J, theta: f64, samples: usize) -> Result<Self>
    where
        I: PairPotential + ?Sized,
        J: PairPotential + ?Sized,
    {
        let kappa_tilde = stiffness(intra)?;
        let v_tilde = tabulate_stacking(inter, theta, samples);
        let fit = fit_sinusoid(&v_tilde)?;
        let cauchy_born_offset = chain_offsets(intra).map(|j| intra.value(j)).sum();
        Ok(Self {
            kappa_tilde,
            v0_tilde: fit.v0_tilde,
            v_tilde,
            fit,
            cauchy_born_offset,
        })
    }

    /// Coupling strength `sqrt(v0_tilde / kappa_tilde) / epsilon`.
    pub fn eta(&self, epsilon: f64) -> f64 {
        libm::sqrt(self.v0_tilde / self.kappa_tilde) / epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomistic::potential::Potential;

    /// Poisson-summation form of the lattice-summed Gaussian
    /// `-depth exp(-z^2 / 2 width^2)` truncated to `modes` Fourier modes.
    fn poisson_gaussian(depth: f64, width: f64, period: f64, z: f64, modes: usize) -> f64 {
        let amp = depth * width * libm::sqrt(2.0 * PI) / period;
        let mut sum = 1.0;
        for k in 1..=modes {
            let q = k as f64 / period;
            sum += 2.0
                * libm::exp(-2.0 * PI * PI * width * width * q * q)
                * libm::cos(2.0 * PI * q * z);
        }
        -amp * sum
    }

    #[test]
    fn cauchy_born_harmonic_closed_form() {
        let h = Potential::harmonic_nearest_neighbor();
        assert_eq!(cauchy_born_density(&h, 0.0), 0.0);
        for z in [-0.3, -0.01, 0.02, 0.4] {
            assert!((cauchy_born_density(&h, z) - z * z).abs() < 1e-15);
            assert_eq!(cauchy_born_density(&h, z), cauchy_born_density(&h, z));
        }
        assert_eq!(stiffness(&h).unwrap(), 2.0);
    }

    #[test]
    fn stiffness_is_linear_in_the_potential() {
        let lj = Potential::lennard_jones(1.0);
        let k = stiffness(&lj).unwrap();
        assert_eq!(stiffness(&lj.scaled(4.0)).unwrap(), 4.0 * k);
        let k3 = stiffness(&lj.scaled(3.0)).unwrap();
        assert!((k3 - 3.0 * k).abs() < 1e-14 * k3);
    }

    #[test]
    fn lennard_jones_stiffness_matches_finite_differences() {
        let lj = Potential::lennard_jones(1.0);
        let k = stiffness(&lj).unwrap();
        assert!(k > 0.0);
        let fd = stiffness_finite_difference(&lj, 1e-4);
        assert!((k - fd).abs() < 1e-6 * k, "{k} vs {fd}");
    }

    #[test]
    fn degenerate_stiffness_is_rejected() {
        let flat = Potential::Zero { cutoff: 3.0 };
        assert!(matches!(
            stiffness(&flat),
            Err(Error::DegenerateStiffness { .. })
        ));
    }

    #[test]
    fn stacking_potential_is_periodic() {
        let g = Potential::gaussian(1.0, 0.2);
        let theta = 1.0 / 50.0;
        let a = stacking_potential(&g, theta, 0.0);
        let b = stacking_potential(&g, theta, 1.0 - theta);
        assert!((a - b).abs() < 1e-12);
        for z in [0.13, 0.5, 0.77] {
            let d =
                stacking_potential(&g, theta, z + 1.0 - theta) - stacking_potential(&g, theta, z);
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn stacking_potential_matches_poisson_summation() {
        let (depth, width, theta) = (1.3, 0.2, 1.0 / 50.0);
        let g = Potential::gaussian(depth, width);
        for k in 0..20 {
            let z = k as f64 * 0.049;
            let direct = stacking_potential(&g, theta, z);
            let oracle = poisson_gaussian(depth, width, 1.0 - theta, z, 12);
            assert!(
                (direct - oracle).abs() < 1e-8,
                "z={z}: {direct} vs {oracle}"
            );
        }
    }

    #[test]
    fn short_range_stacking_is_single_image() {
        let theta = 0.1;
        let g = Potential::Gaussian {
            depth: 1.0,
            width: 0.05,
            cutoff: 0.4,
        };
        for z in [0.0, 0.1, 0.3, 0.6, 0.85] {
            let nearest = libm::round(z / 0.9) * 0.9;
            assert_eq!(stacking_potential(&g, theta, z), g.value(z - nearest));
        }
    }

    #[test]
    fn fit_recovers_pure_cosine() {
        let theta = 0.02;
        let table = TabulatedPeriodic::sample(1.0 - theta, 128, |z| {
            -2.0 * libm::cos(2.0 * PI * z / (1.0 - theta))
        });
        let fit = fit_sinusoid(&table).unwrap();
        assert!((fit.v0_tilde - 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-10);
        let constant = TabulatedPeriodic::sample(1.0, 64, |_| 3.5);
        let fit = fit_sinusoid(&constant).unwrap();
        assert!(fit.v0_tilde.abs() < 1e-15);
        assert!(fit_sinusoid(&TabulatedPeriodic::sample(1.0, 32, |_| 0.0)).is_err());
    }

    #[test]
    fn gaussian_fit_matches_poisson_harmonics() {
        let (depth, width, theta) = (1.0, 0.2, 1.0 / 50.0);
        let period = 1.0 - theta;
        let g = Potential::gaussian(depth, width);
        let fit = fit_sinusoid(&tabulate_stacking(&g, theta, 256)).unwrap();
        // Oracle: v0 from the first Poisson mode, residual from the sum of all
        // higher modes at their common maximum z = 0.
        let amp = depth * width * libm::sqrt(2.0 * PI) / period;
        let mode = |k: f64| libm::exp(-2.0 * PI * PI * width * width * k * k / (period * period));
        let v0 = amp * mode(1.0);
        let residual = 2.0 * amp * (2..12).map(|k| mode(k as f64)).sum::<f64>();
        assert!((fit.v0_tilde - v0).abs() < 1e-10);
        assert!((fit.residual - residual).abs() < 1e-8);
        // Higher harmonics are not negligible at this width: the second mode
        // alone is 8.5% of the first.
        assert!((mode(2.0) / mode(1.0) - 0.0849).abs() < 1e-3);
        assert!((fit.residual / fit.v0_tilde - 0.1726).abs() < 1e-3);

        let wide = Potential::gaussian(depth, 0.5);
        let fit = fit_sinusoid(&tabulate_stacking(&wide, theta, 256)).unwrap();
        assert!(fit.residual / fit.v0_tilde < 1e-5);
    }

    #[test]
    fn derived_continuum_for_harmonic_and_gaussian() {
        let d = DerivedContinuum::derive(
            &Potential::harmonic_nearest_neighbor(),
            &Potential::gaussian(1.0, 0.5),
            0.1,
            128,
        )
        .unwrap();
        assert_eq!(d.kappa_tilde, 2.0);
        assert!(d.v0_tilde > 0.0);
        assert_eq!(d.cauchy_born_offset, 0.0);
        for k in 0..128 {
            let z = 0.9 * k as f64 / 128.0;
            let shifted = stacking_potential(&Potential::gaussian(1.0, 0.5), 0.1, z + 0.9);
            assert!((d.v_tilde.values[k] - shifted).abs() < 1e-10);
        }
    }
}
