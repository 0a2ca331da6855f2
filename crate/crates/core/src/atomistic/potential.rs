//! Even pair potentials in nondimensional length units (layer-1 lattice
//! constant equal to 1).

use crate::error::{Error, Result};

/// An even pair potential `W(z) = W(-z)` with its first two derivatives.
///
/// `value` is not truncated; lattice sums include a pair only when its
/// unrelaxed separation lies within `cutoff`.
pub trait PairPotential {
    fn value(&self, z: f64) -> f64;
    fn d1(&self, z: f64) -> f64;
    fn d2(&self, z: f64) -> f64;
    fn cutoff(&self) -> f64;
}

impl<P: PairPotential + ?Sized> PairPotential for &P {
    fn value(&self, z: f64) -> f64 {
        (**self).value(z)
    }
    fn d1(&self, z: f64) -> f64 {
        (**self).d1(z)
    }
    fn d2(&self, z: f64) -> f64 {
        (**self).d2(z)
    }
    fn cutoff(&self) -> f64 {
        (**self).cutoff()
    }
}

/// Built-in pair potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `k/2 (|z| - rest)^2`.
    Harmonic {
        stiffness: f64,
        rest: f64,
        cutoff: f64,
    },
    /// `depth ((r/|z|)^12 - 2 (r/|z|)^6)`, minimum `-depth` at `|z| = r`.
    LennardJones {
        depth: f64,
        r_min: f64,
        cutoff: f64,
    },
    /// `-depth exp(-z^2 / (2 width^2))`.
    Gaussian {
        depth: f64,
        width: f64,
        cutoff: f64,
    },
    Zero {
        cutoff: f64,
    },
}

impl Potential {
    /// Harmonic bonds of unit stiffness between nearest neighbours only.
    pub fn harmonic_nearest_neighbor() -> Self {
        Potential::Harmonic {
            stiffness: 1.0,
            rest: 1.0,
            cutoff: 1.5,
        }
    }

    pub fn lennard_jones(depth: f64) -> Self {
        Potential::LennardJones {
            depth,
            r_min: 1.0,
            cutoff: 5.0,
        }
    }

    pub fn gaussian(depth: f64, width: f64) -> Self {
        Potential::Gaussian {
            depth,
            width,
            cutoff: 5.0,
        }
    }

    /// The same potential multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        match self {
            Potential::Harmonic {
                stiffness,
                rest,
                cutoff,
            } => Potential::Harmonic {
                stiffness: stiffness * factor,
                rest,
                cutoff,
            },
            Potential::LennardJones {
                depth,
                r_min,
                cutoff,
            } => Potential::LennardJones {
                depth: depth * factor,
                r_min,
                cutoff,
            },
            Potential::Gaussian {
                depth,
                width,
                cutoff,
            } => Potential::Gaussian {
                depth: depth * factor,
                width,
                cutoff,
            },
            zero @ Potential::Zero { .. } => zero,
        }
    }

    /// Checks parameters and runs [`validate_potential`].
    pub fn validated(self) -> Result<Self> {
        let bad = |reason| Err(Error::InvalidPotential { reason, at: 0.0 });
        let cutoff = self.cutoff();
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return bad("cutoff must be positive and finite");
        }
        match self {
            Potential::Harmonic {
                stiffness, rest, ..
            } if !(stiffness.is_finite() && rest > 0.0) => {
                return bad("harmonic bond needs finite stiffness and positive rest length")
            }
            Potential::LennardJones { depth, r_min, .. } if !(depth.is_finite() && r_min > 0.0) => {
                return bad("Lennard-Jones needs finite depth and positive r_min")
            }
            Potential::Gaussian { depth, width, .. } if !(depth.is_finite() && width > 0.0) => {
                return bad("Gaussian needs finite depth and positive width")
            }
            _ => {}
        }
        validate_potential(&self)?;
        Ok(self)
    }
}

impl PairPotential for Potential {
    fn value(&self, z: f64) -> f64 {
        match *self {
            Potential::Harmonic {
                stiffness, rest, ..
            } => {
                let s = z.abs() - rest;
                0.5 * stiffness * s * s
            }
            Potential::LennardJones { depth, r_min, .. } => {
                let q6 = libm::pow(r_min / z.abs(), 6.0);
                depth * (q6 * q6 - 2.0 * q6)
            }
            Potential::Gaussian { depth, width, .. } => {
                -depth * libm::exp(-z * z / (2.0 * width * width))
            }
            Potential::Zero { .. } => 0.0,
        }
    }

    fn d1(&self, z: f64) -> f64 {
        match *self {
            Potential::Harmonic {
                stiffness, rest, ..
            } => stiffness * (z.abs() - rest) * z.signum(),
            Potential::LennardJones { depth, r_min, .. } => {
                let r = z.abs();
                let q6 = libm::pow(r_min / r, 6.0);
                -12.0 * depth * (q6 * q6 - q6) / r * z.signum()
            }
            Potential::Gaussian { depth, width, .. } => {
                let w2 = width * width;
                depth * z / w2 * libm::exp(-z * z / (2.0 * w2))
            }
            Potential::Zero { .. } => 0.0,
        }
    }

    fn d2(&self, z: f64) -> f64 {
        match *self {
            Potential::Harmonic { stiffness, .. } => stiffness,
            Potential::LennardJones { depth, r_min, .. } => {
                let r = z.abs();
                let q6 = libm::pow(r_min / r, 6.0);
                depth * (156.0 * q6 * q6 - 84.0 * q6) / (r * r)
            }
            Potential::Gaussian { depth, width, .. } => {
                let w2 = width * width;
                depth * (1.0 / w2 - z * z / (w2 * w2)) * libm::exp(-z * z / (2.0 * w2))
            }
            Potential::Zero { .. } => 0.0,
        }
    }

    fn cutoff(&self) -> f64 {
        match *self {
            Potential::Harmonic { cutoff, .. }
            | Potential::LennardJones { cutoff, .. }
            | Potential::Gaussian { cutoff, .. }
            | Potential::Zero { cutoff } => cutoff,
        }
    }
}

const VALIDATION_SAMPLES: usize = 100;
const EVEN_TOLERANCE: f64 = 1e-12;
const DERIVATIVE_TOLERANCE: f64 = 1e-7;

fn five_point(f: impl Fn(f64) -> f64, z: f64, h: f64) -> f64 {
    (8.0 * (f(z + h) - f(z - h)) - (f(z + 2.0 * h) - f(z - 2.0 * h))) / (12.0 * h)
}

/// Checks evenness and derivative consistency on sample points in
/// `(0, cutoff]`.
///
/// Evenness must hold to `1e-12` relative; `d1` and `d2` must agree with
/// five-point differences of `value` and `d1` to `1e-7` relative to the local
/// derivative (plus `1e-3` of the largest sampled derivative, so that zeros of
/// the derivative do not demand infinite precision).
pub fn validate_potential<P: PairPotential + ?Sized>(potential: &P) -> Result<()> {
    let cutoff = potential.cutoff();
    let samples = (1..=VALIDATION_SAMPLES).map(|k| cutoff * k as f64 / VALIDATION_SAMPLES as f64);
    let mut peak1: f64 = 0.0;
    let mut peak2: f64 = 0.0;
    for z in samples.clone() {
        peak1 = peak1.max(potential.d1(z).abs());
        peak2 = peak2.max(potential.d2(z).abs());
    }
    for z in samples {
        let (plus, minus) = (potential.value(z), potential.value(-z));
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::InvalidPotential {
                reason: "potential is not finite",
                at: z,
            });
        }
        if (plus - minus).abs() > EVEN_TOLERANCE * plus.abs().max(1.0) {
            return Err(Error::InvalidPotential {
                reason: "potential is not even",
                at: z,
            });
        }
        let h = 1e-4 * z;
        let fd1 = five_point(|t| potential.value(t), z, h);
        let d1 = potential.d1(z);
        if (fd1 - d1).abs() > DERIVATIVE_TOLERANCE * (d1.abs() + 1e-3 * peak1) {
            return Err(Error::InvalidPotential {
                reason: "first derivative disagrees with finite differences",
                at: z,
            });
        }
        let fd2 = five_point(|t| potential.d1(t), z, h);
        let d2 = potential.d2(z);
        if (fd2 - d2).abs() > DERIVATIVE_TOLERANCE * (d2.abs() + 1e-3 * peak2) {
            return Err(Error::InvalidPotential {
                reason: "second derivative disagrees with finite differences",
                at: z,
            });
        }
    }
    Ok(())
}
