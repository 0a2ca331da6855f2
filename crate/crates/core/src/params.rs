//! Model parameters, moire geometry and the dimensionless groups shared by
//! the continuum and atomistic models.

use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest allowed distance of `1/theta` from an integer for a commensurate
/// supercell.
pub const COMMENSURATE_TOLERANCE: f64 = 1e-9;

/// Mathematical modulus: the result lies in `[0, period)` for any finite `x`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let mut r = libm::fmod(x, period);
    if r < 0.0 {
        r += period;
    }
    // `r + period` can round up to `period` for tiny negative `r`.
    if r >= period {
        r = 0.0;
    }
    r
}

/// Dimensional inputs of a bilayer chain.
///
/// `a` is the layer-1 lattice constant, layer 2 has lattice constant
/// `a (1 - theta)`. `kappa` is the intralayer stiffness and `v0` the stacking
/// energy amplitude, both per unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    a: f64,
    theta: f64,
    kappa: f64,
    v0: f64,
}

impl ModelParams {
    /// Validates and builds a parameter set.
    ///
    /// `v0 = 0` is accepted: it is the uncoupled (`eta = 0`) limit used by
    /// parameter sweeps.
    pub fn new(a: f64, theta: f64, kappa: f64, v0: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                reason: "lattice constant must be positive and finite",
            });
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "lattice mismatch must lie in (0, 1)",
            });
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: kappa,
                reason: "stiffness must be positive and finite",
            });
        }
        if !(v0.is_finite() && v0 >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "v0",
                value: v0,
                reason: "stacking amplitude must be non-negative and finite",
            });
        }
        Ok(Self {
            a,
            theta,
            kappa,
            v0,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Period `(1 - theta) a` of the stacking energy, i.e. the layer-2 lattice
    /// constant.
    pub fn stacking_period(&self) -> f64 {
        (1.0 - self.theta) * self.a
    }

    pub fn moire_period(&self) -> f64 {
        moire_period(self)
    }

    pub fn dimensionless(&self) -> DimensionlessGroups {
        dimensionless_groups(self)
    }

    /// Returns a copy with `kappa` and `v0` multiplied by `factor`.
    pub fn scale_energies(&self, factor: f64) -> Result<Self> {
        Self::new(self.a, self.theta, self.kappa * factor, self.v0 * factor)
    }
}

/// Moire period `a (1 - theta) / theta`, the minimal period of the unrelaxed
/// disregistry.
pub fn moire_period(params: &ModelParams) -> f64 {
    params.a * (1.0 / params.theta - 1.0)
}

/// Atom counts `(M, N)` of layers 1 and 2 in one commensurate supercell.
pub fn lattice_counts(params: &ModelParams) -> Result<(usize, usize)> {
    lattice_counts_for_theta(params.theta)
}

/// [`lattice_counts`] for a bare mismatch value.
pub fn lattice_counts_for_theta(theta: f64) -> Result<(usize, usize)> {
    let inverse = 1.0 / theta;
    let n = libm::round(inverse);
    if !(theta > 0.0 && theta < 1.0) || (inverse - n).abs() > COMMENSURATE_TOLERANCE || n < 2.0 {
        return Err(Error::IncommensurateTheta { theta, inverse });
    }
    let n = n as usize;
    Ok((n - 1, n))
}

/// Unrelaxed disregistry `theta x mod (1 - theta) a`, in `[0, (1 - theta) a)`.
pub fn disregistry0(x: f64, params: &ModelParams) -> f64 {
    wrap(params.theta * x, params.stacking_period())
}

/// The dimensionless ratios controlling the shape of minimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessGroups {
    /// Length ratio `a / a_M = theta / (1 - theta)`.
    pub epsilon: f64,
    /// Energy ratio `V0 / kappa`.
    pub delta_ratio: f64,
    /// Coupling strength `sqrt(delta) / epsilon`.
    pub eta: f64,
}

impl DimensionlessGroups {
    /// The alternative coupling ratio `epsilon^2 / delta`, equal to `1 / eta^2`.
    pub fn eta_abstract(&self) -> f64 {
        self.epsilon * self.epsilon / self.delta_ratio
    }
}

pub fn dimensionless_groups(params: &ModelParams) -> DimensionlessGroups {
    let epsilon = params.theta / (1.0 - params.theta);
    let delta_ratio = params.v0 / params.kappa;
    DimensionlessGroups {
        epsilon,
        delta_ratio,
        eta: libm::sqrt(delta_ratio) / epsilon,
    }
}

/// Builds parameters with unit stiffness whose coupling strength is `eta`.
pub fn params_from_eta(eta: f64, theta: f64, a: f64) -> Result<ModelParams> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "coupling strength must be non-negative and finite",
        });
    }
    let epsilon = theta / (1.0 - theta);
    let kappa = 1.0;
    let root = eta * epsilon;
    ModelParams::new(a, theta, kappa, root * root * kappa)
}

/// Shape of the stacking energy as a function of disregistry.
#[derive(Debug, Clone, PartialEq)]
pub enum StackingForm {
    /// `-2 v0 cos(2 pi z / period)`.
    Sinusoid,
    /// A sampled lattice sum over one period, `values[k]` at `z = k period / len`.
    LatticeSum(alloc::vec::Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackingPotentialSpec {
    pub form: StackingForm,
    pub v0: f64,
    pub period: f64,
}

impl StackingPotentialSpec {
    pub fn sinusoid(v0: f64, period: f64) -> Self {
        Self {
            form: StackingForm::Sinusoid,
            v0,
            period,
        }
    }

    /// Stacking energy at disregistry `z`. Sampled forms are interpolated
    /// linearly between samples.
    pub fn eval(&self, z: f64) -> f64 {
        match &self.form {
            StackingForm::Sinusoid => -2.0 * self.v0 * libm::cos(2.0 * PI * z / self.period),
            StackingForm::LatticeSum(values) => {
                let n = values.len();
                let t = wrap(z, self.period) / self.period * n as f64;
                let k = (libm::floor(t) as usize).min(n - 1);
                let frac = t - k as f64;
                values[k] * (1.0 - frac) + values[(k + 1) % n] * frac
            }
        }
    }
}
