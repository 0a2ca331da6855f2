//! Limited-memory BFGS with backtracking or strong-Wolfe line search, and a
//! central-difference gradient checker.
//!
//! The inverse Hessian is applied with the two-loop recursion over the most
//! recent `memory` curvature pairs. The initial inverse Hessian is the scaled
//! identity `s'y / y'y` of the newest pair.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sufficient-decrease constant of the Armijo condition.
pub const ARMIJO_C1: f64 = 1e-4;
/// Curvature constant of the strong Wolfe condition.
pub const WOLFE_C2: f64 = 0.9;
/// Curvature pairs with `s'y <= SKIP_RATIO |s| |y|` are not stored.
pub const SKIP_RATIO: f64 = 1e-12;

const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const MAX_WOLFE_EVALUATIONS: usize = 40;
/// Multiple of machine epsilon, relative to the objective magnitude, below
/// which value differences are treated as rounding.
pub const NOISE_FACTOR: f64 = 64.0;

/// A differentiable scalar function of `dimension()` variables.
pub trait Objective {
    fn dimension(&self) -> usize;

    /// Objective value. NaN or infinity marks an inadmissible point.
    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient at `x` into `grad`.
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

/// Adapts a pair of closures to [`Objective`].
pub struct FnObjective<F, G> {
    dimension: usize,
    value: F,
    gradient: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(dimension: usize, value: F, gradient: G) -> Self {
        Self {
            dimension,
            value,
            gradient,
        }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.gradient)(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearch {
    /// Halve the step from 1 until the Armijo condition holds.
    ArmijoBacktracking,
    /// Bracketing and zoom until both strong Wolfe conditions hold.
    StrongWolfe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Convergence threshold on the max-norm of the gradient. It carries the
    /// units of the gradient; callers pass dimensionally consistent values.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub line_search: LineSearch,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            tolerance: 1e-8,
            max_iterations: 5000,
            line_search: LineSearch::ArmijoBacktracking,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.memory < 1 {
            return Err(Error::InvalidParameter {
                name: "memory",
                value: self.memory as f64,
                reason: "at least one curvature pair is required",
            });
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                value: self.max_iterations as f64,
                reason: "at least one iteration is required",
            });
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: self.tolerance,
                reason: "tolerance must be non-negative and finite",
            });
        }
        Ok(())
    }
}

/// Why the minimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterationsExceeded,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Max-norm of the gradient at `x`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn admissible(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

struct History {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl History {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let bound = SKIP_RATIO * libm::sqrt(dot(&s, &s)) * libm::sqrt(dot(&y, &y));
        if !(sy > bound) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Writes `-H g` into `direction`.
    fn direction(&self, g: &[f64], direction: &mut [f64]) {
        direction.copy_from_slice(g);
        let mut alphas = vec![0.0; self.pairs.len()];
        for (k, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            let alpha = rho * dot(s, direction);
            alphas[k] = alpha;
            direction
                .iter_mut()
                .zip(y)
                .for_each(|(q, yi)| *q -= alpha * yi);
        }
        let gamma = match self.pairs.back() {
            Some((_, y, rho)) => 1.0 / (rho * dot(y, y)),
            None => 1.0 / libm::sqrt(dot(g, g)).max(1.0),
        };
        direction.iter_mut().for_each(|q| *q *= gamma);
        for (k, (s, y, rho)) in self.pairs.iter().enumerate() {
            let beta = rho * dot(y, direction);
            let coeff = alphas[k] - beta;
            direction
                .iter_mut()
                .zip(s)
                .for_each(|(r, si)| *r += coeff * si);
        }
        direction.iter_mut().for_each(|r| *r = -*r);
    }
}

struct Trial {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Searcher<'a, O: Objective + ?Sized> {
    objective: &'a O,
    evaluations: usize,
}

impl<O: Objective + ?Sized> Searcher<'_, O> {
    fn point(&mut self, x: &[f64], d: &[f64], alpha: f64) -> (Vec<f64>, f64) {
        let trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        self.evaluations += 1;
        let f = admissible(self.objective.value(&trial));
        (trial, f)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.objective.gradient(x, &mut g);
        g
    }

    /// Rounding floor of objective differences near `f0` and `f`.
    fn noise(f0: f64, f: f64) -> f64 {
        NOISE_FACTOR * f64::EPSILON * f0.abs().max(f.abs())
    }

    /// Sufficient decrease for a trial whose value change is below the
    /// rounding floor: the directional derivative must satisfy
    /// `phi'(alpha) <= (1 - 2 c1) |phi'(0)|`, which is the Armijo condition
    /// for a quadratic written in terms of slopes.
    fn within_noise(
        &self,
        f0: f64,
        slope0: f64,
        trial: &[f64],
        f: f64,
        d: &[f64],
    ) -> Option<Vec<f64>> {
        if !((f - f0).abs() <= Self::noise(f0, f)) {
            return None;
        }
        let g = self.gradient(trial);
        let slope = dot(&g, d);
        (slope <= -(1.0 - 2.0 * ARMIJO_C1) * slope0).then_some(g)
    }

    fn wolfe_within_noise(
        &self,
        f0: f64,
        slope0: f64,
        trial: &[f64],
        f: f64,
        d: &[f64],
    ) -> Option<Vec<f64>> {
        self.within_noise(f0, slope0, trial, f, d)
            .filter(|g| dot(g, d).abs() <= -WOLFE_C2 * slope0)
    }

    fn armijo(&mut self, x: &[f64], f0: f64, g0: &[f64], d: &[f64]) -> Option<Trial> {
        let slope = dot(g0, d);
        let mut alpha = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let (trial, f) = self.point(x, d, alpha);
            if f <= f0 + ARMIJO_C1 * alpha * slope {
                let g = self.gradient(&trial);
                return Some(Trial { x: trial, f, g });
            }
            if let Some(g) = self.within_noise(f0, slope, &trial, f, d) {
                return Some(Trial { x: trial, f, g });
            }
            alpha *= BACKTRACK_FACTOR;
        }
        None
    }

    fn strong_wolfe(&mut self, x: &[f64], f0: f64, g0: &[f64], d: &[f64]) -> Option<Trial> {
        let slope0 = dot(g0, d);
        let mut prev_alpha = 0.0;
        let mut prev_f = f0;
        let mut prev_slope = slope0;
        let mut alpha = 1.0;
        for iteration in 0..MAX_WOLFE_EVALUATIONS {
            let (trial, f) = self.point(x, d, alpha);
            if f > f0 + ARMIJO_C1 * alpha * slope0 || (iteration > 0 && f >= prev_f) {
                if let Some(g) = self.wolfe_within_noise(f0, slope0, &trial, f, d) {
                    return Some(Trial { x: trial, f, g });
                }
                return self.zoom(
                    x,
                    f0,
                    slope0,
                    d,
                    (prev_alpha, prev_f, prev_slope),
                    (alpha, f),
                );
            }
            let g = self.gradient(&trial);
            let slope = dot(&g, d);
            if slope.abs() <= -WOLFE_C2 * slope0 {
                return Some(Trial { x: trial, f, g });
            }
            if slope >= 0.0 {
                return self.zoom(x, f0, slope0, d, (alpha, f, slope), (prev_alpha, prev_f));
            }
            prev_alpha = alpha;
            prev_f = f;
            prev_slope = slope;
            alpha *= 2.0;
        }
        None
    }

    /// Shrinks the bracket between `lo` (lowest value so far, with slope) and
    /// `hi` until a strong Wolfe point is found.
    fn zoom(
        &mut self,
        x: &[f64],
        f0: f64,
        slope0: f64,
        d: &[f64],
        lo: (f64, f64, f64),
        hi: (f64, f64),
    ) -> Option<Trial> {
        let (mut a_lo, mut f_lo, mut s_lo) = lo;
        let (mut a_hi, mut f_hi) = hi;
        let mut best: Option<Trial> = None;
        for _ in 0..MAX_WOLFE_EVALUATIONS {
            // Minimizer of the quadratic through (a_lo, f_lo, s_lo) and
            // (a_hi, f_hi), kept inside the central part of the bracket.
            let width = a_hi - a_lo;
            let denom = 2.0 * (f_hi - f_lo - s_lo * width);
            let mut alpha = if denom.is_finite() && denom > 0.0 {
                a_lo - s_lo * width * width / denom
            } else {
                a_lo + 0.5 * width
            };
            let (left, right) = if a_lo < a_hi {
                (a_lo, a_hi)
            } else {
                (a_hi, a_lo)
            };
            let margin = 0.1 * (right - left);
            if !(alpha > left + margin && alpha < right - margin) {
                alpha = 0.5 * (a_lo + a_hi);
            }
            if (right - left).abs() <= f64::EPSILON * right.abs().max(1.0) {
                break;
            }
            let (trial, f) = self.point(x, d, alpha);
            if f > f0 + ARMIJO_C1 * alpha * slope0 || f >= f_lo {
                if let Some(g) = self.wolfe_within_noise(f0, slope0, &trial, f, d) {
                    return Some(Trial { x: trial, f, g });
                }
                a_hi = alpha;
                f_hi = f;
                continue;
            }
            let g = self.gradient(&trial);
            let slope = dot(&g, d);
            if slope.abs() <= -WOLFE_C2 * slope0 {
                return Some(Trial { x: trial, f, g });
            }
            if slope * (a_hi - a_lo) >= 0.0 {
                a_hi = a_lo;
                f_hi = f_lo;
            }
            a_lo = alpha;
            f_lo = f;
            s_lo = slope;
            best = Some(Trial { x: trial, f, g });
        }
        // The sufficient-decrease point with the lowest value is still a
        // valid descent step even if the curvature test never passed.
        best
    }
}

/// Minimizes `objective` from `x0`.
///
/// Accepted steps satisfy the Armijo condition, or, when the change in value
/// is below the rounding floor `NOISE_FACTOR * eps * |f|`, its slope form.
/// Consecutive values in [`Minimum::trace`] therefore never increase by more
/// than that floor. Failure
/// of the line search or exhausting the iteration budget is reported through
/// [`Minimum::termination`] together with the best iterate.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    opts: &MinimizeOptions,
) -> Result<Minimum> {
    opts.validate()?;
    let n = objective.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let mut searcher = Searcher {
        objective,
        evaluations: 1,
    };
    let mut x = x0.to_vec();
    let mut f = objective.value(&x);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { value: f });
    }
    let mut g = searcher.gradient(&x);
    let mut history = History::new(opts.memory);
    let mut direction = vec![0.0; n];
    let mut iterations = 0;

    let mut trace = vec![f];
    let finish =
        |x: Vec<f64>, f: f64, g: &[f64], iterations, evaluations, termination, trace: Vec<f64>| {
            Minimum {
                x,
                f,
                gradient_norm: max_norm(g),
                iterations,
                evaluations,
                termination,
                trace,
            }
        };

    if max_norm(&g) <= opts.tolerance {
        return Ok(finish(
            x,
            f,
            &g,
            0,
            searcher.evaluations,
            Termination::Converged,
            trace,
        ));
    }

    while iterations < opts.max_iterations {
        history.direction(&g, &mut direction);
        if !(dot(&g, &direction) < 0.0) {
            history.pairs.clear();
            history.direction(&g, &mut direction);
        }
        let step = match opts.line_search {
            LineSearch::ArmijoBacktracking => searcher.armijo(&x, f, &g, &direction),
            LineSearch::StrongWolfe => searcher.strong_wolfe(&x, f, &g, &direction),
        };
        let step = match step {
            Some(step) => step,
            None if !history.pairs.is_empty() => {
                // Retry once along the scaled steepest descent direction.
                history.pairs.clear();
                continue;
            }
            None => {
                return Ok(finish(
                    x,
                    f,
                    &g,
                    iterations,
                    searcher.evaluations,
                    Termination::LineSearchFailure,
                    trace,
                ))
            }
        };
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        history.push(s, y);
        x = step.x;
        f = step.f;
        g = step.g;
        trace.push(f);
        iterations += 1;
        if max_norm(&g) <= opts.tolerance {
            return Ok(finish(
                x,
                f,
                &g,
                iterations,
                searcher.evaluations,
                Termination::Converged,
                trace,
            ));
        }
    }
    Ok(finish(
        x,
        f,
        &g,
        iterations,
        searcher.evaluations,
        Termination::MaxIterationsExceeded,
        trace,
    ))
}

/// Gradient threshold below which [`check_gradient`] compares absolutely.
pub const ABSOLUTE_FALLBACK: f64 = 1e-12;

/// Central-difference approximation of the gradient with step `step`.
pub fn finite_difference_gradient<O: Objective + ?Sized>(
    objective: &O,
    x: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = objective.value(&probe);
        probe[i] = x[i] - step;
        let minus = objective.value(&probe);
        probe[i] = x[i];
        if !plus.is_finite() {
            return Err(Error::NonFiniteObjective { value: plus });
        }
        if !minus.is_finite() {
            return Err(Error::NonFiniteObjective { value: minus });
        }
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Largest componentwise relative error of the analytic gradient against
/// central differences with step `step`, measured relative to the
/// finite-difference value. Components where both values are below
/// [`ABSOLUTE_FALLBACK`] in magnitude contribute their absolute error.
pub fn check_gradient<O: Objective + ?Sized>(objective: &O, x: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: step,
            reason: "finite-difference step must be positive",
        });
    }
    if x.len() != objective.dimension() {
        return Err(Error::DimensionMismatch {
            expected: objective.dimension(),
            found: x.len(),
        });
    }
    let mut analytic = vec![0.0; x.len()];
    objective.gradient(x, &mut analytic);
    let numeric = finite_difference_gradient(objective, x, step)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(g, fd)| {
            let err = (g - fd).abs();
            if g.abs().max(fd.abs()) < ABSOLUTE_FALLBACK {
                err
            } else {
                err / fd.abs().max(ABSOLUTE_FALLBACK)
            }
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(center: Vec<f64>) -> impl Objective {
        let c2 = center.clone();
        FnObjective::new(
            center.len(),
            move |x: &[f64]| x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum(),
            move |x: &[f64], g: &mut [f64]| {
                for ((gi, xi), ci) in g.iter_mut().zip(x).zip(&c2) {
                    *gi = 2.0 * (xi - ci);
                }
            },
        )
    }

    fn rosenbrock() -> impl Objective {
        FnObjective::new(
            2,
            |x: &[f64]| {
                let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
                a * a + 100.0 * b * b
            },
            |x: &[f64], g: &mut [f64]| {
                let b = x[1] - x[0] * x[0];
                g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * b;
                g[1] = 200.0 * b;
            },
        )
    }

    #[test]
    fn quadratic_is_solved_in_few_iterations() {
        let center: Vec<f64> = (0..50).map(|i| libm::sin(i as f64 * 1.7) * 3.0).collect();
        let obj = quadratic(center.clone());
        for line_search in [LineSearch::ArmijoBacktracking, LineSearch::StrongWolfe] {
            let opts = MinimizeOptions {
                tolerance: 1e-10,
                line_search,
                ..Default::default()
            };
            let min = minimize(&obj, &vec![0.0; 50], &opts).unwrap();
            assert!(min.converged());
            assert!(min.iterations <= 55, "{line_search:?}: {}", min.iterations);
            for (x, c) in min.x.iter().zip(&center) {
                assert!((x - c).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rosenbrock_reaches_global_minimum() {
        for line_search in [LineSearch::ArmijoBacktracking, LineSearch::StrongWolfe] {
            let opts = MinimizeOptions {
                tolerance: 1e-9,
                line_search,
                ..Default::default()
            };
            let min = minimize(&rosenbrock(), &[-1.2, 1.0], &opts).unwrap();
            assert!(min.converged(), "{line_search:?}");
            assert!((min.x[0] - 1.0).abs() < 1e-6 && (min.x[1] - 1.0).abs() < 1e-6);
            assert!(min.f < 1e-12);
        }
    }

    #[test]
    fn accepted_steps_descend() {
        let min = minimize(&rosenbrock(), &[-1.2, 1.0], &MinimizeOptions::default()).unwrap();
        assert_eq!(min.trace.len(), min.iterations + 1);
        for w in min.trace.windows(2) {
            assert!(w[1] <= w[0] + NOISE_FACTOR * f64::EPSILON * w[0].abs());
        }
    }

    #[test]
    fn critical_start_returns_immediately() {
        let obj = quadratic(vec![1.0, 2.0]);
        let min = minimize(&obj, &[1.0, 2.0], &MinimizeOptions::default()).unwrap();
        assert!(min.converged());
        assert_eq!(min.iterations, 0);
        assert_eq!(min.x, vec![1.0, 2.0]);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let obj = FnObjective::new(1, |_: &[f64]| f64::NAN, |_: &[f64], _: &mut [f64]| {});
        assert!(matches!(
            minimize(&obj, &[0.0], &MinimizeOptions::default()),
            Err(Error::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn nan_trial_steps_are_rejected() {
        // Undefined for x > 1: the minimizer at 0.9 must be approached from
        // the admissible side.
        let obj = FnObjective::new(
            1,
            |x: &[f64]| {
                if x[0] > 1.0 {
                    f64::NAN
                } else {
                    (x[0] - 0.9) * (x[0] - 0.9)
                }
            },
            |x: &[f64], g: &mut [f64]| g[0] = 2.0 * (x[0] - 0.9),
        );
        let min = minimize(&obj, &[-5.0], &MinimizeOptions::default()).unwrap();
        assert!(min.converged());
        assert!((min.x[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn iteration_budget_is_reported() {
        let opts = MinimizeOptions {
            max_iterations: 2,
            tolerance: 1e-14,
            ..Default::default()
        };
        let min = minimize(&rosenbrock(), &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(min.termination, Termination::MaxIterationsExceeded);
        assert!(min.f <= 24.2);
    }

    #[test]
    fn invalid_options_are_rejected() {
        let obj = quadratic(vec![0.0]);
        let opts = MinimizeOptions {
            memory: 0,
            ..Default::default()
        };
        assert!(minimize(&obj, &[1.0], &opts).is_err());
        assert!(matches!(
            minimize(&obj, &[1.0, 2.0], &MinimizeOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_check_accepts_affine_and_flags_corruption() {
        let b = [1.5, -2.0, 0.25];
        let linear = FnObjective::new(
            3,
            move |x: &[f64]| x.iter().zip(&b).map(|(x, b)| x * b).sum(),
            move |_: &[f64], g: &mut [f64]| g.copy_from_slice(&b),
        );
        assert!(check_gradient(&linear, &[0.3, 0.1, -0.7], 1e-4).unwrap() < 1e-10);

        let corrupted = FnObjective::new(
            3,
            move |x: &[f64]| x.iter().zip(&b).map(|(x, b)| x * b).sum(),
            move |_: &[f64], g: &mut [f64]| {
                g.copy_from_slice(&b);
                g[1] *= 2.0;
            },
        );
        let err = check_gradient(&corrupted, &[0.3, 0.1, -0.7], 1e-4).unwrap();
        assert!((err - 1.0).abs() < 1e-8);
        assert!(check_gradient(&linear, &[0.0; 3], 0.0).is_err());
    }
}
