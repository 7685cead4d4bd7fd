//! One minimizing-movements step: minimize
//! `G(v) = E_λ(v) + (1/2τ) ∫ |v − u_prev|² / √(1 + (u_prev')²)`
//! over nodal `v ≥ ψ` with pinned endpoints.
//!
//! The unknown is the increment `δ = v − u_prev` on the interior nodes, so
//! that displacements far below the rounding level of `u_prev` (tiny `τ`)
//! are still resolved; the lower bound is `δ ≥ ψ − u_prev`. Objective
//! differences are evaluated with the cancellation-free energy increment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{
    energy_gradient_magnitude_raw, energy_gradient_raw, energy_hessian_raw, energy_increment_raw,
    mobility_weights,
};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

use super::DiscreteMeasure;

/// Iterations of the spectral projected gradient before the projected
/// Newton polish takes over (hybrid mode).
const SPG_BUDGET: usize = 25;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

/// `u_j − ψ_j` at or below this counts as contact.
pub fn activation_tolerance(psi: f64) -> f64 {
    1e-10 * (1.0 + psi.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Spectral projected gradient, then projected Newton.
    #[default]
    Hybrid,
    SpectralProjectedGradient,
    ProjectedNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSettings {
    /// Relative tolerance on the projected gradient density.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub method: InnerMethod,
}

impl Default for InnerSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            method: InnerMethod::Hybrid,
        }
    }
}

/// Minimizer of one step together with its first-order certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub u: GridFunction,
    /// Difference quotient `(u − u_prev)/τ`, computed from the increment.
    pub velocity: GridFunction,
    pub multipliers: DiscreteMeasure,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    /// Relative projected-gradient residual at exit.
    pub residual: f64,
    /// Magnitude of the gradient density used to scale `residual`.
    pub scale: f64,
    /// `E_λ(u) − E_λ(u_prev)`.
    pub energy_change: f64,
    /// Movement penalty of `u`.
    pub penalty: f64,
    /// Gradient of the step objective at `u` (hat-function first variations).
    pub gradient: Vec<f64>,
}

struct Problem<'a> {
    base: &'a [f64],
    psi: &'a [f64],
    lower: Vec<f64>,
    pen_diag: Vec<f64>,
    lambda: f64,
    dx: f64,
}

impl Problem<'_> {
    fn m(&self) -> usize {
        self.base.len() - 1
    }

    /// Full nodal increment from interior unknowns.
    fn full(&self, delta: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.m() + 1];
        d[1..self.m()].copy_from_slice(delta);
        d
    }

    fn penalty(&self, delta: &[f64]) -> f64 {
        0.5 * delta
            .iter()
            .zip(&self.pen_diag)
            .map(|(d, w)| w * d * d)
            .sum::<f64>()
    }

    fn objective(&self, delta: &[f64]) -> f64 {
        energy_increment_raw(self.base, &self.full(delta), self.lambda) + self.penalty(delta)
    }

    fn point(&self, delta: &[f64]) -> Vec<f64> {
        let full = self.full(delta);
        self.base.iter().zip(&full).map(|(b, d)| b + d).collect()
    }

    /// Energy and penalty parts of the gradient, interior entries.
    fn gradient_parts(&self, delta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ge = energy_gradient_raw(&self.point(delta), self.lambda);
        let gp: Vec<f64> = delta
            .iter()
            .zip(&self.pen_diag)
            .map(|(d, w)| w * d)
            .collect();
        (ge[1..self.m()].to_vec(), gp)
    }

    fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let (ge, gp) = self.gradient_parts(delta);
        ge.iter().zip(&gp).map(|(a, b)| a + b).collect()
    }

    fn at_bound(&self, delta: &[f64], i: usize) -> bool {
        delta[i] - self.lower[i] <= activation_tolerance(self.psi[i + 1])
    }

    fn project(&self, delta: &mut [f64]) {
        for (d, l) in delta.iter_mut().zip(&self.lower) {
            if *d < *l {
                *d = *l;
            }
        }
    }

    /// `(‖projected gradient density‖_∞, gradient density scale)`. The
    /// scale sums the magnitudes of all terms entering each entry, so that
    /// the relative residual is measured against the rounding floor.
    fn stationarity(&self, delta: &[f64]) -> (f64, f64) {
        let point = self.point(delta);
        let ge = energy_gradient_raw(&point, self.lambda);
        let mag = energy_gradient_magnitude_raw(&point, self.lambda);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (i, d) in delta.iter().enumerate() {
            let gp = self.pen_diag[i] * d;
            let g = (ge[i + 1] + gp) / self.dx;
            let pg = if self.at_bound(delta, i) {
                g.min(0.0)
            } else {
                g
            };
            worst = worst.max(pg.abs());
            scale = scale.max((mag[i + 1] + gp.abs()) / self.dx);
        }
        (worst, scale)
    }

    fn relative_residual(&self, delta: &[f64]) -> (f64, f64) {
        let (worst, scale) = self.stationarity(delta);
        (worst / (1.0 + scale), scale)
    }

    fn hessian(&self, delta: &[f64]) -> DMatrix<f64> {
        let mut h = energy_hessian_raw(&self.point(delta), self.lambda);
        for (i, w) in self.pen_diag.iter().enumerate() {
            h[(i, i)] += w;
        }
        h
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of one globalized step.
enum StepOutcome {
    Moved { next: Vec<f64>, phi: f64 },
    Stuck,
}

fn spg_step(pb: &Problem, delta: &[f64], phi: f64, g: &[f64], alpha: f64) -> StepOutcome {
    let mut trial: Vec<f64> = delta.iter().zip(g).map(|(d, gi)| d - alpha * gi).collect();
    pb.project(&mut trial);
    let dir: Vec<f64> = trial.iter().zip(delta).map(|(t, d)| t - d).collect();
    let slope = dot(g, &dir);
    if !(slope < 0.0) {
        return StepOutcome::Stuck;
    }
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let cand: Vec<f64> = delta.iter().zip(&dir).map(|(d, s)| d + t * s).collect();
        let phi_c = pb.objective(&cand);
        if phi_c <= phi + ARMIJO * t * slope {
            return StepOutcome::Moved {
                next: cand,
                phi: phi_c,
            };
        }
        t *= 0.5;
    }
    StepOutcome::Stuck
}

fn newton_step(pb: &Problem, delta: &[f64], phi: f64, g: &[f64]) -> StepOutcome {
    let n = delta.len();
    let free: Vec<usize> = (0..n)
        .filter(|&i| !(pb.at_bound(delta, i) && g[i] > 0.0))
        .collect();
    if free.is_empty() {
        return StepOutcome::Stuck;
    }
    let h = pb.hessian(delta);
    let nf = free.len();
    let h_ff = DMatrix::from_fn(nf, nf, |a, b| h[(free[a], free[b])]);
    let g_f = DVector::from_iterator(nf, free.iter().map(|&i| g[i]));
    let diag_max = (0..nf)
        .map(|i| h_ff[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut shift = 0.0;
    let dir_f = loop {
        let mut shifted = h_ff.clone();
        for i in 0..nf {
            shifted[(i, i)] += shift;
        }
        if let Some(chol) = shifted.cholesky() {
            break -chol.solve(&g_f);
        }
        shift = if shift == 0.0 {
            1e-10 * diag_max
        } else {
            10.0 * shift
        };
        if shift > 1e10 * diag_max {
            return StepOutcome::Stuck;
        }
    };
    let mut dir = vec![0.0; n];
    for (a, &i) in free.iter().enumerate() {
        dir[i] = dir_f[a];
    }

    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let mut cand: Vec<f64> = delta.iter().zip(&dir).map(|(d, s)| d + t * s).collect();
        pb.project(&mut cand);
        let step: Vec<f64> = cand.iter().zip(delta).map(|(c, d)| c - d).collect();
        let slope = dot(g, &step);
        if !(slope < 0.0) {
            return StepOutcome::Stuck;
        }
        let phi_c = pb.objective(&cand);
        if phi_c <= phi + ARMIJO * slope {
            return StepOutcome::Moved {
                next: cand,
                phi: phi_c,
            };
        }
        t *= 0.5;
    }
    StepOutcome::Stuck
}

/// Solves one step of the scheme from `u_prev` against nodal obstacle
/// values `psi` (one entry per node).
pub fn inner_minimize(
    u_prev: &GridFunction,
    psi: &[f64],
    tau: f64,
    lambda: f64,
    settings: &InnerSettings,
) -> Result<InnerSolution> {
    let m = u_prev.m();
    if m < 4 {
        return Err(Error::Resolution { m, min: 4 });
    }
    if psi.len() != m + 1 {
        return Err(Error::GridMismatch {
            left: m + 1,
            right: psi.len(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!(
            "time step tau = {tau} must be positive"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} must be finite and >= 0"
        )));
    }
    let base = u_prev.values();
    if let Some(j) = (1..m).find(|&j| base[j] < psi[j]) {
        return Err(Error::Infeasible(format!(
            "previous iterate lies below the obstacle at node {j} ({} < {})",
            base[j], psi[j]
        )));
    }

    let dx = u_prev.dx();
    let weights = mobility_weights(base);
    let pb = Problem {
        base,
        psi,
        lower: (1..m).map(|j| psi[j] - base[j]).collect(),
        pen_diag: (1..m).map(|j| dx * weights[j] / tau).collect(),
        lambda,
        dx,
    };

    let n = m - 1;
    let mut delta = vec![0.0; n];
    let mut phi = 0.0;
    let mut g = pb.gradient(&delta);
    // initial spectral step: inverse of a diagonal curvature estimate
    let stiff = 12.0 * (m as f64).powi(3);
    let mut alpha = 1.0 / pb.pen_diag.iter().fold(0.0f64, |a, &w| a.max(w + stiff));
    let mut iterations = 0;
    let (mut residual, mut scale) = pb.relative_residual(&delta);

    while residual > settings.tol {
        if iterations >= settings.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }
        iterations += 1;
        let use_newton = match settings.method {
            InnerMethod::Hybrid => iterations > SPG_BUDGET,
            InnerMethod::SpectralProjectedGradient => false,
            InnerMethod::ProjectedNewton => true,
        };
        let mut outcome = if use_newton {
            newton_step(&pb, &delta, phi, &g)
        } else {
            spg_step(&pb, &delta, phi, &g, alpha)
        };
        if matches!(outcome, StepOutcome::Stuck)
            && settings.method != InnerMethod::SpectralProjectedGradient
        {
            outcome = if use_newton {
                spg_step(&pb, &delta, phi, &g, alpha)
            } else {
                newton_step(&pb, &delta, phi, &g)
            };
        }
        match outcome {
            StepOutcome::Moved {
                next,
                phi: phi_next,
            } => {
                let g_next = pb.gradient(&next);
                let s: Vec<f64> = next.iter().zip(&delta).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                alpha = if sy > 0.0 {
                    (dot(&s, &s) / sy).clamp(1e-30, 1e30)
                } else {
                    1e30_f64.min(alpha * 10.0)
                };
                delta = next;
                phi = phi_next;
                g = g_next;
                (residual, scale) = pb.relative_residual(&delta);
            }
            StepOutcome::Stuck => {
                // no representable descent left; accept only a near-stationary point
                if residual <= settings.tol.sqrt() {
                    break;
                }
                return Err(Error::NonConvergence {
                    iterations,
                    residual,
                });
            }
        }
    }

    // assemble the new iterate; bound-attaining nodes sit exactly on ψ
    let full = pb.full(&delta);
    let mut values = vec![0.0; m + 1];
    for j in 1..m {
        let i = j - 1;
        values[j] = if delta[i] <= pb.lower[i] {
            psi[j]
        } else {
            (base[j] + full[j]).max(psi[j])
        };
    }
    let u = GridFunction::new(values)?;
    let velocity = GridFunction::new(full.iter().map(|d| d / tau).collect())?;

    let mut gradient = vec![0.0; m + 1];
    gradient[1..m].copy_from_slice(&g);
    let mut atoms = vec![0.0; m + 1];
    let mut active_set = Vec::new();
    for j in 1..m {
        if pb.at_bound(&delta, j - 1) {
            active_set.push(j);
            atoms[j] = gradient[j].max(0.0);
        }
    }
    let penalty = pb.penalty(&delta);
    Ok(InnerSolution {
        u,
        velocity,
        multipliers: DiscreteMeasure::new(atoms),
        active_set,
        iterations,
        residual,
        scale,
        energy_change: phi - penalty,
        penalty,
        gradient,
    })
}
