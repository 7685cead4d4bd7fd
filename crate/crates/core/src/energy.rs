//! Discrete graph energies on the uniform grid.
//!
//! Everything is assembled with the composite trapezoid rule over the
//! nodes. Second differences exist only at interior nodes, so the bending
//! integrand is taken as zero at the endpoints: nothing is imposed on `u''`
//! there, which is the weak form of the natural boundary condition. The
//! gradient and Hessian below are exact derivatives of these sums with
//! respect to the interior nodal values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Bending, length and penalized energy of one grid function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub length: f64,
    pub penalized: f64,
    pub lambda: f64,
}

fn require(u: &GridFunction, min: usize) -> Result<()> {
    if u.m() < min {
        Err(Error::Resolution { m: u.m(), min })
    } else {
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "length weight lambda = {lambda} must be finite and >= 0"
        )))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "time step tau = {tau} must be positive"
        )))
    }
}

pub(crate) fn d1_raw(u: &[f64]) -> Vec<f64> {
    let m = u.len() - 1;
    let inv = 0.5 * m as f64;
    let mut d = vec![0.0; m + 1];
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv;
    d[m] = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) * inv;
    for j in 1..m {
        d[j] = (u[j + 1] - u[j - 1]) * inv;
    }
    d
}

pub(crate) fn d2_raw(u: &[f64]) -> Vec<f64> {
    let m = u.len() - 1;
    let inv = (m * m) as f64;
    let mut d = vec![0.0; m + 1];
    for j in 1..m {
        d[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv;
    }
    d
}

/// First derivative: central differences inside, second-order one-sided
/// differences at the endpoints.
pub fn d1(u: &GridFunction) -> Result<Vec<f64>> {
    require(u, 4)?;
    Ok(d1_raw(u.values()))
}

/// Central second differences at interior nodes; the endpoint entries are
/// zero.
pub fn d2(u: &GridFunction) -> Result<Vec<f64>> {
    require(u, 4)?;
    Ok(d2_raw(u.values()))
}

/// Trapezoid weight of node `j` in units of `Δx`.
fn trapezoid_weight(j: usize, m: usize) -> f64 {
    if j == 0 || j == m {
        0.5
    } else {
        1.0
    }
}

pub(crate) fn bending_raw(u: &[f64]) -> f64 {
    let m = u.len() - 1;
    let p = d2_raw(u);
    let q = d1_raw(u);
    let sum: f64 = (1..m)
        .map(|j| p[j] * p[j] * (1.0 + q[j] * q[j]).powf(-2.5))
        .sum();
    sum / m as f64
}

pub(crate) fn length_raw(u: &[f64]) -> f64 {
    let m = u.len() - 1;
    let q = d1_raw(u);
    let sum: f64 = (0..=m)
        .map(|j| trapezoid_weight(j, m) * (1.0 + q[j] * q[j]).sqrt())
        .sum();
    sum / m as f64
}

/// `∫ (u'')² (1 + (u')²)^{-5/2} dx`.
pub fn bending(u: &GridFunction) -> Result<f64> {
    require(u, 4)?;
    Ok(bending_raw(u.values()))
}

/// `∫ √(1 + (u')²) dx`.
pub fn length(u: &GridFunction) -> Result<f64> {
    require(u, 2)?;
    Ok(length_raw(u.values()))
}

pub fn energy(u: &GridFunction, lambda: f64) -> Result<EnergyBreakdown> {
    check_lambda(lambda)?;
    let bending = bending(u)?;
    let length = length(u)?;
    Ok(EnergyBreakdown {
        bending,
        length,
        penalized: bending + lambda * length,
        lambda,
    })
}

/// Weights `1/√(1 + (u')²)` of the movement penalty, per node.
pub(crate) fn mobility_weights(u_prev: &[f64]) -> Vec<f64> {
    d1_raw(u_prev)
        .iter()
        .map(|q| 1.0 / (1.0 + q * q).sqrt())
        .collect()
}

/// Movement penalty `(1/2τ) ∫ |v − u_prev|² / √(1 + (u_prev')²) dx`.
pub fn penalty(v: &GridFunction, u_prev: &GridFunction, tau: f64) -> Result<f64> {
    v.ensure_same_grid(u_prev)?;
    check_tau(tau)?;
    require(u_prev, 2)?;
    let weights = mobility_weights(u_prev.values());
    let m = v.m();
    let sum: f64 = (1..m)
        .map(|j| {
            let d = v.values()[j] - u_prev.values()[j];
            weights[j] * d * d
        })
        .sum();
    Ok(sum / (2.0 * tau * m as f64))
}

/// Applies the transpose of the first-difference operator to nodal
/// coefficients, accumulating into `out` (interior entries only). With
/// `abs` every stencil entry enters with its absolute value.
fn d1_transpose_add(coef: &[f64], out: &mut [f64], abs: bool) {
    let m = coef.len() - 1;
    let inv = 0.5 * m as f64;
    let neg = if abs { 1.0 } else { -1.0 };
    // endpoint rows
    out[1] += 4.0 * inv * coef[0];
    out[2] += neg * inv * coef[0];
    out[m - 1] += neg * 4.0 * inv * coef[m];
    out[m - 2] += inv * coef[m];
    for j in 1..m {
        let c = coef[j] * inv;
        if j + 1 < m {
            out[j + 1] += c;
        }
        if j > 1 {
            out[j - 1] += neg * c;
        }
    }
}

fn d2_transpose_add(coef: &[f64], out: &mut [f64], abs: bool) {
    let m = coef.len() - 1;
    let inv = (m * m) as f64;
    let neg = if abs { 1.0 } else { -1.0 };
    for j in 1..m {
        let c = coef[j] * inv;
        out[j] += neg * 2.0 * c;
        if j + 1 < m {
            out[j + 1] += c;
        }
        if j > 1 {
            out[j - 1] += c;
        }
    }
}

fn gradient_sum(u: &[f64], lambda: f64, abs: bool) -> Vec<f64> {
    let m = u.len() - 1;
    let dx = 1.0 / m as f64;
    let p = d2_raw(u);
    let q = d1_raw(u);
    let mut coef_p = vec![0.0; m + 1];
    let mut coef_q = vec![0.0; m + 1];
    for j in 0..=m {
        let s = 1.0 + q[j] * q[j];
        let mut bend_q = 0.0;
        if j > 0 && j < m {
            coef_p[j] = dx * 2.0 * p[j] * s.powf(-2.5);
            bend_q = dx * (-5.0) * p[j] * p[j] * q[j] * s.powf(-3.5);
        }
        let len_q = dx * lambda * trapezoid_weight(j, m) * q[j] / s.sqrt();
        coef_q[j] = if abs {
            bend_q.abs() + len_q.abs()
        } else {
            bend_q + len_q
        };
        if abs {
            coef_p[j] = coef_p[j].abs();
        }
    }
    let mut g = vec![0.0; m + 1];
    d2_transpose_add(&coef_p, &mut g, abs);
    d1_transpose_add(&coef_q, &mut g, abs);
    g[0] = 0.0;
    g[m] = 0.0;
    g
}

pub(crate) fn energy_gradient_raw(u: &[f64], lambda: f64) -> Vec<f64> {
    gradient_sum(u, lambda, false)
}

/// Sum of the absolute values of the terms that make up each gradient
/// entry; the rounding error of the gradient is a small multiple of
/// machine precision times this.
pub(crate) fn energy_gradient_magnitude_raw(u: &[f64], lambda: f64) -> Vec<f64> {
    gradient_sum(u, lambda, true)
}

/// Gradient of the discrete penalized energy with respect to the interior
/// nodal values (endpoint entries are zero).
pub fn energy_gradient(u: &GridFunction, lambda: f64) -> Result<Vec<f64>> {
    require(u, 4)?;
    check_lambda(lambda)?;
    Ok(energy_gradient_raw(u.values(), lambda))
}

/// Gradient of `G(v) = E_λ(v) + P(v; u_prev, τ)` with respect to the
/// interior nodal values of `v`. Entry `j` equals the first variation of
/// the discrete objective in the direction of the hat function at node `j`.
pub fn grad_g(v: &GridFunction, u_prev: &GridFunction, tau: f64, lambda: f64) -> Result<Vec<f64>> {
    v.ensure_same_grid(u_prev)?;
    check_tau(tau)?;
    let mut g = energy_gradient(v, lambda)?;
    let weights = mobility_weights(u_prev.values());
    let m = v.m();
    let dx = v.dx();
    for j in 1..m {
        g[j] += dx * weights[j] * (v.values()[j] - u_prev.values()[j]) / tau;
    }
    Ok(g)
}

/// Dense Hessian of the discrete penalized energy over the `m − 1` interior
/// unknowns.
pub fn energy_hessian(u: &GridFunction, lambda: f64) -> Result<DMatrix<f64>> {
    require(u, 4)?;
    check_lambda(lambda)?;
    Ok(energy_hessian_raw(u.values(), lambda))
}

pub(crate) fn energy_hessian_raw(u: &[f64], lambda: f64) -> DMatrix<f64> {
    let m = u.len() - 1;
    let n = m - 1;
    let mf = m as f64;
    let dx = 1.0 / mf;
    let p = d2_raw(u);
    let q = d1_raw(u);
    let mut h = DMatrix::<f64>::zeros(n, n);

    // Stencils as (node, coefficient); only interior nodes are unknowns.
    let d1_stencil = |j: usize| -> Vec<(usize, f64)> {
        let inv = 0.5 * mf;
        if j == 0 {
            vec![(1, 4.0 * inv), (2, -inv)]
        } else if j == m {
            vec![(m - 1, -4.0 * inv), (m - 2, inv)]
        } else {
            vec![(j + 1, inv), (j - 1, -inv)]
        }
    };
    let d2_stencil = |j: usize| -> Vec<(usize, f64)> {
        let inv = mf * mf;
        vec![(j - 1, inv), (j, -2.0 * inv), (j + 1, inv)]
    };
    let mut add = |a: &[(usize, f64)], b: &[(usize, f64)], w: f64| {
        for &(ia, ca) in a {
            if ia == 0 || ia == m {
                continue;
            }
            for &(ib, cb) in b {
                if ib == 0 || ib == m {
                    continue;
                }
                h[(ia - 1, ib - 1)] += w * ca * cb;
            }
        }
    };

    for j in 0..=m {
        let s = 1.0 + q[j] * q[j];
        let sq = d1_stencil(j);
        let mut w_qq = lambda * trapezoid_weight(j, m) * s.powf(-1.5);
        if j > 0 && j < m {
            let sp = d2_stencil(j);
            let w_pp = 2.0 * s.powf(-2.5);
            let w_pq = -10.0 * p[j] * q[j] * s.powf(-3.5);
            w_qq += p[j] * p[j] * (-5.0 * s.powf(-3.5) + 35.0 * q[j] * q[j] * s.powf(-4.5));
            add(&sp, &sp, dx * w_pp);
            add(&sp, &sq, dx * w_pq);
            add(&sq, &sp, dx * w_pq);
        }
        add(&sq, &sq, dx * w_qq);
    }
    h
}

/// `E_λ(base + δ) − E_λ(base)` evaluated term by term without the
/// cancellation of subtracting two nearly equal totals.
pub(crate) fn energy_increment_raw(base: &[f64], delta: &[f64], lambda: f64) -> f64 {
    let m = base.len() - 1;
    let p = d2_raw(base);
    let q = d1_raw(base);
    let dp = d2_raw(delta);
    let dq = d1_raw(delta);
    let mut sum = 0.0;
    for j in 0..=m {
        let s = 1.0 + q[j] * q[j];
        // s' − s, exactly factored
        let ds = dq[j] * (2.0 * q[j] + dq[j]);
        if j > 0 && j < m {
            // p'² s'^{-5/2} − p² s^{-5/2}
            //   = (p'² − p²) s'^{-5/2} + p² (s'^{-5/2} − s^{-5/2})
            let s_new_pow = (1.0 + (q[j] + dq[j]).powi(2)).powf(-2.5);
            let pow_diff = s.powf(-2.5) * (-2.5 * (ds / s).ln_1p()).exp_m1();
            sum += dp[j] * (2.0 * p[j] + dp[j]) * s_new_pow + p[j] * p[j] * pow_diff;
        }
        if lambda != 0.0 {
            let root_new = (1.0 + (q[j] + dq[j]).powi(2)).sqrt();
            sum += lambda * trapezoid_weight(j, m) * ds / (root_new + s.sqrt());
        }
    }
    sum / m as f64
}

/// L² norm of the discrete second derivative, the norm of `H²∩H¹₀`.
pub fn h_norm(u: &GridFunction) -> Result<f64> {
    require(u, 4)?;
    let p = d2_raw(u.values());
    Ok((p.iter().map(|v| v * v).sum::<f64>() * u.dx()).sqrt())
}

/// `(‖u‖_∞, ‖u'‖_∞)` over the nodes.
pub fn sup_norms(u: &GridFunction) -> Result<(f64, f64)> {
    require(u, 4)?;
    let q = d1_raw(u.values());
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    Ok((sup(u.values()), sup(&q)))
}

pub(crate) fn trapezoid_l2(values: &[f64]) -> f64 {
    let m = values.len() - 1;
    let sum: f64 = (0..=m)
        .map(|j| trapezoid_weight(j, m) * values[j] * values[j])
        .sum();
    (sum / m as f64).sqrt()
}

/// Trapezoid L² norm of the nodal values.
pub fn l2_norm(u: &GridFunction) -> f64 {
    trapezoid_l2(u.values())
}

/// Discrete `H²` norm `(‖u‖² + ‖u'‖² + ‖u''‖²)^{1/2}`.
pub fn h2_norm(u: &GridFunction) -> Result<f64> {
    require(u, 4)?;
    let a = l2_norm(u);
    let b = trapezoid_l2(&d1_raw(u.values()));
    let c = h_norm(u)?;
    Ok((a * a + b * b + c * c).sqrt())
}
