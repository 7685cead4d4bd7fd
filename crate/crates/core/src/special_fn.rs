//! Incomplete and complete elliptic integrals and the Jacobi elliptic
//! functions, in the modulus convention
//!
//! ```text
//!            x
//!           ⌠          dθ
//! F(x, q) = │  ─────────────────────        E(x, q) = ∫₀ˣ √(1 − q² sin²θ) dθ
//!           ⌡  √(1 − q² sin²θ)
//!           0
//! ```
//!
//! `K(q) = F(π/2, q)`, `E(q) = E(π/2, q)`, `am(·, q)` is the inverse of
//! `F(·, q)`, and `sn = sin∘am`, `cn = cos∘am`, `dn = √(1 − q² sn²)`.
//!
//! Integrals are evaluated by adaptive Gauss–Kronrod quadrature of the
//! defining integrands after reduction to `[-π/2, π/2]`; the amplitude is
//! found by safeguarded Newton iteration on `F` after reducing the argument
//! modulo `2K(q)`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::quadrature::integrate_tight;

/// An elliptic modulus `q ∈ [0, 1)` together with its complete integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    q: f64,
    k: f64,
    e: f64,
}

impl EllipticModulus {
    pub fn new(q: f64) -> Result<Self> {
        check_modulus(q)?;
        let k = f_reduced(FRAC_PI_2, q)?;
        let e = e_reduced(FRAC_PI_2, q)?;
        Ok(Self { q, k, e })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Complete integral of the first kind `K(q)`.
    pub fn complete_k(&self) -> f64 {
        self.k
    }

    /// Complete integral of the second kind `E(q)`.
    pub fn complete_e(&self) -> f64 {
        self.e
    }

    pub fn f(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        let (j, r) = reduce_angle(x);
        Ok(2.0 * j * self.k + f_reduced(r, self.q)?)
    }

    pub fn e_inc(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        let (j, r) = reduce_angle(x);
        Ok(2.0 * j * self.e + e_reduced(r, self.q)?)
    }

    /// Jacobi amplitude.
    pub fn am(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        if self.q == 0.0 {
            return Ok(x);
        }
        let period = 2.0 * self.k;
        let j = (x / period).round();
        let r = x - j * period;
        let a = self.am_half_period(r.abs())?;
        Ok(j * PI + r.signum() * a)
    }

    pub fn sn(&self, x: f64) -> Result<f64> {
        Ok(self.am(x)?.sin())
    }

    pub fn cn(&self, x: f64) -> Result<f64> {
        Ok(self.am(x)?.cos())
    }

    pub fn dn(&self, x: f64) -> Result<f64> {
        let s = self.sn(x)?;
        Ok((1.0 - self.q * self.q * s * s).sqrt())
    }

    /// `(sn, cn, dn)` from a single amplitude evaluation.
    pub fn sncndn(&self, x: f64) -> Result<(f64, f64, f64)> {
        let a = self.am(x)?;
        let (s, c) = a.sin_cos();
        Ok((s, c, (1.0 - self.q * self.q * s * s).sqrt()))
    }

    /// Solves `F(φ) = r` for `r ∈ [0, K]`, `φ ∈ [0, π/2]`.
    fn am_half_period(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        if r >= self.k {
            return Ok(FRAC_PI_2);
        }
        let q2 = self.q * self.q;
        let (mut lo, mut hi) = (0.0, FRAC_PI_2);
        let mut phi = FRAC_PI_2 * r / self.k;
        for _ in 0..100 {
            let resid = f_reduced(phi, self.q)? - r;
            if resid > 0.0 {
                hi = phi;
            } else {
                lo = phi;
            }
            let slope = 1.0 / (1.0 - q2 * phi.sin().powi(2)).sqrt();
            let mut next = phi - resid / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - phi).abs() <= 4.0 * f64::EPSILON * phi.max(1.0) || hi - lo <= f64::EPSILON {
                return Ok(next);
            }
            phi = next;
        }
        Err(Error::NonConvergence {
            iterations: 100,
            residual: hi - lo,
        })
    }
}

fn check_modulus(q: f64) -> Result<()> {
    if (0.0..1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("modulus q = {q} outside [0, 1)")))
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument {x} is not finite")))
    }
}

/// Writes `x = jπ + r` with `r ∈ [-π/2, π/2]`.
fn reduce_angle(x: f64) -> (f64, f64) {
    let j = (x / PI).round();
    (j, x - j * PI)
}

fn f_reduced(x: f64, q: f64) -> Result<f64> {
    if x == 0.0 || q == 0.0 {
        return Ok(x);
    }
    let q2 = q * q;
    integrate_tight(|t: f64| 1.0 / (1.0 - q2 * t.sin().powi(2)).sqrt(), 0.0, x)
}

fn e_reduced(x: f64, q: f64) -> Result<f64> {
    if x == 0.0 || q == 0.0 {
        return Ok(x);
    }
    let q2 = q * q;
    integrate_tight(|t: f64| (1.0 - q2 * t.sin().powi(2)).sqrt(), 0.0, x)
}

/// Incomplete elliptic integral of the first kind `F(x, q)`.
///
/// Admits `q = 1` for `|x| < π/2`, where the integrand is `sec θ`.
pub fn ellip_f(x: f64, q: f64) -> Result<f64> {
    if q == 1.0 {
        check_finite(x)?;
        if x.abs() >= FRAC_PI_2 {
            return Err(Error::Domain(format!(
                "F(x, 1) requires |x| < π/2, got {x}"
            )));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        return integrate_tight(|t: f64| 1.0 / t.cos(), 0.0, x);
    }
    EllipticModulus::new(q)?.f(x)
}

/// Incomplete elliptic integral of the second kind `E(x, q)`.
pub fn ellip_e_inc(x: f64, q: f64) -> Result<f64> {
    EllipticModulus::new(q)?.e_inc(x)
}

/// Complete integral `K(q)`; `K(1)` is reported as `+∞`.
pub fn ellip_k(q: f64) -> Result<f64> {
    if q == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(EllipticModulus::new(q)?.complete_k())
}

/// Complete integral `E(q)`.
pub fn ellip_e(q: f64) -> Result<f64> {
    Ok(EllipticModulus::new(q)?.complete_e())
}

pub fn am(x: f64, q: f64) -> Result<f64> {
    EllipticModulus::new(q)?.am(x)
}

pub fn sn(x: f64, q: f64) -> Result<f64> {
    EllipticModulus::new(q)?.sn(x)
}

pub fn cn(x: f64, q: f64) -> Result<f64> {
    EllipticModulus::new(q)?.cn(x)
}

pub fn dn(x: f64, q: f64) -> Result<f64> {
    EllipticModulus::new(q)?.dn(x)
}
