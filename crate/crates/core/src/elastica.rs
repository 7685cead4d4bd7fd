//! Rectangular elastica, the pinned and clamped threshold heights, and the
//! symmetric stationary profile under a cone obstacle.
//!
//! The reference arc `Γ` has curvature `k(s) = −√2 cn(s − K, 1/√2)` on
//! `[0, 2K]`, starts at the origin and (in the closed form used here) leaves
//! it vertically. Writing `σ = s − K`, its tangent angle and position are
//!
//! ```text
//! θ(s) = −2 asin(sn σ / √2)
//! x(s) = 2 E(am σ) − σ + 2E − K
//! y(s) = √2 cn σ
//! ```
//!
//! with modulus `1/√2` throughout.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::quadrature::integrate_tight;
use crate::special_fn::EllipticModulus;

fn rect_modulus() -> &'static EllipticModulus {
    static MODULUS: OnceLock<EllipticModulus> = OnceLock::new();
    MODULUS
        .get_or_init(|| EllipticModulus::new(FRAC_1_SQRT_2).expect("1/sqrt(2) is a valid modulus"))
}

/// `K(1/√2)`, the quarter period of the rectangular elastica.
pub fn rect_quarter_period() -> f64 {
    rect_modulus().complete_k()
}

/// Signed curvature `−√2 cn(s − K(1/√2), 1/√2)`; `NaN` for non-finite `s`.
pub fn rect_curvature(s: f64) -> f64 {
    let md = rect_modulus();
    md.cn(s - md.complete_k())
        .map(|c| -SQRT_2 * c)
        .unwrap_or(f64::NAN)
}

/// Arclength derivative `k'(s) = √2 sn(σ) dn(σ)`.
pub fn rect_curvature_slope(s: f64) -> f64 {
    let md = rect_modulus();
    md.sncndn(s - md.complete_k())
        .map(|(sn, _, dn)| SQRT_2 * sn * dn)
        .unwrap_or(f64::NAN)
}

/// A point of the reference arc with initial tangent angle `π/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Closed-form position and tangent angle of the reference arc.
pub fn rect_point(s: f64) -> Result<ArcPoint> {
    let md = rect_modulus();
    let (k, e) = (md.complete_k(), md.complete_e());
    let sigma = s - k;
    let a = md.am(sigma)?;
    let (sn, cn) = a.sin_cos();
    Ok(ArcPoint {
        x: 2.0 * md.e_inc(a)? - sigma + 2.0 * e - k,
        y: SQRT_2 * cn,
        theta: -2.0 * (sn * FRAC_1_SQRT_2).asin(),
    })
}

/// Arclength-sampled planar arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticaArc {
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub theta: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

impl ElasticaArc {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Integrates the unit-speed arc with curvature [`rect_curvature`] from the
/// origin with initial angle `theta0`, one classical RK4 step per sample
/// interval.
pub fn rect_arc(s_max: f64, samples: usize, theta0: f64) -> Result<ElasticaArc> {
    let full = 2.0 * rect_quarter_period();
    if !(s_max > 0.0 && s_max <= full * (1.0 + 1e-14)) {
        return Err(Error::Domain(format!(
            "s_max = {s_max} outside (0, 2K(1/sqrt 2)]"
        )));
    }
    if samples < 2 {
        return Err(Error::Domain("rect_arc needs at least two samples".into()));
    }
    if !theta0.is_finite() {
        return Err(Error::Domain("initial angle must be finite".into()));
    }
    let h = s_max / (samples - 1) as f64;
    let mut arc = ElasticaArc {
        s: Vec::with_capacity(samples),
        k: Vec::with_capacity(samples),
        theta: Vec::with_capacity(samples),
        points: Vec::with_capacity(samples),
    };
    let (mut theta, mut x, mut y) = (theta0, 0.0, 0.0);
    let mut k_here = rect_curvature(0.0);
    for i in 0..samples {
        let s = i as f64 * h;
        arc.s.push(s);
        arc.k.push(k_here);
        arc.theta.push(theta);
        arc.points.push([x, y]);
        if i + 1 == samples {
            break;
        }
        let k_mid = rect_curvature(s + 0.5 * h);
        let k_next = rect_curvature(s + h);
        // state (θ, x, y) with θ' = k(s), x' = cos θ, y' = sin θ; the θ
        // stages do not depend on the state
        let t1 = theta;
        let t2 = theta + 0.5 * h * k_here;
        let t3 = theta + 0.5 * h * k_mid;
        let t4 = theta + h * k_mid;
        let dtheta = h / 6.0 * (k_here + 4.0 * k_mid + k_next);
        x += h / 6.0 * (t1.cos() + 2.0 * t2.cos() + 2.0 * t3.cos() + t4.cos());
        y += h / 6.0 * (t1.sin() + 2.0 * t2.sin() + 2.0 * t3.sin() + t4.sin());
        theta += dtheta;
        k_here = k_next;
    }
    Ok(arc)
}

/// `∫₀^{atan z} √(cos θ) dθ`, i.e. `∫₀ᶻ (1 + y²)^{-5/4} dy` after `y = tan θ`.
pub fn clamped_g(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("G(z) needs z >= 0, got {z}")));
    }
    if z.is_infinite() {
        return Ok(0.5 * c0());
    }
    integrate_tight(|t: f64| t.cos().max(0.0).sqrt(), 0.0, z.atan())
}

/// `c₀ = 2 ∫₀^∞ (1 + y²)^{-5/4} dy ≈ 2.39628`.
///
/// Evaluated as `2 ∫₀^{√(π/2)} 2t √(sin t²) dt`, which removes the square-root
/// endpoint singularity of `√(cos θ)` at `θ = π/2`.
pub fn c0() -> f64 {
    static C0: OnceLock<f64> = OnceLock::new();
    *C0.get_or_init(|| {
        2.0 * integrate_tight(
            |t: f64| 2.0 * t * (t * t).sin().sqrt(),
            0.0,
            FRAC_PI_2.sqrt(),
        )
        .expect("smooth integrand on a finite interval")
    })
}

/// Pinned threshold height `h* = 2/c₀ ≈ 0.83462`.
pub fn h_star() -> f64 {
    2.0 / c0()
}

/// `(1/2)(2 + 2(1 + z²)^{-1/4}) / (c₀ − G(z))`.
pub fn clamped_objective(z: f64) -> Result<f64> {
    let c = c0();
    if z.is_infinite() {
        return Ok(1.0 / (c - 0.5 * c));
    }
    Ok((1.0 + (1.0 + z * z).powf(-0.25)) / (c - clamped_g(z)?))
}

/// Clamped threshold height `h^* = max_z clamped_objective(z) ≈ 1.1890`.
///
/// Coarse scan of `z ∈ [0, 50]`, golden-section refinement around the best
/// sample, and comparison with the limit value `2/c₀` as `z → ∞`.
pub fn h_star_clamped() -> f64 {
    static H: OnceLock<f64> = OnceLock::new();
    *H.get_or_init(|| {
        let obj = |z: f64| clamped_objective(z).expect("z >= 0");
        let (z_max, cells) = (50.0, 500);
        let dz = z_max / cells as f64;
        let best = (0..=cells)
            .map(|i| (i, obj(i as f64 * dz)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty scan")
            .0;
        let lo = (best.max(1) - 1) as f64 * dz;
        let hi = ((best + 1).min(cells)) as f64 * dz;
        let peak = golden_section_max(obj, lo, hi, 1e-12);
        peak.max(obj(f64::INFINITY))
    })
}

/// Maximizes a unimodal function on `[a, b]`.
pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// The symmetric stationary profile together with the arc data it was cut
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    pub height: f64,
    /// Cut parameter: the left half is the image of `Γ|[0, s0]`.
    pub s0: f64,
    /// Rotation applied to `Γ` (radians).
    pub rotation: f64,
    /// Dilation applied to `Γ`.
    pub dilation: f64,
    pub profile: GridFunction,
}

impl StationaryProfile {
    /// One-sided limit `u'''(1/2⁻)`; the right limit is its negative.
    pub fn tip_third_derivative(&self) -> f64 {
        rect_curvature_slope(self.s0) / (self.dilation * self.dilation)
    }

    /// Maximum of `|k_u|` along the left half.
    pub fn max_curvature(&self) -> f64 {
        rect_curvature(self.s0).abs() / self.dilation
    }

    fn map(&self, s: f64) -> Result<(f64, f64, f64)> {
        let p = rect_point(s)?;
        let (sr, cr) = self.rotation.sin_cos();
        Ok((
            self.dilation * (cr * p.x - sr * p.y),
            self.dilation * (sr * p.x + cr * p.y),
            p.theta + self.rotation,
        ))
    }
}

/// Mismatch between the end tangent and the horizontal once the chord of
/// `Γ|[0, s0]` is rotated onto the segment from `(0, 0)` to `(1/2, h)`.
fn tip_mismatch(s0: f64, chord_angle: f64) -> Result<f64> {
    let p = rect_point(s0)?;
    Ok(p.y.atan2(p.x) - p.theta - chord_angle)
}

/// Symmetric stationary solution under the cone of height `h` with tip at
/// `x = 1/2`, sampled on `m + 1` nodes.
pub fn symmetric_stationary(h: f64, m: usize) -> Result<GridFunction> {
    Ok(stationary_profile(h, m)?.profile)
}

pub fn stationary_profile(h: f64, m: usize) -> Result<StationaryProfile> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!(
            "cone height must be positive, got {h}"
        )));
    }
    if h >= h_star() {
        return Err(Error::Domain(format!(
            "height {h} >= h* = {}: there exists no symmetric minimizer",
            h_star()
        )));
    }
    if m < 16 || m % 2 != 0 {
        return Err(Error::Domain(format!(
            "grid size m = {m} must be even and >= 16"
        )));
    }

    let chord_angle = (2.0 * h).atan();
    let k = rect_quarter_period();
    let (mut lo, mut hi) = (1e-6 * k, k);
    let (f_lo, f_hi) = (
        tip_mismatch(lo, chord_angle)?,
        tip_mismatch(hi, chord_angle)?,
    );
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f_lo.abs().min(f_hi.abs()),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tip_mismatch(mid, chord_angle)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let s0 = 0.5 * (lo + hi);
    let end = rect_point(s0)?;
    let chord = (end.x * end.x + end.y * end.y).sqrt();
    let mut stationary = StationaryProfile {
        height: h,
        s0,
        rotation: chord_angle - end.y.atan2(end.x),
        dilation: (0.25 + h * h).sqrt() / chord,
        profile: GridFunction::zeros(m)?,
    };

    let half = m / 2;
    let mut values = vec![0.0; m + 1];
    values[half] = h;
    let mut s_guess = 0.0;
    for j in 1..half {
        let target = j as f64 / m as f64;
        let s = invert_abscissa(&stationary, target, s_guess, s0)?;
        s_guess = s;
        let (_, y, _) = stationary.map(s)?;
        values[j] = y;
        values[m - j] = y;
    }
    stationary.profile = GridFunction::new(values)?;
    Ok(stationary)
}

/// Finds `s ∈ [lower, s0]` with mapped abscissa equal to `target`.
fn invert_abscissa(st: &StationaryProfile, target: f64, lower: f64, s0: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lower, s0);
    let mut s = 0.5 * (lo + hi);
    for it in 0..200 {
        let (x, _, angle) = st.map(s)?;
        let resid = x - target;
        if resid.abs() <= 1e-15 {
            return Ok(s);
        }
        if resid > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = st.dilation * angle.cos();
        if slope <= 0.0 {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: resid.abs(),
            });
        }
        let newton = s - resid / slope;
        if newton > lo && newton < hi {
            if (newton - s).abs() <= 2.0 * f64::EPSILON * s.max(1.0) {
                return Ok(newton);
            }
            s = newton;
        } else {
            s = 0.5 * (lo + hi);
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                return Ok(s);
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: 200,
        residual: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{d1, d2};
    use crate::grid::ObstacleSpec;

    #[test]
    fn curvature_special_values() {
        let k = rect_quarter_period();
        assert!((rect_curvature(k) + SQRT_2).abs() < 1e-14);
        assert!(rect_curvature(0.0).abs() < 1e-12);
        assert!(rect_curvature(2.0 * k).abs() < 1e-12);
        assert!(rect_curvature(f64::NAN).is_nan());
    }

    #[test]
    fn curvature_is_negative_and_decreasing_on_first_quarter() {
        let k = rect_quarter_period();
        let vals: Vec<_> = (1..100)
            .map(|i| rect_curvature(k * i as f64 / 100.0))
            .collect();
        assert!(vals.iter().all(|&v| v < 0.0));
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!((1..100).all(|i| rect_curvature_slope(k * i as f64 / 100.0) < 0.0));
    }

    #[test]
    fn curvature_solves_the_rectangular_elastica_equation() {
        let k = rect_quarter_period();
        let mut worst = [0.0f64; 2];
        for (idx, h) in [2e-2, 1e-2].into_iter().enumerate() {
            for i in 1..20 {
                let s = 2.0 * k * i as f64 / 20.0;
                let (a, b, c) = (
                    rect_curvature(s - h),
                    rect_curvature(s),
                    rect_curvature(s + h),
                );
                let kss = (a - 2.0 * b + c) / (h * h);
                worst[idx] = worst[idx].max((2.0 * kss + b * b * b).abs());
            }
        }
        // second-order residual: halving the step quarters it
        assert!(worst[0] < 1e-3 && worst[1] < 0.3 * worst[0], "{worst:?}");
    }

    #[test]
    fn closed_form_matches_runge_kutta() {
        let full = 2.0 * rect_quarter_period();
        let arc = rect_arc(full, 401, FRAC_PI_2).unwrap();
        for i in (0..401).step_by(50) {
            let p = rect_point(arc.s[i]).unwrap();
            assert!((p.x - arc.points[i][0]).abs() < 1e-9, "x at {i}");
            assert!((p.y - arc.points[i][1]).abs() < 1e-9, "y at {i}");
            assert!((p.theta - arc.theta[i]).abs() < 1e-9, "theta at {i}");
        }
        // chord horizontal and zero net turning by symmetry
        let last = arc.points[400];
        assert!(last[1].abs() < 1e-9);
        assert!((arc.theta[400] + FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn runge_kutta_converges_at_fourth_order() {
        let full = 2.0 * rect_quarter_period();
        let exact = rect_point(full).unwrap();
        let err = |n: usize| {
            let a = rect_arc(full, n, FRAC_PI_2).unwrap();
            let p = a.points[n - 1];
            ((p[0] - exact.x).powi(2) + (p[1] - exact.y).powi(2)).sqrt()
        };
        let (e1, e2) = (err(21), err(41));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn arc_domain_and_degenerate_limits() {
        assert!(rect_arc(0.0, 10, 0.0).is_err());
        assert!(rect_arc(10.0, 10, 0.0).is_err());
        assert!(rect_arc(1.0, 1, 0.0).is_err());
        let tiny = rect_arc(1e-9, 3, 0.3).unwrap();
        assert!(tiny.points[2][0].abs() < 1e-8 && tiny.points[2][1].abs() < 1e-8);
        assert!((tiny.points[2][0] / 1e-9 - 0.3f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn threshold_constants() {
        let gamma_form = 1.198_140_234_735_592; // (√π/2)Γ(3/4)/Γ(5/4)
        assert!((c0() - 2.0 * gamma_form).abs() < 1e-12);
        assert!((h_star() - 0.83462).abs() < 5e-5);
        assert!((h_star() * c0() - 2.0).abs() < 1e-15);
        assert!((clamped_g(f64::INFINITY).unwrap() - gamma_form).abs() < 1e-12);
        assert!((h_star_clamped() - 1.1890).abs() < 1e-3);
        assert!((clamped_objective(0.0).unwrap() - h_star()).abs() < 1e-12);
        assert!((clamped_objective(f64::INFINITY).unwrap() - h_star()).abs() < 1e-12);
        assert!((clamped_objective(1e8).unwrap() - h_star()).abs() < 1e-3);
    }

    #[test]
    fn pinned_threshold_is_the_full_arc_aspect_ratio() {
        let end = rect_point(2.0 * rect_quarter_period()).unwrap();
        let top = rect_point(rect_quarter_period()).unwrap();
        assert!((top.y / end.x - h_star()).abs() < 1e-12);
    }

    #[test]
    fn stationary_profile_properties() {
        let h = 0.5 * h_star();
        let m = 128;
        let st = stationary_profile(h, m).unwrap();
        let u = &st.profile;
        assert_eq!(u.values()[m / 2], h);
        assert!(st.s0 > 0.0 && st.s0 < rect_quarter_period());
        // concave, symmetric, touching the cone only at the tip
        let p = d2(u).unwrap();
        assert!(p[1..m].iter().all(|&v| v < 0.0));
        assert_eq!(u.values(), u.reflected().values());
        let psi = ObstacleSpec::cone(h).sample(m);
        for j in 0..=m {
            if j == m / 2 {
                assert_eq!(u.values()[j], psi[j]);
            } else {
                assert!(u.values()[j] > psi[j]);
            }
        }
        // horizontal tangent at the tip
        let q = d1(u).unwrap();
        assert!(q[m / 2].abs() < 1e-14);
        assert!(st.tip_third_derivative() < 0.0);
    }

    #[test]
    fn stationary_profile_limits_and_errors() {
        let flat = stationary_profile(1e-3, 64).unwrap();
        assert!(flat.max_curvature() < 1e-1);
        let (_, slope) = crate::energy::sup_norms(&flat.profile).unwrap();
        assert!(slope < 1e-2, "{slope}");
        assert!(symmetric_stationary(0.8 * h_star(), 64).is_ok());
        assert!(matches!(
            symmetric_stationary(1.01 * h_star(), 64),
            Err(Error::Domain(_))
        ));
        assert!(symmetric_stationary(0.0, 64).is_err());
        assert!(symmetric_stationary(0.3, 15).is_err());
        assert!(symmetric_stationary(0.3, 18).is_ok());
    }

    #[test]
    fn profile_nodes_match_bisection_inversion() {
        let m = 256;
        let st = stationary_profile(0.4, m).unwrap();
        let (sr, cr) = st.rotation.sin_cos();
        let map = |s: f64| {
            let p = rect_point(s).unwrap();
            (
                st.dilation * (cr * p.x - sr * p.y),
                st.dilation * (sr * p.x + cr * p.y),
            )
        };
        for j in 1..m / 2 {
            let target = j as f64 / m as f64;
            let (mut lo, mut hi) = (0.0, st.s0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if map(mid).0 < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let y = map(0.5 * (lo + hi)).1;
            assert!((st.profile.values()[j] - y).abs() < 1e-14, "node {j}");
        }
    }
}
