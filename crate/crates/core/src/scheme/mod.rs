//! Minimizing movements for the obstacle problem: parameter selection,
//! the chained step problems and the time interpolants of the discrete flow.

mod inner;

pub use inner::{activation_tolerance, inner_minimize, InnerMethod, InnerSettings, InnerSolution};

use serde::{Deserialize, Serialize};

use crate::energy::{d1, energy, h_norm, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, ObstacleSpec};

/// Steps whose slope exceeds this multiple of `M0` are reported (the
/// continuous theory keeps the flow below it).
pub const SLOPE_WARNING_FACTOR: f64 = 1.5;

/// Nodal multiplier: `atoms[j]` is the measure tested against the hat at `x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<f64>,
    pub total: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>) -> Self {
        let total = atoms.iter().sum();
        Self { atoms, total }
    }

    pub fn zero(m: usize) -> Self {
        Self::new(vec![0.0; m + 1])
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(0.0, f64::max)
    }
}

/// How the horizon is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Largest `T` allowed by the a-priori slope estimate.
    Auto,
    Fixed(f64),
}

/// `M0`, `ρ` and the automatically selected horizon for a datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonChoice {
    #[serde(rename = "M0")]
    pub m0: f64,
    pub rho: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// `ρ = max{(1 + 4 M0²)^{5/4}, √2} · E^{1/2}`.
pub fn a_priori_radius(m0: f64, energy: f64) -> f64 {
    (1.0 + 4.0 * m0 * m0).powf(1.25).max(2f64.sqrt()) * energy.sqrt()
}

/// Largest `T` with `√2 (1 + 4 M0²)^{1/16} ρ T^{1/8} ≤ M0/2`.
pub fn horizon_for(m0: f64, rho: f64) -> f64 {
    (m0 / (2.0 * 2f64.sqrt() * (1.0 + 4.0 * m0 * m0).powf(1.0 / 16.0) * rho)).powi(8)
}

fn max_slope(u: &GridFunction) -> Result<f64> {
    Ok(d1(u)?.iter().fold(0.0f64, |a, s| a.max(s.abs())))
}

pub fn auto_horizon(u0: &GridFunction, lambda: f64) -> Result<HorizonChoice> {
    let m0 = max_slope(u0)?;
    if m0 == 0.0 {
        return Err(Error::DegenerateDatum);
    }
    let rho = a_priori_radius(m0, energy(u0, lambda)?.penalized);
    Ok(HorizonChoice {
        m0,
        rho,
        horizon: horizon_for(m0, rho),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tau: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
    pub rho: f64,
    pub cap: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    #[serde(default)]
    pub inner_method: InnerMethod,
}

impl SchemeParams {
    /// Derives all parameters from the datum. A flat datum needs a fixed horizon.
    pub fn new(
        u0: &GridFunction,
        lambda: f64,
        n: usize,
        horizon: Horizon,
        inner: InnerSettings,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda = {lambda} must be finite and >= 0"
            )));
        }
        if n == 0 {
            return Err(Error::Domain(
                "number of time steps must be positive".into(),
            ));
        }
        if !(inner.tol > 0.0) || inner.max_iter == 0 {
            return Err(Error::Domain(
                "inner tolerance and iteration budget must be positive".into(),
            ));
        }
        let m0 = max_slope(u0)?;
        let rho = a_priori_radius(m0, energy(u0, lambda)?.penalized);
        let horizon = match horizon {
            Horizon::Auto => auto_horizon(u0, lambda)?.horizon,
            Horizon::Fixed(t) if t > 0.0 && t.is_finite() => t,
            Horizon::Fixed(t) => {
                return Err(Error::Domain(format!("horizon T = {t} must be positive")))
            }
        };
        Ok(Self {
            lambda,
            m: u0.m(),
            n,
            horizon,
            tau: horizon / n as f64,
            m0,
            rho,
            cap: 2.0 * m0,
            inner_tol: inner.tol,
            inner_max_iter: inner.max_iter,
            inner_method: inner.method,
        })
    }

    pub fn inner_settings(&self) -> InnerSettings {
        InnerSettings {
            tol: self.inner_tol,
            max_iter: self.inner_max_iter,
            method: self.inner_method,
        }
    }

    /// Bound on the discrete `‖u_i''‖_{L²}` along the flow.
    pub fn h2_bound(&self, initial_energy: f64) -> f64 {
        (1.0 + 4.0 * self.m0 * self.m0).powf(1.25) * initial_energy.sqrt()
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Domain(format!(
                "time step tau = {} must be positive",
                self.tau
            )));
        }
        if self.tau != self.horizon / self.n as f64 {
            return Err(Error::Config("tau must equal T/n".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub u: GridFunction,
    /// `(u_i − u_{i−1})/τ`; zero for the initial datum.
    pub w: GridFunction,
    pub energy: EnergyBreakdown,
    /// `E(u_{i−1}) − E(u_i)`, evaluated without cancellation.
    pub energy_drop: f64,
    pub penalty_value: f64,
    pub multipliers: DiscreteMeasure,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub residual_scale: f64,
    pub max_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NonConvergence,
    CapViolation,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed {
        step: usize,
        kind: FailureKind,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub initial_energy: f64,
    pub final_energy: f64,
    /// `Σ 2·P_i`.
    pub dissipation: f64,
    pub max_slope: f64,
    /// Some step exceeded `1.5·M0` (the cap itself is `2·M0`).
    pub slope_warning: bool,
    /// Largest discrete `‖u_i''‖_{L²}`.
    pub max_h2: f64,
    pub h2_bound: f64,
    /// `τ Σ_i (μ_i total)²`.
    pub measure_sum: f64,
    /// Endpoint neighbourhoods of this width are never in contact.
    pub boundary_radius: f64,
    pub total_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub params: SchemeParams,
    pub obstacle: ObstacleSpec,
    /// `ψ(x_j)` used for every step.
    pub psi: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub status: RunStatus,
    pub summary: RunSummary,
}

impl FlowResult {
    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Completed && self.steps.len() == self.params.n + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.params.tau
    }

    pub fn initial(&self) -> &StepRecord {
        &self.steps[0]
    }

    pub fn last(&self) -> &StepRecord {
        &self.steps[self.steps.len() - 1]
    }
}

/// Half-widths of the endpoint neighbourhoods guaranteed free of contact
/// when every slope is at most `slope_bound`.
pub fn boundary_radius(psi: &ObstacleSpec, slope_bound: f64) -> f64 {
    one_sided_radius(|x| psi.eval(x), slope_bound)
        .min(one_sided_radius(|x| psi.eval(1.0 - x), slope_bound))
}

fn one_sided_radius(psi: impl Fn(f64) -> f64, slope_bound: f64) -> f64 {
    let p0 = psi(0.0);
    if !(p0 < 0.0) {
        return 0.0;
    }
    // extent of ψ < ¾ψ(0), scanned on a fine grid
    const CELLS: usize = 1 << 14;
    let mut delta0 = 0.5;
    for k in 1..=CELLS / 2 {
        let x = k as f64 / CELLS as f64;
        if psi(x) >= 0.75 * p0 {
            delta0 = (k - 1) as f64 / CELLS as f64;
            break;
        }
    }
    if slope_bound > 0.0 {
        delta0.min(-p0 / (4.0 * slope_bound))
    } else {
        delta0
    }
}

fn active_nodes(u: &GridFunction, psi: &[f64]) -> Vec<usize> {
    let v = u.values();
    (1..u.m())
        .filter(|&j| v[j] - psi[j] <= activation_tolerance(psi[j]))
        .collect()
}

/// Runs `params.n` steps from `u0`. Solver failures and cap violations end
/// the run early; the steps computed so far are kept and `status` says why.
pub fn run(u0: &GridFunction, psi: &ObstacleSpec, params: &SchemeParams) -> Result<FlowResult> {
    psi.validate()?;
    params.validate()?;
    if u0.m() != params.m {
        return Err(Error::GridMismatch {
            left: params.m + 1,
            right: u0.m() + 1,
        });
    }
    let psi_nodes = psi.sample(params.m);
    let v0 = u0.values();
    if let Some(j) = (1..params.m).find(|&j| v0[j] < psi_nodes[j]) {
        return Err(Error::Infeasible(format!(
            "initial datum lies below the obstacle at node {j} ({} < {})",
            v0[j], psi_nodes[j]
        )));
    }

    let e0 = energy(u0, params.lambda)?;
    let mut steps = Vec::with_capacity(params.n + 1);
    steps.push(StepRecord {
        index: 0,
        u: u0.clone(),
        w: GridFunction::zeros(params.m)?,
        energy: e0,
        energy_drop: 0.0,
        penalty_value: 0.0,
        multipliers: DiscreteMeasure::zero(params.m),
        active_set: active_nodes(u0, &psi_nodes),
        iterations: 0,
        residual: 0.0,
        residual_scale: 0.0,
        max_slope: params.m0,
    });

    let settings = params.inner_settings();
    let mut status = RunStatus::Completed;
    for i in 1..=params.n {
        let prev = &steps[i - 1].u;
        let sol = match inner_minimize(prev, &psi_nodes, params.tau, params.lambda, &settings) {
            Ok(sol) => sol,
            Err(e) => {
                let kind = match e {
                    Error::NonConvergence { .. } => FailureKind::NonConvergence,
                    _ => FailureKind::Other,
                };
                status = RunStatus::Failed {
                    step: i,
                    kind,
                    message: e.to_string(),
                };
                break;
            }
        };
        let slope = max_slope(&sol.u)?;
        steps.push(StepRecord {
            index: i,
            energy: energy(&sol.u, params.lambda)?,
            energy_drop: -sol.energy_change,
            penalty_value: sol.penalty,
            multipliers: sol.multipliers,
            active_set: sol.active_set,
            iterations: sol.iterations,
            residual: sol.residual,
            residual_scale: sol.scale,
            max_slope: slope,
            u: sol.u,
            w: sol.velocity,
        });
        if slope > params.cap {
            let err = Error::CapViolation {
                step: i,
                slope,
                cap: params.cap,
            };
            status = RunStatus::Failed {
                step: i,
                kind: FailureKind::CapViolation,
                message: err.to_string(),
            };
            break;
        }
    }

    let summary = summarize(&steps, psi, params)?;
    Ok(FlowResult {
        params: params.clone(),
        obstacle: psi.clone(),
        psi: psi_nodes,
        steps,
        status,
        summary,
    })
}

fn summarize(
    steps: &[StepRecord],
    psi: &ObstacleSpec,
    params: &SchemeParams,
) -> Result<RunSummary> {
    let initial_energy = steps[0].energy.penalized;
    let max_slope = steps.iter().map(|s| s.max_slope).fold(0.0, f64::max);
    let mut max_h2 = 0.0f64;
    for s in steps {
        max_h2 = max_h2.max(h_norm(&s.u)?);
    }
    Ok(RunSummary {
        initial_energy,
        final_energy: steps[steps.len() - 1].energy.penalized,
        dissipation: steps.iter().map(|s| 2.0 * s.penalty_value).sum(),
        max_slope,
        slope_warning: max_slope > SLOPE_WARNING_FACTOR * params.m0,
        max_h2,
        h2_bound: params.h2_bound(initial_energy),
        measure_sum: params.tau
            * steps[1..]
                .iter()
                .map(|s| s.multipliers.total.powi(2))
                .sum::<f64>(),
        boundary_radius: boundary_radius(psi, params.cap),
        total_iterations: steps.iter().map(|s| s.iterations).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolantKind {
    /// Piecewise linear in time.
    Linear,
    /// Right-continuous: `u_i` on `((i−1)τ, iτ]`.
    Upper,
    /// Left value: `u_{i−1}` on `((i−1)τ, iτ]`.
    Lower,
}

/// Evaluates a time interpolant of the discrete flow at `t ∈ [0, T]`.
pub fn eval_interpolant(
    result: &FlowResult,
    kind: InterpolantKind,
    t: f64,
) -> Result<GridFunction> {
    let tau = result.params.tau;
    let available = (result.steps.len() - 1) as f64 * tau;
    if !(t >= 0.0 && t <= available) {
        return Err(Error::Domain(format!("time {t} outside [0, {available}]")));
    }
    if t == 0.0 {
        return Ok(result.steps[0].u.clone());
    }
    let i = ((t / tau).ceil() as usize).clamp(1, result.steps.len() - 1);
    let (prev, cur) = (&result.steps[i - 1], &result.steps[i]);
    match kind {
        InterpolantKind::Upper => Ok(cur.u.clone()),
        InterpolantKind::Lower => Ok(prev.u.clone()),
        InterpolantKind::Linear => {
            if t == i as f64 * tau {
                return Ok(cur.u.clone());
            }
            let frac = (t - (i - 1) as f64 * tau) / tau;
            let values = prev
                .u
                .values()
                .iter()
                .zip(cur.u.values())
                .map(|(a, b)| a + frac * (b - a))
                .collect();
            GridFunction::new(values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy_increment_raw, grad_g};
    use std::f64::consts::PI;

    fn sine(m: usize, a: f64) -> GridFunction {
        GridFunction::from_fn(m, |x| a * (PI * x).sin()).unwrap()
    }

    #[test]
    fn horizon_closed_form() {
        let t = horizon_for(1.0, 1.0);
        let oracle = (1.0 / (2.0 * 2f64.sqrt() * 5f64.powf(0.0625))).powi(8);
        assert!((t - oracle).abs() <= 1e-15 * oracle);
        assert!((horizon_for(1.0, 2.0) * 256.0 - t).abs() <= 1e-14 * t);
        assert_eq!(
            auto_horizon(&GridFunction::zeros(16).unwrap(), 0.0),
            Err(Error::DegenerateDatum)
        );
    }

    #[test]
    fn params_tau_is_exact() {
        let u0 = sine(32, 0.1);
        let p =
            SchemeParams::new(&u0, 1.0, 7, Horizon::Fixed(0.3), InnerSettings::default()).unwrap();
        assert_eq!(p.tau, 0.3 / 7.0);
        assert_eq!(p.cap, 2.0 * p.m0);
        let auto = SchemeParams::new(&u0, 1.0, 7, Horizon::Auto, InnerSettings::default()).unwrap();
        let lhs = 2f64.sqrt()
            * (1.0 + 4.0 * auto.m0.powi(2)).powf(1.0 / 16.0)
            * auto.rho
            * auto.horizon.powf(0.125);
        assert!((lhs - auto.m0 / 2.0).abs() < 1e-12);
        let s = serde_json::to_string(&auto).unwrap();
        assert_eq!(serde_json::from_str::<SchemeParams>(&s).unwrap(), auto);
    }

    #[test]
    fn flat_datum_far_obstacle_is_fixed_point() {
        let u = GridFunction::zeros(16).unwrap();
        let psi = vec![-1.0; 17];
        let sol = inner_minimize(&u, &psi, 1e-3, 0.0, &InnerSettings::default()).unwrap();
        assert!(sol.u.values().iter().all(|v| *v == 0.0));
        assert_eq!(sol.multipliers.total, 0.0);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let u = sine(16, 0.1);
        let psi = vec![0.5; 17];
        assert!(matches!(
            inner_minimize(&u, &psi, 1e-3, 0.0, &InnerSettings::default()),
            Err(Error::Infeasible(_))
        ));
    }

    /// Projected Newton at tight tolerance as an independent dense oracle.
    #[test]
    fn cone_contact_matches_dense_oracle() {
        let m = 32;
        let psi = ObstacleSpec::cone(0.1).sample(m);
        let u = GridFunction::from_fn(m, |x| 0.1 * (PI * x).sin()).unwrap();
        let tau = 1e-5;
        let sol = inner_minimize(&u, &psi, tau, 0.0, &InnerSettings::default()).unwrap();
        assert!(sol.active_set.contains(&16));
        assert!(sol.multipliers.atoms[16] > 0.0);
        let dense = InnerSettings {
            tol: 1e-13,
            max_iter: 200,
            method: InnerMethod::ProjectedNewton,
        };
        let oracle = inner_minimize(&u, &psi, tau, 0.0, &dense).unwrap();
        let drift = sol.u.sup_distance(&u).unwrap();
        assert!(sol.u.sup_distance(&oracle.u).unwrap() <= 1e-6 * drift.max(1e-300));
        assert!(
            (sol.multipliers.atoms[16] - oracle.multipliers.atoms[16]).abs()
                <= 1e-6 * oracle.multipliers.atoms[16]
        );
    }

    #[test]
    fn step_objective_never_increases() {
        let m = 24;
        let u = GridFunction::from_fn(m, |x| 0.4 * (PI * x).sin() + 0.1 * (3.0 * PI * x).sin())
            .unwrap();
        let psi = vec![-1.0; m + 1];
        for &tau in &[1e-12, 1e-8, 1e-5, 1e-3] {
            for lambda in [0.0, 2.0] {
                let sol = inner_minimize(&u, &psi, tau, lambda, &InnerSettings::default()).unwrap();
                assert!(sol.energy_change + sol.penalty <= 0.0);
                let delta: Vec<f64> = sol.velocity.values().iter().map(|w| w * tau).collect();
                let de = energy_increment_raw(u.values(), &delta, lambda);
                assert!((de - sol.energy_change).abs() <= 1e-12 * de.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn converged_step_is_stationary_off_contact() {
        let m = 32;
        let u = sine(m, 0.2);
        let psi = vec![-1.0; m + 1];
        let tau = 1e-4;
        let sol = inner_minimize(&u, &psi, tau, 1.0, &InnerSettings::default()).unwrap();
        let g = grad_g(&sol.u, &u, tau, 1.0).unwrap();
        let dx = u.dx();
        let worst = g.iter().map(|v| (v / dx).abs()).fold(0.0, f64::max);
        assert!(
            worst <= 1e-8 * (1.0 + sol.scale),
            "worst {worst}, scale {}",
            sol.scale
        );
    }

    #[test]
    fn unconstrained_flow_decays() {
        let m = 32;
        let u0 = sine(m, 0.1);
        let params =
            SchemeParams::new(&u0, 0.0, 40, Horizon::Fixed(0.02), InnerSettings::default())
                .unwrap();
        let result = run(&u0, &ObstacleSpec::flat(-1.0), &params).unwrap();
        assert!(result.is_complete());
        for pair in result.steps.windows(2) {
            assert!(pair[1].energy.penalized < pair[0].energy.penalized);
            assert!(pair[1].energy_drop >= 2.0 * pair[1].penalty_value - 1e-14);
        }
        let last = result
            .last()
            .u
            .values()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(last < 0.1 * 0.2, "sup {last}");
        assert!(result.summary.dissipation <= 2.0 * result.summary.initial_energy);
    }

    #[test]
    fn single_step_run_and_interpolants() {
        let m = 16;
        let u0 = sine(m, 0.1);
        let params =
            SchemeParams::new(&u0, 0.0, 1, Horizon::Fixed(1e-4), InnerSettings::default()).unwrap();
        let result = run(&u0, &ObstacleSpec::flat(-1.0), &params).unwrap();
        assert_eq!(result.steps.len(), 2);
        let tau = params.tau;
        assert_eq!(
            eval_interpolant(&result, InterpolantKind::Linear, tau).unwrap(),
            result.steps[1].u
        );
        let mid = eval_interpolant(&result, InterpolantKind::Linear, 0.5 * tau).unwrap();
        for j in 0..=m {
            let avg = 0.5 * (result.steps[0].u.values()[j] + result.steps[1].u.values()[j]);
            assert!((mid.values()[j] - avg).abs() < 1e-16);
        }
        let t = 0.3 * tau;
        let up = eval_interpolant(&result, InterpolantKind::Upper, t).unwrap();
        let lo = eval_interpolant(&result, InterpolantKind::Lower, t).unwrap();
        // stored iterates carry one rounding of u_{i-1} + τ w_i
        for j in 0..=m {
            let diff = up.values()[j] - lo.values()[j];
            let ulp = f64::EPSILON * up.values()[j].abs().max(lo.values()[j].abs());
            assert!((diff - tau * result.steps[1].w.values()[j]).abs() <= 2.0 * ulp);
        }
        assert!(eval_interpolant(&result, InterpolantKind::Upper, 2.0 * tau).is_err());
        assert!(eval_interpolant(&result, InterpolantKind::Upper, -1.0).is_err());
    }

    #[test]
    fn run_rejects_datum_below_obstacle() {
        let u0 = sine(16, 0.1);
        let params =
            SchemeParams::new(&u0, 0.0, 2, Horizon::Fixed(1e-4), InnerSettings::default()).unwrap();
        assert!(matches!(
            run(&u0, &ObstacleSpec::cone(0.3), &params),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn boundary_radius_of_default_cone() {
        // ψ = h − 4h|x − 1/2| drops below ¾ψ(0) = −¾h only for x < 1/16
        let r = boundary_radius(&ObstacleSpec::cone(0.3), 0.0);
        assert!((r - 1.0 / 16.0).abs() < 1e-4);
        let r = boundary_radius(&ObstacleSpec::cone(0.3), 10.0);
        assert!((r - 0.3 / 40.0).abs() < 1e-15);
    }
}
