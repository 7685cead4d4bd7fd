//! A-posteriori checks of discrete flows and stationary profiles: tested
//! variational inequalities, natural boundary conditions, energy
//! bookkeeping and third-derivative jumps.
//!
//! The tested integrand is the first variation of the discrete energy in
//! the direction `v − u` (the same trapezoid sums as [`crate::energy`]),
//! plus the velocity term `Δx Σ ω_j w_j (v_j − u_j)` with mobility weights
//! `ω = 1/√(1 + (u')²)`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::energy::{
    d1_raw, energy, energy_gradient_raw, h_norm, l2_norm, mobility_weights, penalty, sup_norms,
};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, ObstacleSpec};
use crate::scheme::{activation_tolerance, FlowResult, RunStatus, StepRecord};

/// Complementarity: atoms off contact must be below this fraction of the
/// largest atom.
pub const COMPLEMENTARITY_RATIO: f64 = 1e-8;
/// Nodes at least this far above the obstacle count as clearly off contact.
pub const CLEARANCE: f64 = 1e-6;

/// A feasible comparison function with a label for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub label: String,
    pub v: GridFunction,
}

impl TestFunction {
    pub fn new(label: impl Into<String>, v: GridFunction) -> Self {
        Self {
            label: label.into(),
            v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViEntry {
    pub label: String,
    /// Tested value of the inequality.
    pub value: f64,
    /// `value / (Δx Σ |v_j − u_j|)`, comparable with gradient densities.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViReport {
    pub min_residual: f64,
    pub min_normalized: f64,
    pub worst_test: String,
    pub tested_count: usize,
    pub entries: Vec<ViEntry>,
}

fn check_feasible(test: &TestFunction, u: &GridFunction, psi: &[f64]) -> Result<()> {
    u.ensure_same_grid(&test.v)?;
    let v = test.v.values();
    match (1..u.m()).find(|&j| v[j] < psi[j]) {
        Some(j) => Err(Error::Infeasible(format!(
            "test function '{}' lies below the obstacle at node {j}",
            test.label
        ))),
        None => Ok(()),
    }
}

/// Core evaluation: `Σ_j (∂E/∂u_j + Δx ω_j w_j)(v_j − u_j)` for each test.
fn tested_values(
    u: &GridFunction,
    velocity: Option<(&GridFunction, &[f64])>,
    psi: &[f64],
    lambda: f64,
    tests: &[TestFunction],
) -> Result<ViReport> {
    if u.m() < 4 {
        return Err(Error::Resolution { m: u.m(), min: 4 });
    }
    if psi.len() != u.m() + 1 {
        return Err(Error::GridMismatch {
            left: u.m() + 1,
            right: psi.len(),
        });
    }
    if tests.is_empty() {
        return Err(Error::Domain(
            "at least one test function is required".into(),
        ));
    }
    let m = u.m();
    let dx = u.dx();
    let mut density = energy_gradient_raw(u.values(), lambda);
    if let Some((w, weights)) = velocity {
        u.ensure_same_grid(w)?;
        for j in 1..m {
            density[j] += dx * weights[j] * w.values()[j];
        }
    }
    let mut entries = Vec::with_capacity(tests.len());
    for test in tests {
        check_feasible(test, u, psi)?;
        let (mut value, mut mass) = (0.0, 0.0);
        for j in 1..m {
            let phi = test.v.values()[j] - u.values()[j];
            value += density[j] * phi;
            mass += dx * phi.abs();
        }
        let normalized = if mass > 0.0 { value / mass } else { 0.0 };
        entries.push(ViEntry {
            label: test.label.clone(),
            value,
            normalized,
        });
    }
    let worst = entries
        .iter()
        .min_by(|a, b| a.normalized.total_cmp(&b.normalized))
        .expect("nonempty");
    Ok(ViReport {
        min_residual: entries
            .iter()
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min),
        min_normalized: worst.normalized,
        worst_test: worst.label.clone(),
        tested_count: entries.len(),
        entries,
    })
}

/// Tests the time-dependent inequality at one instant, with the mobility
/// weight taken from `u` itself.
pub fn vi_residual_step(
    u: &GridFunction,
    w: &GridFunction,
    psi: &ObstacleSpec,
    lambda: f64,
    tests: &[TestFunction],
) -> Result<ViReport> {
    let weights = mobility_weights(u.values());
    tested_values(u, Some((w, &weights)), &psi.sample(u.m()), lambda, tests)
}

/// Same as [`vi_residual_step`] with the mobility weight of the previous
/// iterate, which is the form the step problem is minimized in.
pub fn vi_residual_scheme(
    step: &StepRecord,
    prev: &GridFunction,
    psi: &[f64],
    lambda: f64,
    tests: &[TestFunction],
) -> Result<ViReport> {
    let weights = mobility_weights(prev.values());
    tested_values(&step.u, Some((&step.w, &weights)), psi, lambda, tests)
}

/// The stationary inequality: the velocity term is dropped.
pub fn stationary_vi_residual(
    u: &GridFunction,
    psi: &ObstacleSpec,
    lambda: f64,
    tests: &[TestFunction],
) -> Result<ViReport> {
    tested_values(u, None, &psi.sample(u.m()), lambda, tests)
}

/// The fixed certificate set: the obstacle clamped to the pinned
/// conditions, `u ± ε·hat_j` at every inactive node, the previous iterate
/// (when given) and the flat line when it is feasible.
pub fn standard_battery(
    u: &GridFunction,
    prev: Option<&GridFunction>,
    psi: &[f64],
) -> Result<Vec<TestFunction>> {
    let m = u.m();
    let values = u.values();
    let mut tests = Vec::new();

    let mut clamped = psi.to_vec();
    clamped[0] = 0.0;
    clamped[m] = 0.0;
    tests.push(TestFunction::new("obstacle", GridFunction::new(clamped)?));

    for j in 1..m {
        let gap = values[j] - psi[j];
        if gap <= activation_tolerance(psi[j]) {
            continue;
        }
        let eps = gap.min(1.0);
        let mut up = values.to_vec();
        up[j] += eps;
        tests.push(TestFunction::new(
            format!("bump+{j}"),
            GridFunction::new(up)?,
        ));
        let mut down = values.to_vec();
        down[j] = (values[j] - eps).max(psi[j]);
        tests.push(TestFunction::new(
            format!("bump-{j}"),
            GridFunction::new(down)?,
        ));
    }
    if let Some(p) = prev {
        tests.push(TestFunction::new("previous", p.clone()));
    }
    if psi[1..m].iter().all(|p| *p <= 0.0) {
        tests.push(TestFunction::new("flat", GridFunction::zeros(m)?));
    }
    Ok(tests)
}

/// Both sides of `‖u'‖_∞ ≤ √2·‖u‖_{L²}^{1/4}·‖u‖_H^{3/4}` and of
/// `‖u‖_∞ ≤ ‖u'‖_∞`, with discrete norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationBound {
    pub slope_sup: f64,
    pub value_sup: f64,
    pub l2: f64,
    pub h: f64,
    pub bound: f64,
}

impl InterpolationBound {
    /// `slope_sup / bound`; at most 1 up to discretization.
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.slope_sup / self.bound
        } else {
            0.0
        }
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.slope_sup <= slack * self.bound && self.value_sup <= slack * self.slope_sup
    }
}

pub fn interpolation_bound(u: &GridFunction) -> Result<InterpolationBound> {
    let (value_sup, slope_sup) = sup_norms(u)?;
    let l2 = l2_norm(u);
    let h = h_norm(u)?;
    Ok(InterpolationBound {
        slope_sup,
        value_sup,
        l2,
        h,
        bound: SQRT_2 * l2.powf(0.25) * h.powf(0.75),
    })
}

/// One-sided second-order curvature `u''/(1 + u'²)^{3/2}` at `x = 0` and `x = 1`.
pub fn endpoint_curvature(u: &GridFunction) -> Result<(f64, f64)> {
    let m = u.m();
    if m < 6 {
        return Err(Error::Resolution { m, min: 6 });
    }
    let v = u.values();
    let inv2 = (m * m) as f64;
    let slope = d1_raw(v);
    let left = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv2;
    let right = (2.0 * v[m] - 5.0 * v[m - 1] + 4.0 * v[m - 2] - v[m - 3]) * inv2;
    let k = |second: f64, first: f64| second / (1.0 + first * first).powf(1.5);
    Ok((k(left, slope[0]), k(right, slope[m])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    /// Largest `|w_i(x_j)|` over nodes in contact at steps `i − 1` and `i`.
    pub max_abs_velocity: f64,
    /// Per step `i = 1 …`; zero where the set is empty.
    pub per_step: Vec<f64>,
    /// No node stayed in contact over any step.
    pub empty: bool,
}

pub fn coincidence_velocity_check(result: &FlowResult) -> CoincidenceReport {
    let mut per_step = Vec::with_capacity(result.steps.len().saturating_sub(1));
    let mut empty = true;
    for pair in result.steps.windows(2) {
        let mut worst = 0.0f64;
        for j in pair[1]
            .active_set
            .iter()
            .filter(|j| pair[0].active_set.contains(j))
        {
            empty = false;
            worst = worst.max(pair[1].w.values()[*j].abs());
        }
        per_step.push(worst);
    }
    CoincidenceReport {
        max_abs_velocity: per_step.iter().copied().fold(0.0, f64::max),
        per_step,
        empty,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationRow {
    pub index: usize,
    /// `E(u_{i−1}) − E(u_i)`.
    pub energy_drop: f64,
    pub twice_penalty: f64,
    pub cumulative_drop: f64,
    pub cumulative_dissipation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationTable {
    pub rows: Vec<DissipationRow>,
    /// `min_i (ΔE_i − 2 P_i)`; nonnegative up to solver accuracy.
    pub min_slack: f64,
}

pub fn dissipation_vs_energy(result: &FlowResult) -> DissipationTable {
    let mut rows = Vec::with_capacity(result.steps.len().saturating_sub(1));
    let (mut drop, mut diss) = (0.0, 0.0);
    let mut min_slack = f64::INFINITY;
    for step in &result.steps[1..] {
        let twice = 2.0 * step.penalty_value;
        drop += step.energy_drop;
        diss += twice;
        min_slack = min_slack.min(step.energy_drop - twice);
        rows.push(DissipationRow {
            index: step.index,
            energy_drop: step.energy_drop,
            twice_penalty: twice,
            cumulative_drop: drop,
            cumulative_dissipation: diss,
        });
    }
    let min_slack = if rows.is_empty() { 0.0 } else { min_slack };
    DissipationTable { rows, min_slack }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityProfile {
    /// `(node, |u'''(x⁺) − u'''(x⁻)|)` estimates for nodes `5 … m − 5`.
    pub gaps: Vec<(usize, f64)>,
    pub median: f64,
    /// Nodes whose gap exceeds ten times the median and persists on the
    /// even subgrid, and whose detrended fourth difference is a strict local
    /// maximum within three nodes.
    pub flagged: Vec<usize>,
}

/// One-sided `u'''` jump estimates at nodes `5 … n − 5` of `v` with spacing
/// `1/n`: each side linearly extrapolates two third differences, taken
/// from that side only, to the node.
fn third_derivative_gaps(v: &[f64]) -> Vec<f64> {
    let n = v.len() - 1;
    let inv3 = (n as f64).powi(3);
    let d3 = |i: usize| v[i + 3] - 3.0 * v[i + 2] + 3.0 * v[i + 1] - v[i];
    (5..=n - 5)
        .map(|j| {
            ((2.5 * d3(j) - 1.5 * d3(j + 1)) - (2.5 * d3(j - 3) - 1.5 * d3(j - 4))).abs() * inv3
        })
        .collect()
}

/// Fourth differences of `v` detrended against `j ± 3`, at `j = 5 … n − 5`.
///
/// A jump in `u'''` at a node gives the pattern `(1, 4, 1)/6` around it
/// when `v` samples piecewise smooth data and `(0, 1, 0)` for a discrete
/// point load, so the jump sits at the peak even where the one-sided gaps
/// straddle it.
fn detrended_fourth_differences(v: &[f64]) -> Vec<f64> {
    let n = v.len() - 1;
    let d4 = |j: usize| v[j - 2] - 4.0 * v[j - 1] + 6.0 * v[j] - 4.0 * v[j + 1] + v[j + 2];
    (5..=n - 5)
        .map(|j| d4(j) - 0.5 * (d4(j - 3) + d4(j + 3)))
        .collect()
}

pub fn regularity_probe(u: &GridFunction) -> Result<RegularityProfile> {
    let m = u.m();
    if m < 16 {
        return Err(Error::Resolution { m, min: 16 });
    }
    let v = u.values();
    // both sequences start at node 5
    let gaps: Vec<(usize, f64)> = (5..=m - 5).zip(third_derivative_gaps(v)).collect();
    let r = detrended_fourth_differences(v);
    let mut sorted: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };

    // gaps on the even nodes: coarse node i sits at fine node 2i and
    // covers i = 5 … m/2 − 5
    let coarse: Option<Vec<f64>> = (m % 2 == 0 && m >= 32).then(|| {
        let even: Vec<f64> = v.iter().step_by(2).copied().collect();
        third_derivative_gaps(&even)
    });
    let persists = |j: usize, g: f64| match &coarse {
        None => true,
        Some(c) => [j / 2, (j + 1) / 2]
            .iter()
            .filter(|&&i| i >= 5 && i + 5 <= m / 2)
            .map(|&i| c[i - 5])
            .fold(None, |acc: Option<f64>, x| {
                Some(acc.map_or(x, |a| a.max(x)))
            })
            .is_some_and(|cg| g >= 0.5 * cg),
    };
    let peak = |j: usize| {
        let here = r[j - 5].abs();
        (j.saturating_sub(3).max(5)..=(j + 3).min(m - 5)).all(|l| l == j || r[l - 5].abs() < here)
    };

    // rounding in the stencils sets a floor
    let sup = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let noise = 1024.0 * f64::EPSILON * sup * (m as f64).powi(3);
    let threshold = (10.0 * median).max(noise);
    let flagged = gaps
        .iter()
        .filter(|&&(j, g)| g > threshold && peak(j) && persists(j, g))
        .map(|g| g.0)
        .collect();
    Ok(RegularityProfile {
        gaps,
        median,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Failing makes the verdict fail.
    Required,
    /// Reported only.
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictItem {
    pub name: String,
    pub severity: Severity,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub items: Vec<VerdictItem>,
}

impl Verdict {
    pub fn item(&self, name: &str) -> Option<&VerdictItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

fn item(
    name: &str,
    severity: Severity,
    measured: f64,
    threshold: f64,
    passed: bool,
    detail: String,
) -> VerdictItem {
    VerdictItem {
        name: name.into(),
        severity,
        passed,
        measured,
        threshold,
        detail,
    }
}

/// Evaluates every invariant of the discrete flow on a finished run.
pub fn check_flow(result: &FlowResult) -> Result<Verdict> {
    let p = &result.params;
    let s = &result.summary;
    let e0 = s.initial_energy;
    let psi = &result.psi;
    let mut items = Vec::new();

    let (done, detail) = match &result.status {
        RunStatus::Completed => (result.is_complete(), String::new()),
        RunStatus::Failed { message, .. } => (false, message.clone()),
    };
    items.push(item(
        "completed",
        Severity::Required,
        (result.steps.len() - 1) as f64,
        p.n as f64,
        done,
        detail,
    ));

    // stored energies and penalties must match the stored iterates
    let mut mismatch = 0.0f64;
    let mut mismatch_at = String::new();
    for (k, st) in result.steps.iter().enumerate() {
        let e = energy(&st.u, p.lambda)?.penalized;
        let mut gap = (e - st.energy.penalized).abs() / (1.0 + e0);
        if k > 0 {
            let prev = &result.steps[k - 1];
            let pen = penalty(&st.u, &prev.u, p.tau)?;
            gap = gap.max((pen - st.penalty_value).abs() / (1.0 + e0));
            gap = gap.max(
                ((prev.energy.penalized - st.energy.penalized) - st.energy_drop).abs() / (1.0 + e0),
            );
        }
        if gap > mismatch {
            mismatch = gap;
            mismatch_at = format!("step {k}");
        }
    }
    items.push(item(
        "record_consistency",
        Severity::Required,
        mismatch,
        1e-12,
        mismatch <= 1e-12,
        mismatch_at,
    ));

    let rise = result.steps[1..]
        .iter()
        .map(|st| -st.energy_drop)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-10 * (1.0 + e0);
    items.push(item(
        "energy_monotone",
        Severity::Required,
        rise.max(0.0),
        tol,
        rise <= tol,
        String::new(),
    ));

    let table = dissipation_vs_energy(result);
    let slack_tol = -1e-10 * (1.0 + e0);
    items.push(item(
        "step_dissipation",
        Severity::Required,
        table.min_slack,
        slack_tol,
        table.min_slack >= slack_tol,
        String::new(),
    ));
    items.push(item(
        "dissipation_ledger",
        Severity::Required,
        s.dissipation,
        2.0 * e0 + 1e-8,
        s.dissipation <= 2.0 * e0 + 1e-8,
        String::new(),
    ));

    let min_gap = result
        .steps
        .iter()
        .flat_map(|st| (1..p.m).map(move |j| st.u.values()[j] - psi[j]))
        .fold(f64::INFINITY, f64::min);
    items.push(item(
        "feasible",
        Severity::Required,
        min_gap,
        0.0,
        min_gap >= 0.0,
        String::new(),
    ));

    let cap_ok = s.max_slope <= p.cap;
    items.push(item(
        "slope_cap",
        Severity::Required,
        s.max_slope,
        p.cap,
        cap_ok,
        String::new(),
    ));
    let warn = crate::scheme::SLOPE_WARNING_FACTOR * p.m0;
    items.push(item(
        "slope_three_halves",
        Severity::Warning,
        s.max_slope,
        warn,
        s.max_slope <= warn,
        String::new(),
    ));
    items.push(item(
        "h2_bound",
        if cap_ok {
            Severity::Required
        } else {
            Severity::Info
        },
        s.max_h2,
        s.h2_bound,
        s.max_h2 <= s.h2_bound,
        String::new(),
    ));

    let mut off_contact = 0.0f64;
    let mut max_atom = 0.0f64;
    for st in &result.steps {
        max_atom = max_atom.max(st.multipliers.max_atom());
        for j in 1..p.m {
            if st.u.values()[j] - psi[j] > CLEARANCE {
                off_contact = off_contact.max(st.multipliers.atoms[j]);
            }
        }
    }
    let comp_tol = COMPLEMENTARITY_RATIO * max_atom;
    items.push(item(
        "complementarity",
        Severity::Required,
        off_contact,
        comp_tol,
        off_contact <= comp_tol,
        String::new(),
    ));

    let radius = s.boundary_radius;
    let near_edge = result
        .steps
        .iter()
        .flat_map(|st| st.active_set.iter())
        .map(|&j| crate::grid::node(j, p.m))
        .filter(|x| *x < radius || *x > 1.0 - radius)
        .count();
    items.push(item(
        "boundary_noncoincidence",
        Severity::Required,
        near_edge as f64,
        0.0,
        near_edge == 0,
        format!("radius {radius:e}"),
    ));

    // each step is held to the residual its inner solve was accepted at
    let mut worst_vi = f64::INFINITY;
    let mut worst_allowed = -p.inner_tol;
    let mut worst_label = String::new();
    let mut vi_ok = true;
    for pair in result.steps.windows(2) {
        let tests = standard_battery(&pair[1].u, Some(&pair[0].u), psi)?;
        let report = vi_residual_scheme(&pair[1], &pair[0].u, psi, p.lambda, &tests)?;
        let accepted = p.inner_tol.max(pair[1].residual) * (1.0 + 1e-9);
        let rel = report.min_normalized / (1.0 + pair[1].residual_scale);
        if rel < -accepted {
            vi_ok = false;
        }
        if rel < worst_vi {
            worst_vi = rel;
            worst_allowed = -accepted;
            worst_label = format!("step {} test {}", pair[1].index, report.worst_test);
        }
    }
    if result.steps.len() < 2 {
        worst_vi = 0.0;
    }
    items.push(item(
        "variational_inequality",
        Severity::Required,
        worst_vi,
        worst_allowed,
        vi_ok,
        worst_label,
    ));

    let cv = coincidence_velocity_check(result);
    items.push(item(
        "coincidence_velocity",
        Severity::Info,
        cv.max_abs_velocity,
        f64::INFINITY,
        true,
        if cv.empty {
            "no persistent contact".into()
        } else {
            String::new()
        },
    ));
    items.push(item(
        "measure_sum",
        Severity::Info,
        s.measure_sum,
        f64::INFINITY,
        s.measure_sum.is_finite(),
        String::new(),
    ));

    let passed = items
        .iter()
        .all(|i| i.passed || i.severity != Severity::Required);
    Ok(Verdict { passed, items })
}
