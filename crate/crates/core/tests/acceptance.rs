//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use elastic_obstacle::cli::{cmd_run, RunConfig, LEDGER_FILE};
use elastic_obstacle::diagnostics::{
    interpolation_bound, regularity_probe, CLEARANCE, COMPLEMENTARITY_RATIO,
};
use elastic_obstacle::elastica::{
    c0, clamped_objective, h_star, h_star_clamped, symmetric_stationary,
};
use elastic_obstacle::energy::{energy, grad_g, penalty};
use elastic_obstacle::scheme::{run, FlowResult, Horizon, InnerSettings, SchemeParams};
use elastic_obstacle::special_fn::EllipticModulus;
use elastic_obstacle::{GridFunction, ObstacleSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    out.detail = format!("{} [{:.2?}]", out.detail, took);
    if let Some(limit) = limit {
        if took > limit {
            out.passed = false;
            out.detail.push_str(&format!(" exceeds {limit:?}"));
        }
    }
    out
}

// composite Simpson rule, the test-side quadrature oracle
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize) -> f64 {
    let h = (b - a) / cells as f64;
    let mut sum = f(a) + f(b);
    for i in 1..cells {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    // quadratic convergence: 8 rounds reach roundoff for b/a > 0.1
    for _ in 0..8 {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    a
}

fn elliptic_grid() -> impl Iterator<Item = (f64, f64)> {
    (0..20)
        .flat_map(|iq| {
            let q = 0.01 + 0.98 * iq as f64 / 19.0;
            (0..50).map(move |ix| (ix, q))
        })
        .map(|(ix, q)| {
            let k = EllipticModulus::new(q).unwrap().complete_k();
            (-4.0 * k + 8.0 * k * ix as f64 / 49.0, q)
        })
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for (x, q) in elliptic_grid() {
        let md = EllipticModulus::new(q).unwrap();
        let (sn, cn, dn) = (md.sn(x).unwrap(), md.cn(x).unwrap(), md.dn(x).unwrap());
        worst = worst.max((sn * sn + cn * cn - 1.0).abs());
        worst = worst.max((dn * dn + q * q * sn * sn - 1.0).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("max identity defect {worst:.2e} (tol 1e-12)"),
    )
}

fn criterion_2() -> Outcome {
    let q = FRAC_1_SQRT_2;
    let k = EllipticModulus::new(q).unwrap().complete_k();
    let by_quadrature = simpson(
        |t| 1.0 / (1.0 - q * q * t.sin().powi(2)).sqrt(),
        0.0,
        FRAC_PI_2,
        4000,
    );
    let by_agm = PI / (2.0 * agm(1.0, (1.0 - q * q).sqrt()));
    let k_err = (k - by_quadrature).abs().max((k - by_agm).abs());
    let mut am_err = 0.0f64;
    for (x, q) in elliptic_grid() {
        let md = EllipticModulus::new(q).unwrap();
        am_err = am_err.max((md.am(md.f(x).unwrap()).unwrap() - x).abs());
    }
    outcome(
        k_err <= 1e-10 && am_err <= 1e-10,
        format!("K(1/sqrt2) = {k:.15}, oracle gap {k_err:.2e}; max |am(F(x)) - x| = {am_err:.2e} (tol 1e-10)"),
    )
}

/// Integrates `2k'' + k³ = 0` from `k = 0`, `k' = −1`, `θ = π/2` until the
/// curvature vanishes again (tangent at `−π/2`), and returns arch height
/// over chord.
fn geometric_pinned_ratio() -> f64 {
    let rhs = |s: [f64; 5]| [s[1], -0.5 * s[0].powi(3), s[0], s[2].cos(), s[2].sin()];
    let h = 1e-4;
    let mut s = [0.0, -1.0, FRAC_PI_2, 0.0, 0.0];
    let mut top = 0.0f64;
    loop {
        let add = |a: [f64; 5], b: [f64; 5], c: f64| {
            std::array::from_fn::<f64, 5, _>(|i| a[i] + c * b[i])
        };
        let k1 = rhs(s);
        let k2 = rhs(add(s, k1, 0.5 * h));
        let k3 = rhs(add(s, k2, 0.5 * h));
        let k4 = rhs(add(s, k3, h));
        let next: [f64; 5] =
            std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        if next[0] >= 0.0 {
            // linear interpolation of the zero of k
            let f = -s[0] / (next[0] - s[0]);
            let x_end = s[3] + f * (next[3] - s[3]);
            return top / x_end;
        }
        s = next;
        top = top.max(s[4]);
    }
}

fn criterion_3() -> Outcome {
    let oracle_c0 = 2.0
        * simpson(
            |t: f64| 2.0 * t * (t * t).sin().sqrt(),
            0.0,
            FRAC_PI_2.sqrt(),
            20000,
        );
    let h = h_star();
    let geometric = geometric_pinned_ratio();
    let passed = (h - 0.83462).abs() <= 5e-5
        && (h - geometric).abs() <= 1e-3
        && (c0() - oracle_c0).abs() <= 1e-9;
    outcome(
        passed,
        format!(
            "h* = {h:.6} (target 0.83462 +- 5e-5), c0 = {:.9} vs Simpson {oracle_c0:.9}, geometric {geometric:.6}",
            c0()
        ),
    )
}

fn criterion_4() -> Outcome {
    let hs = h_star_clamped();
    let h = h_star();
    let at_zero = clamped_objective(0.0).unwrap();
    let at_inf = clamped_objective(f64::INFINITY).unwrap();
    let far = clamped_objective(1e14).unwrap();

    // independent scan with the Simpson oracle for G
    let c = 2.0
        * simpson(
            |t: f64| 2.0 * t * (t * t).sin().sqrt(),
            0.0,
            FRAC_PI_2.sqrt(),
            20000,
        );
    let obj = |z: f64| {
        let g = simpson(|t: f64| t.cos().sqrt(), 0.0, z.atan(), 2000);
        (1.0 + (1.0 + z * z).powf(-0.25)) / (c - g)
    };
    let scan = (0..=2000)
        .map(|i| obj(i as f64 * 5e-3))
        .fold(f64::NEG_INFINITY, f64::max);

    let anchors = (at_zero - h)
        .abs()
        .max((at_inf - h).abs())
        .max((far - h).abs());
    let passed = (hs - 1.1890).abs() <= 1e-3 && anchors <= 1e-6 && (hs - scan).abs() <= 1e-4;
    outcome(
        passed,
        format!("h^* = {hs:.6} (target 1.1890 +- 1e-3), scan oracle {scan:.6}, anchor gap {anchors:.2e} (tol 1e-6)"),
    )
}

fn random_smooth(rng: &mut impl Rng, m: usize, modes: usize, amp: f64) -> Vec<f64> {
    let c: Vec<f64> = (1..=modes)
        .map(|k| amp * rng.gen_range(-1.0..1.0) / k as f64)
        .collect();
    (0..=m)
        .map(|j| {
            let x = j as f64 / m as f64;
            c.iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * PI * x).sin())
                .sum()
        })
        .collect()
}

fn objective(v: &GridFunction, prev: &GridFunction, tau: f64, lambda: f64) -> f64 {
    energy(v, lambda).unwrap().penalized + penalty(v, prev, tau).unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &m in &[32usize, 64, 128] {
        let count = if m == 128 { 66 } else { 67 };
        for _ in 0..count {
            let lambda = rng.gen_range(0.0..2.0);
            let tau = 10f64.powf(rng.gen_range(-5.0..-2.0));
            let psi = ObstacleSpec::cone(rng.gen_range(0.05..0.4)).sample(m);
            // feasible: lift random shapes above the obstacle
            let lift = |w: Vec<f64>| {
                let vals: Vec<f64> = w.iter().zip(&psi).map(|(a, p)| a.max(*p)).collect();
                let mut vals = vals;
                vals[0] = 0.0;
                vals[m] = 0.0;
                GridFunction::new(vals).unwrap()
            };
            let prev = lift(random_smooth(&mut rng, m, 6, 0.5));
            let v = lift(
                prev.values()
                    .iter()
                    .zip(random_smooth(&mut rng, m, 10, 0.05))
                    .map(|(a, b)| a + b)
                    .collect(),
            );
            let g = grad_g(&v, &prev, tau, lambda).unwrap();
            let scale = g[1..m].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let mut err = 0.0f64;
            for j in 1..m {
                let step = 1e-6 * (1.0 + v.values()[j].abs());
                let shifted = |d: f64| {
                    let mut w = v.values().to_vec();
                    w[j] += d;
                    objective(&GridFunction::new(w).unwrap(), &prev, tau, lambda)
                };
                let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
                err = err.max((fd - g[j]).abs());
            }
            worst = worst.max(err / scale);
            cases += 1;
        }
    }
    outcome(
        worst < 1e-6,
        format!("max relative error {worst:.2e} over {cases} functions (tol 1e-6)"),
    )
}

fn cone_run() -> (GridFunction, FlowResult) {
    let u0 = GridFunction::from_fn(100, |x| 0.3 * (PI * x).sin()).unwrap();
    let params = SchemeParams::new(&u0, 0.0, 200, Horizon::Auto, InnerSettings::default()).unwrap();
    let result = run(&u0, &ObstacleSpec::cone(0.3), &params).unwrap();
    (u0, result)
}

fn criterion_6(u0: &GridFunction, result: &FlowResult) -> Outcome {
    let e0 = energy(u0, 0.0).unwrap().penalized;
    let psi = &result.psi;
    let m = result.params.m;
    let mut rise = f64::NEG_INFINITY;
    let mut dissipation = 0.0;
    let mut below = 0usize;
    let mut endpoint_active = 0usize;
    for pair in result.steps.windows(2) {
        rise = rise.max(pair[1].energy.penalized - pair[0].energy.penalized);
    }
    for st in &result.steps {
        dissipation += 2.0 * st.penalty_value;
        below += st.u.values().iter().zip(psi).filter(|(u, p)| u < p).count();
        endpoint_active += st.active_set.iter().filter(|&&j| j == 0 || j == m).count();
    }
    let slope = result.summary.max_slope;
    let cap = 2.0 * result.params.m0;
    let a = rise <= 1e-10 * (1.0 + e0);
    let b = dissipation <= 2.0 * e0 + 1e-8;
    let d = slope <= cap;
    let passed = result.is_complete() && a && b && below == 0 && d && endpoint_active == 0;
    outcome(
        passed,
        format!(
            "T = {:.3e}; (a) max rise {rise:.2e}; (b) sum 2P = {dissipation:.3e} <= {:.4}; (c) {below} nodes below; \
             (d) slope {slope:.4} <= {cap:.4}; (e) {endpoint_active} endpoint activations",
            result.params.horizon,
            2.0 * e0 + 1e-8
        ),
    )
}

fn criterion_7(result: &FlowResult) -> Outcome {
    let psi = &result.psi;
    let max_atom = result
        .steps
        .iter()
        .map(|s| s.multipliers.max_atom())
        .fold(0.0f64, f64::max);
    let mut off = 0.0f64;
    for st in &result.steps {
        for (j, (u, p)) in st.u.values().iter().zip(psi).enumerate() {
            if u - p > CLEARANCE {
                off = off.max(st.multipliers.atoms[j]);
            }
        }
    }
    outcome(
        off <= COMPLEMENTARITY_RATIO * max_atom,
        format!("max off-contact atom {off:.2e}, max atom {max_atom:.4e}"),
    )
}

fn criterion_8() -> Outcome {
    let (h, m, n) = (0.4, 128, 50);
    let u0 = symmetric_stationary(h, m).unwrap();
    let params = SchemeParams::new(&u0, 0.0, n, Horizon::Auto, InnerSettings::default()).unwrap();
    let result = run(&u0, &ObstacleSpec::cone(h), &params).unwrap();
    let e0 = result.summary.initial_energy;
    let dx = 1.0 / m as f64;
    let step_change = result
        .steps
        .windows(2)
        .map(|p| (p[1].energy.penalized - p[0].energy.penalized).abs())
        .fold(0.0f64, f64::max);
    let drift = result
        .steps
        .iter()
        .map(|s| s.u.sup_distance(&u0).unwrap())
        .fold(0.0f64, f64::max);
    let probe = regularity_probe(&result.last().u).unwrap();
    let passed = result.is_complete()
        && step_change <= 1e-8 * e0
        && drift <= 5.0 * dx * dx
        && probe.flagged == [m / 2];
    outcome(
        passed,
        format!(
            "T = {:.3e}; max step change {step_change:.2e} (tol {:.2e}); drift {drift:.2e} (tol {:.2e}); flagged {:?}",
            params.horizon,
            1e-8 * e0,
            5.0 * dx * dx,
            probe.flagged
        ),
    )
}

fn criterion_9() -> Outcome {
    let m = 128;
    let slack = 1.0 + 10.0 / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_slope = 0.0f64;
    let mut worst_value = 0.0f64;
    let mut failures = 0;
    for i in 0..1000 {
        let mut v = match i % 4 {
            0 => (0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            1 => random_smooth(&mut rng, m, 12, 1.0),
            2 => {
                let mut v = vec![0.0; m + 1];
                v[rng.gen_range(1..m)] = rng.gen_range(-1.0..1.0);
                v
            }
            _ => {
                let a = rng.gen_range(-1.0..1.0);
                let b = rng.gen_range(-1.0..1.0);
                (0..=m)
                    .map(|j| {
                        let x = j as f64 / m as f64;
                        x * (1.0 - x) * (a + b * x * x)
                    })
                    .collect::<Vec<f64>>()
            }
        };
        v[0] = 0.0;
        v[m] = 0.0;
        let b = interpolation_bound(&GridFunction::new(v).unwrap()).unwrap();
        if b.h == 0.0 {
            continue;
        }
        worst_slope = worst_slope.max(b.ratio());
        worst_value = worst_value.max(b.value_sup / b.slope_sup);
        if !b.holds(slack) {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "{failures} violations; max |u'|/bound {worst_slope:.4}, max |u|/|u'| {worst_value:.4} (slack {slack:.4})"
        ),
    )
}

fn criterion_10() -> Outcome {
    let ledger = |dir: &std::path::Path| {
        let text = format!(
            r#"{{"lambda": 0.0, "m": 100, "n": 200, "T": "auto",
                "obstacle": {{"kind": "symmetric_cone", "height": 0.3}},
                "u0": {{"kind": "sine", "amplitude": 0.3}},
                "output_dir": {:?}}}"#,
            dir.to_str().unwrap()
        );
        cmd_run(&RunConfig::from_json(&text).unwrap()).unwrap();
        std::fs::read(dir.join(LEDGER_FILE)).unwrap()
    };
    let tmp = tempfile::tempdir().unwrap();
    let first = ledger(&tmp.path().join("a"));
    let second = ledger(&tmp.path().join("b"));
    outcome(
        first == second && !first.is_empty(),
        format!("{} bytes, identical: {}", first.len(), first == second),
    )
}

fn main() {
    let mut all = true;
    let mut report = |n: usize, out: Outcome| {
        all &= out.passed;
        println!(
            "criterion {n:>2}: {}  {}",
            if out.passed { "PASS" } else { "FAIL" },
            out.detail
        );
    };
    report(1, timed(Some(Duration::from_secs(5)), criterion_1));
    report(2, timed(None, criterion_2));
    report(3, timed(None, criterion_3));
    report(4, timed(None, criterion_4));
    report(5, timed(Some(Duration::from_secs(30)), criterion_5));
    let start = Instant::now();
    let (u0, result) = cone_run();
    let took = start.elapsed();
    report(
        6,
        timed(None, || {
            let mut out = criterion_6(&u0, &result);
            out.detail = format!("{} run {took:.2?}", out.detail);
            out.passed &= took <= Duration::from_secs(60);
            out
        }),
    );
    report(7, timed(None, || criterion_7(&result)));
    report(8, timed(None, criterion_8));
    report(9, timed(None, criterion_9));
    report(10, timed(None, criterion_10));
    if !all {
        std::process::exit(1);
    }
}
