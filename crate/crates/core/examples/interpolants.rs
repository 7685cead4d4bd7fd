//! Time interpolants of a discrete flow and the derivative interpolation
//! inequality along it.
//!
//! cargo run --release --example interpolants

use std::f64::consts::PI;

use elastic_obstacle::diagnostics::interpolation_bound;
use elastic_obstacle::scheme::{
    eval_interpolant, run, Horizon, InnerSettings, InterpolantKind, SchemeParams,
};
use elastic_obstacle::{GridFunction, ObstacleSpec};

fn main() -> elastic_obstacle::Result<()> {
    let m = 64;
    let u0 = GridFunction::from_fn(m, |x| 0.25 * (PI * x).sin() + 0.05 * (3.0 * PI * x).sin())?;
    let params = SchemeParams::new(&u0, 1.0, 10, Horizon::Fixed(1e-4), InnerSettings::default())?;
    let result = run(&u0, &ObstacleSpec::flat(-1.0), &params)?;
    let tau = params.tau;

    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "t/tau", "linear", "upper", "lower"
    );
    for k in 0..=8 {
        let t = (k as f64 * 0.625 * tau).min(result.time(result.steps.len() - 1));
        let mid = |kind| eval_interpolant(&result, kind, t).map(|u| u.values()[m / 2]);
        println!(
            "{:>8.3} {:>14.10} {:>14.10} {:>14.10}",
            t / tau,
            mid(InterpolantKind::Linear)?,
            mid(InterpolantKind::Upper)?,
            mid(InterpolantKind::Lower)?
        );
    }

    println!(
        "\n{:>4} {:>12} {:>12} {:>8}",
        "i", "|u'|_inf", "bound", "ratio"
    );
    for st in result.steps.iter().step_by(2) {
        let b = interpolation_bound(&st.u)?;
        println!(
            "{:>4} {:>12.6} {:>12.6} {:>8.4}",
            st.index,
            b.slope_sup,
            b.bound,
            b.ratio()
        );
    }
    Ok(())
}
