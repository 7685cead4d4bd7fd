//! Runs a short flow and prints the full a-posteriori verdict, the
//! dissipation ledger and the velocity on the coincidence set.
//!
//! cargo run --release --example verify_run

use std::f64::consts::PI;

use elastic_obstacle::diagnostics::{
    check_flow, coincidence_velocity_check, dissipation_vs_energy,
};
use elastic_obstacle::scheme::{run, Horizon, InnerSettings, SchemeParams};
use elastic_obstacle::{GridFunction, ObstacleSpec};

fn main() -> elastic_obstacle::Result<()> {
    let m = 64;
    let u0 = GridFunction::from_fn(m, |x| 0.3 * (PI * x).sin())?;
    let params = SchemeParams::new(&u0, 0.5, 40, Horizon::Fixed(2e-4), InnerSettings::default())?;
    let result = run(&u0, &ObstacleSpec::cone(0.3), &params)?;

    let verdict = check_flow(&result)?;
    println!("verdict: {}", if verdict.passed { "PASS" } else { "FAIL" });
    for it in &verdict.items {
        println!(
            "  {:<26} {:<8} {:<5} measured {:>12.4e}  threshold {:>12.4e}  {}",
            it.name,
            format!("{:?}", it.severity),
            it.passed,
            it.measured,
            it.threshold,
            it.detail
        );
    }

    let table = dissipation_vs_energy(&result);
    println!("min slack of E0 - E_i - sum 2P: {:.3e}", table.min_slack);
    let coin = coincidence_velocity_check(&result);
    println!("coincidence velocity: {coin:?}");
    Ok(())
}
