//! Drives the discrete flow of `0.3·sin(πx)` against the default cone of
//! height 0.3 (tip touching from the start) and prints the run summary.
//!
//! cargo run --release --example flow_on_cone [-- <T>]

use std::f64::consts::PI;
use std::time::Instant;

use elastic_obstacle::scheme::{run, Horizon, InnerSettings, SchemeParams};
use elastic_obstacle::{GridFunction, ObstacleSpec};

fn main() -> elastic_obstacle::Result<()> {
    let horizon = match std::env::args().nth(1) {
        Some(t) => Horizon::Fixed(t.parse().expect("T must be a number")),
        None => Horizon::Auto,
    };
    let (m, n) = (100, 200);
    let u0 = GridFunction::from_fn(m, |x| 0.3 * (PI * x).sin())?;
    let psi = ObstacleSpec::cone(0.3);
    let params = SchemeParams::new(&u0, 0.0, n, horizon, InnerSettings::default())?;
    println!(
        "M0 = {:.6}  rho = {:.6}  T = {:.6e}  tau = {:.6e}",
        params.m0, params.rho, params.horizon, params.tau
    );

    let start = Instant::now();
    let result = run(&u0, &psi, &params)?;
    println!("status: {:?}  ({:.2?})", result.status, start.elapsed());
    for step in result.steps.iter().step_by(n / 10) {
        println!(
            "i = {:4}  E = {:.12e}  P = {:.3e}  active = {:?}  mu = {:.6e}  iters = {}",
            step.index,
            step.energy.penalized,
            step.penalty_value,
            step.active_set,
            step.multipliers.total,
            step.iterations
        );
    }
    let s = &result.summary;
    println!(
        "E0 = {:.12e}  E_n = {:.12e}  sum 2P = {:.6e}",
        s.initial_energy, s.final_energy, s.dissipation
    );
    println!(
        "max |u'| = {:.6}  (cap {:.6})  warning: {}",
        s.max_slope, params.cap, s.slope_warning
    );
    println!("max ||u''|| = {:.6}  bound {:.6}", s.max_h2, s.h2_bound);
    println!(
        "measure sum = {:.6e}  boundary radius = {:.6}",
        s.measure_sum, s.boundary_radius
    );
    Ok(())
}
