//! The rectangular elastica: closed-form points against a fourth-order
//! Runge–Kutta integration of the curvature, written as CSV to stdout.
//!
//! cargo run --release --example rectangular_elastica > arc.csv

use elastic_obstacle::elastica::{rect_arc, rect_curvature, rect_point, rect_quarter_period};

fn main() -> elastic_obstacle::Result<()> {
    let s_max = 2.0 * rect_quarter_period();
    let samples = 257;
    let arc = rect_arc(s_max, samples, std::f64::consts::FRAC_PI_2)?;
    let mut worst = 0.0f64;
    println!("s,k,x,y,x_rk4,y_rk4");
    for i in 0..arc.len() {
        let s = arc.s[i];
        let p = rect_point(s)?;
        let [xr, yr] = arc.points[i];
        worst = worst.max((p.x - xr).hypot(p.y - yr));
        println!(
            "{s:.12},{:.12},{:.12},{:.12},{xr:.12},{yr:.12}",
            rect_curvature(s),
            p.x,
            p.y
        );
    }
    eprintln!("max |closed form - RK4| = {worst:.3e} over {samples} samples");
    Ok(())
}
