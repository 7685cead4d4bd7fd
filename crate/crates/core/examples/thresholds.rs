//! The threshold constants: `c₀`, the pinned height `h* = 2/c₀` and the
//! clamped height `h^*`, with a short table of the clamped objective.
//!
//! cargo run --release --example thresholds

use elastic_obstacle::elastica::{
    c0, clamped_objective, h_star, h_star_clamped, rect_point, rect_quarter_period,
};

fn main() -> elastic_obstacle::Result<()> {
    println!("c0      = {:.15}", c0());
    println!("h*      = {:.15}", h_star());
    println!("h^*     = {:.15}", h_star_clamped());

    // the arch height over the chord of the full rectangular elastica
    let top = rect_point(rect_quarter_period())?;
    let end = rect_point(2.0 * rect_quarter_period())?;
    println!("arch y/x = {:.15}", top.y / end.x);

    println!("\n{:>10}  {:>18}", "z", "objective(z)");
    for z in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 1e4, f64::INFINITY] {
        println!("{z:>10.1}  {:>18.15}", clamped_objective(z)?);
    }
    Ok(())
}
