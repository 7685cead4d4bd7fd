//! The symmetric stationary solution under a cone of height `h`: its
//! construction parameters, the tested stationary inequality and the
//! third-derivative jump detected at the tip.
//!
//! cargo run --release --example stationary_profile [-- <h> <m>]

use elastic_obstacle::diagnostics::{regularity_probe, standard_battery, stationary_vi_residual};
use elastic_obstacle::elastica::stationary_profile;
use elastic_obstacle::ObstacleSpec;

fn main() -> elastic_obstacle::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args
        .next()
        .map(|s| s.parse().expect("h must be a number"))
        .unwrap_or(0.4);
    let m: usize = args
        .next()
        .map(|s| s.parse().expect("m must be an integer"))
        .unwrap_or(128);

    let st = stationary_profile(h, m)?;
    println!("h = {h}  m = {m}");
    println!(
        "s0 = {:.12}  rotation = {:.12}  dilation = {:.12}",
        st.s0, st.rotation, st.dilation
    );
    println!(
        "max curvature = {:.6}  u'''(1/2-) = {:.6}",
        st.max_curvature(),
        st.tip_third_derivative()
    );

    let psi = ObstacleSpec::cone(h);
    let tests = standard_battery(&st.profile, None, &psi.sample(m))?;
    let vi = stationary_vi_residual(&st.profile, &psi, 0.0, &tests)?;
    println!(
        "stationary VI: min residual {:.3e} over {} tests (worst {})",
        vi.min_residual, vi.tested_count, vi.worst_test
    );

    let probe = regularity_probe(&st.profile)?;
    println!(
        "probe median {:.3e}, flagged nodes {:?} (tip = {})",
        probe.median,
        probe.flagged,
        m / 2
    );
    Ok(())
}
