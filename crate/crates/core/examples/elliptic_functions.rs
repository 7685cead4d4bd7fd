//! Jacobi elliptic functions and integrals at a user-chosen modulus.
//!
//! cargo run --release --example elliptic_functions [-- <q>]

use elastic_obstacle::special_fn::EllipticModulus;

fn main() -> elastic_obstacle::Result<()> {
    let q: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("q must be a number"))
        .unwrap_or(0.5f64.sqrt());
    let md = EllipticModulus::new(q)?;
    let k = md.complete_k();
    println!("q = {q}  K = {:.15}  E = {:.15}", k, md.complete_e());
    println!(
        "\n{:>8} {:>18} {:>18} {:>18} {:>10}",
        "x/K", "sn", "cn", "dn", "F(am x)-x"
    );
    for i in 0..=8 {
        let x = k * i as f64 / 2.0;
        let (sn, cn, dn) = md.sncndn(x)?;
        let back = md.f(md.am(x)?)? - x;
        println!(
            "{:>8.2} {sn:>18.15} {cn:>18.15} {dn:>18.15} {back:>10.1e}",
            x / k
        );
    }
    Ok(())
}
