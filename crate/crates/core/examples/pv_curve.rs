//! Static P–V curve up to the loadability nose, as CSV on stdout.
//!
//! cargo run --release --example pv_curve > pv.csv

use pev_stability::equilibrium::{max_loadability, pv_curve};
use pev_stability::{CircuitParams, GridInput};

fn main() {
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let limit = max_loadability(u.e_d, &p);
    // denser sampling near the nose, where the branches meet
    let grid: Vec<f64> = (0..=100)
        .map(|k| limit * (1.0 - (1.0 - k as f64 / 100.0).powi(2)))
        .collect();
    println!("P,V_high,V_low");
    for pt in pv_curve(u.e_d, &p, &grid) {
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        println!("{},{},{}", pt.p, f(pt.v_high), f(pt.v_low));
    }
    eprintln!("nose at P_max = {limit:.1} W, V = {:.4} V", u.e_d / 2.0);
}
