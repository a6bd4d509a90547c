//! Traces the unstable limit cycle around the operating point and reports
//! the region of attraction it bounds.
//!
//! ```bash
//! cargo run --release --example region_of_attraction -- 19200
//! ```

use std::time::Instant;

use pev_stability::roa::{contains, roa_report, RoaConfig};
use pev_stability::{CircuitParams, GridInput, PlanarState};

fn main() {
    let p_pev: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(19200.0);
    let params = CircuitParams::paper_defaults();
    let input = GridInput::paper_defaults().with_power(p_pev);

    let start = Instant::now();
    let report = match roa_report(&input, &params, &RoaConfig::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("P = {p_pev} W: {e}");
            std::process::exit(1);
        }
    };
    let c = &report.curve;
    let (dv, di) = c.amplitude();
    println!("P = {p_pev} W, traced in {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    println!("equilibrium     {}", c.center);
    println!("vertices        {}", c.vertices.len());
    println!("period          {:.4e} s", c.period);
    println!("closure         {:.3e} V", c.closure_residual);
    println!("amplitude       dV_d = {dv:.4} V, dI_d = {di:.4} A");
    println!("area            {:.6e} V*A", report.area);
    let e = report.extents;
    println!(
        "extents         V_d [{:.3}, {:.3}] V, I_d [{:.3}, {:.3}] A",
        e.v_d_min, e.v_d_max, e.i_d_min, e.i_d_max
    );

    let probe = PlanarState::new(c.center.v_d + 0.5 * dv, c.center.i_d);
    println!("contains {probe}: {}", contains(c, &probe));
}
