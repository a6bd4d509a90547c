//! Critical clearing time of a sag or surge, by bisection on simulated
//! outcomes and by the exit time from the region of attraction.
//!
//! cargo run --release --example critical_clearing_time -- surge 28000
//! cargo run --release --example critical_clearing_time -- sag 330

use std::time::Instant;

use pev_stability::scenario::{
    default_bracket, faulted_equilibrium, find_cct_bisection, find_cct_roa, CctConfig, DisturbanceScenario,
};
use pev_stability::{CircuitParams, GridInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let kind = args.next().unwrap_or_else(|| "surge".into());
    let value: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(28000.0);
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let s = match kind.as_str() {
        "sag" => DisturbanceScenario::sag(u, value, 0.05),
        _ => DisturbanceScenario::surge(u, value, 0.05),
    };
    let cfg = CctConfig::default();
    println!(
        "{kind} to {value}: faulted equilibrium {:?}",
        faulted_equilibrium(&s, &p)
    );

    let t = Instant::now();
    let b = find_cct_bisection(&s, &p, &cfg, default_bracket(&s, &cfg), cfg.tol_t)?;
    println!(
        "bisection: t_cr = {:.6} s (fault {:.6} s), bracket ({:.6}, {:.6}), verified {}, {} probes, {:.2} s",
        b.t_cr,
        b.fault_duration(&s),
        b.bracket.0,
        b.bracket.1,
        b.verified,
        b.probes,
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    match find_cct_roa(&s, &p, &cfg) {
        Ok(r) => println!(
            "roa exit:  t_cr = {:.6} s (fault {:.6} s), bracket ({:.6}, {:.6}), verified {}, {:.2} s",
            r.t_cr,
            r.fault_duration(&s),
            r.bracket.0,
            r.bracket.1,
            r.verified,
            t.elapsed().as_secs_f64()
        ),
        Err(e) => println!("roa exit:  {e}"),
    }
    Ok(())
}
