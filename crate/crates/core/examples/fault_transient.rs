//! One fault-then-clear transient: a load surge applied at t_start and
//! removed at t_clear. Prints the outcome and a coarse trace.
//!
//! cargo run --release --example fault_transient -- 28000 0.065

use pev_stability::scenario::{faulted_equilibrium, simulate_fault, CctConfig, DisturbanceScenario};
use pev_stability::{CircuitParams, GridInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let p_f = args.next().transpose()?.unwrap_or(28000.0);
    let t_clear = args.next().transpose()?.unwrap_or(0.065);
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let s = DisturbanceScenario::surge(u, p_f, 0.05);
    let cfg = CctConfig::default();
    let (traj, outcome) = simulate_fault(&s, t_clear, &p, &cfg, cfg.default_t_end(&s))?;
    println!(
        "surge to {p_f} W at {} s, cleared at {t_clear} s: {outcome:?}",
        s.t_start
    );
    println!(
        "faulted equilibrium {:?}, {} accepted steps",
        faulted_equilibrium(&s, &p),
        traj.times.len()
    );
    let (t_end, _) = traj.last();
    for k in 0..=20 {
        let t = t_end * k as f64 / 20.0;
        let x = traj.sample(t);
        println!("t = {t:.4} s  V_d = {:>10.4} V  I_d = {:>10.4} A", x.v_d, x.i_d);
    }
    Ok(())
}
