//! Cross-checks the traced region of attraction against forward
//! simulation: sampled interior points must converge, sampled points just
//! outside must escape.
//!
//! cargo run --release --example roa_dynamics_check [seed]

use pev_stability::roa::{check_dynamics, trace_unstable_limit_cycle, DynamicsCheckConfig, RoaConfig};
use pev_stability::{CircuitParams, GridInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let curve = trace_unstable_limit_cycle(&u, &p, &RoaConfig::default())?;
    let check = check_dynamics(&curve, &u, &p, &DynamicsCheckConfig::default(), seed)?;
    let interior = check.samples.iter().filter(|s| s.interior).count();
    println!(
        "{interior} interior and {} exterior samples, {} misclassified",
        check.samples.len() - interior,
        check.misclassified
    );
    for s in check.samples.iter().filter(|s| !s.consistent()) {
        println!(
            "  {} interior={} outcome={:?} left_box={}",
            s.state, s.interior, s.outcome, s.left_box
        );
    }
    Ok(())
}
