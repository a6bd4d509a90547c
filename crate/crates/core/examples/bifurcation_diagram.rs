//! Equilibrium branches over load power, the Hopf point, and the unstable
//! cycle amplitudes that shrink into it.
//!
//! cargo run --release --example bifurcation_diagram [steps]

use pev_stability::bifurcation::{
    attach_cycle_amplitudes, branch_csv, cycle_amplitude_sweep, default_hopf_bracket, find_hopf, scaling_exponent,
    sweep_equilibria,
};
use pev_stability::roa::RoaConfig;
use pev_stability::{CircuitParams, GridInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(41);
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let hopf = find_hopf(u.e_d, &p, default_hopf_bracket(&u, &p), 1e-12)?;
    println!(
        "Hopf: P = {:.3} W, V_d = {:.4} V, I_d = {:.4} A, omega = {:.1} rad/s",
        hopf.p_hopf, hopf.state.v_d, hopf.state.i_d, hopf.omega_hopf
    );

    let cfg = RoaConfig::default();
    let mut branch = sweep_equilibria(u.e_d, &p, (0.0, 1.2 * hopf.p_hopf), steps)?;
    attach_cycle_amplitudes(&mut branch, u.e_d, &p, &cfg);
    print!("{}", branch_csv(&branch));

    let eps = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3];
    let samples: Vec<f64> = eps.iter().map(|e| hopf.p_hopf * (1.0 - e)).collect();
    let amps = cycle_amplitude_sweep(u.e_d, &p, &samples, &cfg)?;
    for (pw, a) in &amps {
        println!("P = {pw:.2} W  dV_d = {:.4} V  dI_d = {:.4} A", a.dv_d, a.di_d);
    }
    println!("scaling exponent: {:.4}", scaling_exponent(hopf.p_hopf, &amps));
    Ok(())
}
