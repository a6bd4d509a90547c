//! Equilibria of the reduced and full models at the default operating
//! point, with their spectra.
//!
//! cargo run --release --example equilibria -- [P_pev]

use pev_stability::equilibrium::{
    full_guess_from_planar, max_loadability, solve_full_equilibrium, solve_planar_equilibria,
};
use pev_stability::{CircuitParams, GridInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = CircuitParams::paper_defaults();
    let mut u = GridInput::paper_defaults();
    if let Some(pw) = std::env::args().nth(1) {
        u = u.with_power(pw.parse()?);
    }
    println!(
        "E_d = {} V, P = {} W, P_max = {:.1} W, R/X = {:.4}",
        u.e_d,
        u.p_pev,
        max_loadability(u.e_d, &p),
        p.r_over_x()
    );
    let eqs = solve_planar_equilibria(&u, &p);
    if eqs.is_empty() {
        println!("no equilibrium: the load exceeds the loadability limit");
        return Ok(());
    }
    for eq in &eqs {
        println!(
            "planar  V_d = {:>12.6} V  I_d = {:>14.6} A  {:?}  λ = {:?}",
            eq.state.v_d, eq.state.i_d, eq.classification, eq.eigenvalues
        );
    }
    let (full, iters) = solve_full_equilibrium(&u, &p, &full_guess_from_planar(&eqs[0].state, &u, &p))?;
    let s = full.state;
    println!(
        "full    I_d = {:.6} A  I_q = {:.6} A  V_d = {:.6} V  V_q = {:.6} V  {:?} ({iters} Newton steps)",
        s.i_d, s.i_q, s.v_d, s.v_q, full.classification
    );
    for l in &full.eigenvalues {
        println!("        λ = {l}");
    }
    Ok(())
}
