//! Full four-state model through a short surge, mapped back to phase
//! voltages. Writes `t,v_a,v_b,v_c` CSV on stdout.
//!
//! cargo run --release --example three_phase_waveforms > abc.csv

use pev_stability::equilibrium::{full_guess_from_planar, operating_point, solve_full_equilibrium};
use pev_stability::model::dq_to_abc;
use pev_stability::odeint::{integrate, IntegratorConfig, ScheduledEvent};
use pev_stability::{CircuitParams, GridInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let planar = operating_point(&u, &p).ok_or("no operating point")?;
    let (eq, _) = solve_full_equilibrium(&u, &p, &full_guess_from_planar(&planar, &u, &p))?;
    let events = [
        ScheduledEvent {
            t: 0.01,
            new_input: u.with_power(24000.0),
        },
        ScheduledEvent { t: 0.02, new_input: u },
    ];
    let traj = integrate(eq.state, u, &p, (0.0, 0.05), &events, &IntegratorConfig::default())?;
    println!("t,v_a,v_b,v_c");
    let n = 5000;
    for k in 0..=n {
        let t = 0.05 * k as f64 / n as f64;
        let x = traj.sample(t);
        let abc = dq_to_abc(x.v_d, x.v_q, t, p.omega, 0.0);
        println!("{},{},{},{}", abc.t, abc.a, abc.b, abc.c);
    }
    Ok(())
}
