//! Scans sag depth and surge size for magnitudes whose critical clearing
//! times land in the published brackets, t_cr ∈ (0.085, 0.15) s for the
//! sag and (0.068, 0.08) s for the surge, with the fault at 0.05 s.
//!
//! cargo run --release --example cct_brackets [-- fixtures/cct_brackets.json]

use pev_stability::scenario::{
    find_magnitude_for_target, magnitude_scan, CctConfig, DisturbanceScenario, MagnitudeProbe,
};
use pev_stability::{CircuitParams, GridInput};
use serde::Serialize;

pub const T_START: f64 = 0.05;
pub const SAG_TARGET: (f64, f64) = (0.085, 0.15);
pub const SURGE_TARGET: (f64, f64) = (0.068, 0.08);

#[derive(Serialize)]
struct Fixture {
    kind: &'static str,
    t_start: f64,
    target: (f64, f64),
    faulted_value: f64,
    t_cr: f64,
    ladder: Vec<MagnitudeProbe>,
}

fn ladder(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|k| from + step * k as f64).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1);
    let (u, p) = (GridInput::paper_defaults(), CircuitParams::paper_defaults());
    let cfg = CctConfig::default();
    let mut fixtures = Vec::new();
    for (kind, s, values, target) in [
        (
            "sag",
            DisturbanceScenario::sag(u, 343.0, T_START),
            ladder(341.0, 344.0, 0.5),
            SAG_TARGET,
        ),
        (
            "surge",
            DisturbanceScenario::surge(u, 27500.0, T_START),
            ladder(26000.0, 30000.0, 500.0),
            SURGE_TARGET,
        ),
    ] {
        let scan = magnitude_scan(&s, &p, &cfg, &values)?;
        for m in &scan {
            let t = m
                .t_cr
                .map_or("no valid bracket".to_string(), |t| format!("t_cr = {t:.5} s"));
            println!(
                "{kind} {:>9.2}: {:?} faulted equilibrium, {t}",
                m.faulted_value, m.faulted_equilibrium
            );
        }
        let hit = find_magnitude_for_target(&scan, target).ok_or(format!("no {kind} magnitude hits {target:?}"))?;
        println!(
            "-> {kind} {} gives t_cr = {:.5} s in {target:?}\n",
            hit.faulted_value,
            hit.t_cr.unwrap()
        );
        fixtures.push(Fixture {
            kind,
            t_start: T_START,
            target,
            faulted_value: hit.faulted_value,
            t_cr: hit.t_cr.unwrap(),
            ladder: scan,
        });
    }
    if let Some(path) = out {
        std::fs::write(&path, pev_stability::cli::to_json(&fixtures))?;
        println!("wrote {path}");
    }
    Ok(())
}
