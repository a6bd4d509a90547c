use pev_stability::odeint::Outcome;
use pev_stability::roa::trace_unstable_limit_cycle;
use pev_stability::scenario::{
    default_bracket, faulted_equilibrium, find_cct_bisection, probe, roa_exit_time, CctConfig, DisturbanceScenario,
    FaultedEquilibrium, ScenarioError,
};
use pev_stability::{CircuitParams, GridInput};

fn paper() -> (GridInput, CircuitParams) {
    (GridInput::paper_defaults(), CircuitParams::paper_defaults())
}

#[test]
fn stronger_surges_leave_the_region_sooner() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let curve = trace_unstable_limit_cycle(&u, &p, &cfg.roa).unwrap();
    let exits: Vec<f64> = [26000.0, 27000.0, 28000.0, 30000.0, 35000.0]
        .iter()
        .map(|&pw| {
            roa_exit_time(&DisturbanceScenario::surge(u, pw, 0.05), &p, &cfg, &curve)
                .unwrap()
                .0
        })
        .collect();
    for w in exits.windows(2) {
        assert!(w[1] <= w[0], "{exits:?}");
    }
}

#[test]
fn exit_state_lies_on_the_boundary() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let curve = trace_unstable_limit_cycle(&u, &p, &cfg.roa).unwrap();
    let s = DisturbanceScenario::surge(u, 27500.0, 0.05);
    let (t, x) = roa_exit_time(&s, &p, &cfg, &curve).unwrap();
    assert!(t > s.t_start);
    assert!(curve.boundary_distance(&x) < 1e-3, "{}", curve.boundary_distance(&x));
}

#[test]
fn brief_faults_recover() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    for s in [
        DisturbanceScenario::surge(u, 27500.0, 0.05),
        DisturbanceScenario::sag(u, 343.0, 0.05),
    ] {
        let t_end = cfg.default_t_end(&s);
        let (_, o) = probe(&s, s.t_start + 1e-6, &p, &cfg, t_end).unwrap();
        assert_eq!(o, Outcome::Converged, "{s:?}");
    }
}

#[test]
fn sag_clears_early_recovers_late_collapses() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let s = DisturbanceScenario::sag(u, 343.0, 0.05);
    assert_eq!(faulted_equilibrium(&s, &p), FaultedEquilibrium::Stable);
    let t_end = cfg.default_t_end(&s);
    assert_eq!(probe(&s, 0.06, &p, &cfg, t_end).unwrap().1, Outcome::Converged);
    assert_eq!(probe(&s, 0.15, &p, &cfg, t_end).unwrap().1, Outcome::Diverged);
}

#[test]
fn bracket_already_within_tolerance_needs_no_bisection() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let s = DisturbanceScenario::surge(u, 27500.0, 0.05);
    let bracket = (0.060, 0.090);
    let r = find_cct_bisection(&s, &p, &cfg, bracket, 0.030).unwrap();
    assert_eq!(r.bracket, bracket);
    // two endpoint probes and the two verification probes
    assert_eq!(r.probes, 4);
}

#[test]
fn bisection_keeps_its_invariant() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let s = DisturbanceScenario::surge(u, 27500.0, 0.05);
    let r = find_cct_bisection(&s, &p, &cfg, default_bracket(&s, &cfg), cfg.tol_t).unwrap();
    assert!(r.bracket.1 - r.bracket.0 <= cfg.tol_t);
    assert_eq!(r.witness_converged.outcome, Outcome::Converged);
    assert_eq!(r.witness_diverged.outcome, Outcome::Diverged);
    assert!(r.bracket.0 < r.t_cr && r.t_cr < r.bracket.1);
}

#[test]
fn surge_below_hopf_has_no_bracket() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let s = DisturbanceScenario::surge(u, 22000.0, 0.05);
    let r = find_cct_bisection(&s, &p, &cfg, default_bracket(&s, &cfg), cfg.tol_t);
    assert!(matches!(r, Err(ScenarioError::InvalidBracket { .. })), "{r:?}");
}

#[test]
fn invalid_scenarios_are_rejected() {
    let (u, p) = paper();
    let cfg = CctConfig::default();
    let s = DisturbanceScenario::surge(u, -1.0, 0.05);
    assert!(matches!(s.validate(), Err(ScenarioError::InvalidScenario(_))));
    let ok = DisturbanceScenario::surge(u, 27500.0, 0.05);
    let r = find_cct_bisection(&ok, &p, &cfg, (0.04, 0.1), cfg.tol_t);
    assert!(matches!(r, Err(ScenarioError::InvalidScenario(_))));
}
