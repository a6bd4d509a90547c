//! Large-disturbance scenarios and critical clearing times.
//!
//! A scenario starts at the stable pre-fault equilibrium, switches the
//! input to its faulted value at `t_start`, and restores the base input at
//! the clearing time. The critical clearing time is the latest clearing
//! instant after which the state still returns to the pre-fault
//! equilibrium. It is found two ways: bisection on simulated outcomes, and
//! the first exit of the fault-on trajectory from the region of attraction
//! of the base input.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{classify_planar, operating_point};
use crate::model::{CircuitParams, GridInput, ModelError, PlanarState, StateVector};
use crate::odeint::{
    classify_outcome, integrate, Flow, IntegrateError, IntegratorConfig, Outcome, ScheduledEvent, Trajectory,
};
use crate::roa::{contains, trace_unstable_limit_cycle, ClosedCurve, RoaConfig, RoaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no stable pre-fault equilibrium at {0:?}")]
    NoStablePreFault(GridInput),
    #[error("invalid bracket: clearing at {t_lo} s and {t_hi} s both give {outcome:?}")]
    InvalidBracket { t_lo: f64, t_hi: f64, outcome: Outcome },
    #[error("outcome of clearing at {t_clear} s still undecided at t_end = {t_end} s")]
    Undecided { t_clear: f64, t_end: f64 },
    #[error("fault-on trajectory never leaves the region of attraction before {t_end} s")]
    NeverExits { t_end: f64 },
    #[error("witness re-simulation disagrees: clearing at {t_clear} s gave {outcome:?}")]
    WitnessMismatch { t_clear: f64, outcome: Outcome },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Roa(#[from] RoaError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultKind {
    Sag,
    Surge,
}

/// Scenario in its JSON form:
/// `{base: {E_d, E_q, P_pev}, kind: "sag" | "surge", faulted_value, t_start}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceScenario {
    pub base: GridInput,
    pub kind: FaultKind,
    /// Faulted E_d in volts (sag) or P_pev in watts (surge).
    pub faulted_value: f64,
    pub t_start: f64,
}

impl DisturbanceScenario {
    pub fn sag(base: GridInput, e_d_faulted: f64, t_start: f64) -> Self {
        Self {
            base,
            kind: FaultKind::Sag,
            faulted_value: e_d_faulted,
            t_start,
        }
    }

    pub fn surge(base: GridInput, p_faulted: f64, t_start: f64) -> Self {
        Self {
            base,
            kind: FaultKind::Surge,
            faulted_value: p_faulted,
            t_start,
        }
    }

    pub fn with_faulted_value(self, v: f64) -> Self {
        Self {
            faulted_value: v,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.base.validate()?;
        let bad = |m: String| Err(ScenarioError::InvalidScenario(m));
        if !(self.t_start >= 0.0 && self.t_start.is_finite()) {
            return bad(format!("t_start must be non-negative, got {}", self.t_start));
        }
        match self.kind {
            FaultKind::Sag if !(self.faulted_value < self.base.e_d && self.faulted_value > 0.0) => bad(format!(
                "sag needs 0 < E_d_faulted < {}, got {}",
                self.base.e_d, self.faulted_value
            )),
            FaultKind::Surge if !(self.faulted_value > self.base.p_pev && self.faulted_value.is_finite()) => {
                bad(format!(
                    "surge needs P_faulted > {}, got {}",
                    self.base.p_pev, self.faulted_value
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn faulted_input(&self) -> GridInput {
        match self.kind {
            FaultKind::Sag => self.base.with_source(self.faulted_value),
            FaultKind::Surge => self.base.with_power(self.faulted_value),
        }
    }

    /// Fault-on, then clear.
    pub fn events(&self, t_clear: f64) -> [ScheduledEvent; 2] {
        [
            ScheduledEvent {
                t: self.t_start,
                new_input: self.faulted_input(),
            },
            ScheduledEvent {
                t: t_clear,
                new_input: self.base,
            },
        ]
    }
}

/// Simulation and search settings shared by both CCT methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CctConfig {
    pub integrator: IntegratorConfig,
    /// Convergence ball relative to the equilibrium norm.
    pub tol_ball_rel: f64,
    /// Final window that must stay in the ball, seconds.
    pub dwell: f64,
    /// Simulation horizon after the fault starts, seconds.
    pub horizon: f64,
    /// Undecided probes double the horizon at most this many times.
    pub max_extensions: u32,
    /// Bracket width at which bisection stops, seconds.
    pub tol_t: f64,
    pub roa: RoaConfig,
}

impl Default for CctConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            tol_ball_rel: 1e-3,
            dwell: 0.01,
            horizon: 0.2,
            max_extensions: 3,
            tol_t: 1e-4,
            roa: RoaConfig::default(),
        }
    }
}

impl CctConfig {
    pub fn default_t_end(&self, s: &DisturbanceScenario) -> f64 {
        s.t_start + self.horizon
    }
}

/// Stable pre-fault equilibrium of the reduced model.
pub fn pre_fault_equilibrium(s: &DisturbanceScenario, p: &CircuitParams) -> Result<PlanarState, ScenarioError> {
    let x = operating_point(&s.base, p).ok_or(ScenarioError::NoStablePreFault(s.base))?;
    if !classify_planar(&x, &s.base, p)?.is_stable() {
        return Err(ScenarioError::NoStablePreFault(s.base));
    }
    Ok(x)
}

/// Whether the faulted input keeps an equilibrium, and whether it is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultedEquilibrium {
    Stable,
    Unstable,
    Lost,
}

pub fn faulted_equilibrium(s: &DisturbanceScenario, p: &CircuitParams) -> FaultedEquilibrium {
    let u = s.faulted_input();
    match operating_point(&u, p).map(|x| classify_planar(&x, &u, p)) {
        Some(Ok(eq)) if eq.is_stable() => FaultedEquilibrium::Stable,
        Some(_) => FaultedEquilibrium::Unstable,
        None => FaultedEquilibrium::Lost,
    }
}

/// Runs one fault-then-clear sequence on [0, t_end] and classifies it
/// against the pre-fault equilibrium. Clearing at or after `t_end` means
/// the fault is never removed.
pub fn simulate_fault(
    s: &DisturbanceScenario,
    t_clear: f64,
    p: &CircuitParams,
    cfg: &CctConfig,
    t_end: f64,
) -> Result<(Trajectory<PlanarState>, Outcome), ScenarioError> {
    s.validate()?;
    if !(t_clear > s.t_start && t_end > s.t_start) {
        return Err(ScenarioError::InvalidScenario(format!(
            "need t_start < t_clear and t_start < t_end, got {}, {t_clear}, {t_end}",
            s.t_start
        )));
    }
    let x0 = pre_fault_equilibrium(s, p)?;
    let events = s.events(t_clear.min(t_end));
    let mut traj = integrate(x0, s.base, p, (0.0, t_end), &events, &cfg.integrator)?;
    let outcome = classify_outcome(&traj, &x0, cfg.tol_ball_rel * x0.norm(), cfg.dwell);
    traj.outcome = outcome;
    Ok((traj, outcome))
}

/// Simulates with the default horizon, doubling it while the outcome is
/// undecided.
pub fn probe(
    s: &DisturbanceScenario,
    t_clear: f64,
    p: &CircuitParams,
    cfg: &CctConfig,
    t_end: f64,
) -> Result<(Trajectory<PlanarState>, Outcome), ScenarioError> {
    let mut horizon = t_end - s.t_start;
    for _ in 0..=cfg.max_extensions {
        let t_end = s.t_start + horizon;
        let (traj, outcome) = simulate_fault(s, t_clear, p, cfg, t_end.max(t_clear + cfg.dwell))?;
        if outcome != Outcome::Undecided {
            return Ok((traj, outcome));
        }
        horizon *= 2.0;
    }
    Err(ScenarioError::Undecided {
        t_clear,
        t_end: s.t_start + horizon / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CctMethod {
    Bisection,
    RoaExit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CctResult {
    /// Absolute clearing time, seconds.
    pub t_cr: f64,
    pub bracket: (f64, f64),
    pub method: CctMethod,
    pub witness_converged: Trajectory<PlanarState>,
    pub witness_diverged: Trajectory<PlanarState>,
    pub probes: usize,
    /// Post-hoc re-simulation at `t_cr ∓ tol_t` gave Converged / Diverged.
    pub verified: bool,
}

impl CctResult {
    pub fn fault_duration(&self, s: &DisturbanceScenario) -> f64 {
        self.t_cr - s.t_start
    }
}

/// Default bisection bracket: just after the fault starts to the end of the
/// default horizon.
pub fn default_bracket(s: &DisturbanceScenario, cfg: &CctConfig) -> (f64, f64) {
    (s.t_start + 1e-4, cfg.default_t_end(s))
}

/// Bisection on the clearing time. The low end must converge and the high
/// end must diverge; the invariant is kept at every probe.
pub fn find_cct_bisection(
    s: &DisturbanceScenario,
    p: &CircuitParams,
    cfg: &CctConfig,
    bracket: (f64, f64),
    tol_t: f64,
) -> Result<CctResult, ScenarioError> {
    let (mut lo, mut hi) = bracket;
    if !(lo > s.t_start && hi > lo && tol_t > 0.0) {
        return Err(ScenarioError::InvalidScenario(format!(
            "bracket ({lo}, {hi}) must satisfy t_start < t_lo < t_hi with tol_t > 0"
        )));
    }
    let t_end = cfg.default_t_end(s).max(hi);
    let (mut w_lo, o_lo) = probe(s, lo, p, cfg, t_end)?;
    let (mut w_hi, o_hi) = probe(s, hi, p, cfg, t_end)?;
    if o_lo != Outcome::Converged || o_hi != Outcome::Diverged {
        let outcome = if o_lo == o_hi { o_lo } else { o_hi };
        return Err(ScenarioError::InvalidBracket {
            t_lo: lo,
            t_hi: hi,
            outcome,
        });
    }
    let mut probes = 2;
    while hi - lo > tol_t {
        let mid = 0.5 * (lo + hi);
        let (w, o) = probe(s, mid, p, cfg, t_end)?;
        probes += 1;
        if o == Outcome::Converged {
            lo = mid;
            w_lo = w;
        } else {
            hi = mid;
            w_hi = w;
        }
    }
    let t_cr = 0.5 * (lo + hi);
    let verified = verify_cct(s, p, cfg, t_cr, tol_t.min(t_cr - bracket.0))?;
    Ok(CctResult {
        t_cr,
        bracket: (lo, hi),
        method: CctMethod::Bisection,
        witness_converged: w_lo,
        witness_diverged: w_hi,
        probes: probes + 2,
        verified,
    })
}

/// First exit time of the fault-on trajectory from `curve`, located by
/// bisection on membership between the last inside and first outside
/// accepted steps.
pub fn roa_exit_time(
    s: &DisturbanceScenario,
    p: &CircuitParams,
    cfg: &CctConfig,
    curve: &ClosedCurve,
) -> Result<(f64, PlanarState), ScenarioError> {
    s.validate()?;
    let x0 = pre_fault_equilibrium(s, p)?;
    let t_end = cfg.default_t_end(s);
    let faulted = s.faulted_input();
    let flow = Flow::forward(p, &cfg.integrator);
    let mut exit = None;
    flow.run(x0, faulted, (s.t_start, t_end), &[], |step| {
        if contains(curve, &step.x1) {
            return ControlFlow::Continue(());
        }
        let (mut a, mut b) = (step.t0, step.t1);
        let at = |t: f64| step.x0 + (step.x1 - step.x0) * ((t - step.t0) / (step.t1 - step.t0));
        while b - a > 1e-12 {
            let m = 0.5 * (a + b);
            if contains(curve, &at(m)) {
                a = m;
            } else {
                b = m;
            }
        }
        exit = Some((b, at(b)));
        ControlFlow::Break(())
    })?;
    exit.ok_or(ScenarioError::NeverExits { t_end })
}

/// Clearing time from the region of attraction of the base input: the
/// fault must be removed before the fault-on trajectory leaves it.
/// Witnesses are re-simulated at `t_exit ∓ tol_t`.
pub fn find_cct_roa(s: &DisturbanceScenario, p: &CircuitParams, cfg: &CctConfig) -> Result<CctResult, ScenarioError> {
    let curve = trace_unstable_limit_cycle(&s.base, p, &cfg.roa)?;
    find_cct_roa_with_curve(s, p, cfg, &curve)
}

/// Diverged-witness probes tried after the exit time, `tol_t` apart.
pub const MAX_WITNESS_STEPS: usize = 20;

pub fn find_cct_roa_with_curve(
    s: &DisturbanceScenario,
    p: &CircuitParams,
    cfg: &CctConfig,
    curve: &ClosedCurve,
) -> Result<CctResult, ScenarioError> {
    let (t_exit, _) = roa_exit_time(s, p, cfg, curve)?;
    let lo = (t_exit - cfg.tol_t).max(s.t_start + 1e-9);
    let t_end = cfg.default_t_end(s).max(t_exit + MAX_WITNESS_STEPS as f64 * cfg.tol_t);
    let (w_lo, o_lo) = probe(s, lo, p, cfg, t_end)?;
    if o_lo != Outcome::Converged {
        return Err(ScenarioError::WitnessMismatch {
            t_clear: lo,
            outcome: o_lo,
        });
    }
    // Near a grazing exit the state can re-enter the region within the
    // next oscillation, so the diverged witness is walked forward.
    for k in 1..=MAX_WITNESS_STEPS {
        let hi = t_exit + k as f64 * cfg.tol_t;
        let (w_hi, o_hi) = probe(s, hi, p, cfg, t_end)?;
        if o_hi == Outcome::Diverged {
            return Ok(CctResult {
                t_cr: t_exit,
                bracket: (lo, hi),
                method: CctMethod::RoaExit,
                witness_converged: w_lo,
                witness_diverged: w_hi,
                probes: k + 1,
                verified: k == 1,
            });
        }
    }
    Err(ScenarioError::WitnessMismatch {
        t_clear: t_exit + MAX_WITNESS_STEPS as f64 * cfg.tol_t,
        outcome: Outcome::Converged,
    })
}

/// Re-simulates clearing at `t_cr ∓ margin`; true when the earlier clear
/// converges and the later one diverges.
pub fn verify_cct(
    s: &DisturbanceScenario,
    p: &CircuitParams,
    cfg: &CctConfig,
    t_cr: f64,
    margin: f64,
) -> Result<bool, ScenarioError> {
    let t_end = cfg.default_t_end(s).max(t_cr + margin);
    let (a, b) = rayon::join(
        || probe(s, t_cr - margin, p, cfg, t_end),
        || probe(s, t_cr + margin, p, cfg, t_end),
    );
    Ok(a?.1 == Outcome::Converged && b?.1 == Outcome::Diverged)
}

/// One rung of a magnitude scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnitudeProbe {
    pub faulted_value: f64,
    pub faulted_equilibrium: FaultedEquilibrium,
    /// Absolute critical clearing time, when a valid bracket exists.
    pub t_cr: Option<f64>,
    pub verified: bool,
}

/// Bisection CCT at every faulted value of a ladder (in parallel, output
/// in ladder order). Rungs without a valid bracket report `t_cr = None`.
pub fn magnitude_scan(
    s: &DisturbanceScenario,
    p: &CircuitParams,
    cfg: &CctConfig,
    ladder: &[f64],
) -> Result<Vec<MagnitudeProbe>, ScenarioError> {
    ladder
        .par_iter()
        .map(|&v| {
            let sv = s.with_faulted_value(v);
            sv.validate()?;
            let (t_cr, verified) = match find_cct_bisection(&sv, p, cfg, default_bracket(&sv, cfg), cfg.tol_t) {
                Ok(r) => (Some(r.t_cr), r.verified),
                Err(ScenarioError::InvalidBracket { .. }) => (None, false),
                Err(e) => return Err(e),
            };
            Ok(MagnitudeProbe {
                faulted_value: v,
                faulted_equilibrium: faulted_equilibrium(&sv, p),
                t_cr,
                verified,
            })
        })
        .collect()
}

/// Rung whose clearing time falls strictly inside `target`, nearest its
/// midpoint.
pub fn find_magnitude_for_target(scan: &[MagnitudeProbe], target: (f64, f64)) -> Option<MagnitudeProbe> {
    let mid = 0.5 * (target.0 + target.1);
    scan.iter()
        .copied()
        .filter(|m| m.t_cr.is_some_and(|t| t > target.0 && t < target.1))
        .min_by(|a, b| (a.t_cr.unwrap() - mid).abs().total_cmp(&(b.t_cr.unwrap() - mid).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (GridInput, CircuitParams) {
        (GridInput::paper_defaults(), CircuitParams::paper_defaults())
    }

    #[test]
    fn validation() {
        let (u, _) = base();
        assert!(DisturbanceScenario::sag(u, 300.0, 0.05).validate().is_ok());
        assert!(DisturbanceScenario::sag(u, 400.0, 0.05).validate().is_err());
        assert!(DisturbanceScenario::surge(u, 10000.0, 0.05).validate().is_err());
        assert!(DisturbanceScenario::surge(u, 30000.0, -1.0).validate().is_err());
    }

    #[test]
    fn json_schema() {
        let j = r#"{"base":{"E_d":392.125,"P_pev":19200},"kind":"surge","faulted_value":30000,"t_start":0.05}"#;
        let s: DisturbanceScenario = serde_json::from_str(j).unwrap();
        assert_eq!(s.kind, FaultKind::Surge);
        assert_eq!(s.faulted_input().p_pev, 30000.0);
        assert_eq!(s.faulted_input().e_d, 392.125);
        let bad = r#"{"base":{"E_d":392.125,"P_pev":19200},"kind":"dip","faulted_value":1,"t_start":0.05}"#;
        assert!(serde_json::from_str::<DisturbanceScenario>(bad).is_err());
    }

    #[test]
    fn vanishing_fault_converges() {
        let (u, p) = base();
        let s = DisturbanceScenario::surge(u, 40000.0, 0.01);
        let (traj, o) = simulate_fault(&s, 0.01 + 1e-6, &p, &CctConfig::default(), 0.05).unwrap();
        assert_eq!(o, Outcome::Converged);
        assert_eq!(traj.outcome, o);
    }

    #[test]
    fn uncleared_unstable_fault_diverges() {
        let (u, p) = base();
        let s = DisturbanceScenario::surge(u, 40000.0, 0.01);
        assert_eq!(faulted_equilibrium(&s, &p), FaultedEquilibrium::Unstable);
        let (_, o) = simulate_fault(&s, 0.2, &p, &CctConfig::default(), 0.2).unwrap();
        assert_eq!(o, Outcome::Diverged);
    }

    #[test]
    fn faulted_equilibrium_kinds() {
        let (u, p) = base();
        assert_eq!(
            faulted_equilibrium(&DisturbanceScenario::sag(u, 380.0, 0.0), &p),
            FaultedEquilibrium::Stable
        );
        assert_eq!(
            faulted_equilibrium(&DisturbanceScenario::sag(u, 300.0, 0.0), &p),
            FaultedEquilibrium::Unstable
        );
        assert_eq!(
            faulted_equilibrium(&DisturbanceScenario::surge(u, 1e7, 0.0), &p),
            FaultedEquilibrium::Lost
        );
    }

    #[test]
    fn identical_fault_never_exits() {
        let (u, p) = base();
        // a sag of almost nothing keeps the state at the equilibrium
        let s = DisturbanceScenario::sag(u, u.e_d - 1e-9, 0.01);
        let cfg = CctConfig {
            horizon: 0.01,
            ..CctConfig::default()
        };
        assert!(matches!(
            find_cct_roa(&s, &p, &cfg),
            Err(ScenarioError::NeverExits { .. })
        ));
    }

    #[test]
    fn bracket_must_straddle() {
        let (u, p) = base();
        let s = DisturbanceScenario::surge(u, 20000.0, 0.01);
        let cfg = CctConfig {
            horizon: 0.05,
            ..CctConfig::default()
        };
        let r = find_cct_bisection(&s, &p, &cfg, default_bracket(&s, &cfg), 1e-4);
        assert!(matches!(
            r,
            Err(ScenarioError::InvalidBracket {
                outcome: Outcome::Converged,
                ..
            })
        ));
    }
}
