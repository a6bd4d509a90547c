//! One-parameter bifurcation analysis in the load power.
//!
//! The trace of the planar Jacobian on the high-voltage branch is
//! `2P / (3 C V_d²) − R/L`, increasing in P. It crosses zero at the Hopf
//! point while the determinant stays positive, so the complex pair leaves
//! through the imaginary axis. Below the crossing an unstable limit cycle
//! surrounds the equilibrium and shrinks to it as P approaches P_hopf.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{
    classify_planar, max_loadability, operating_point, planar_equilibrium_voltages, EquilibriumPoint,
};
use crate::model::{jacobian_planar, CircuitParams, GridInput, PlanarState};
use crate::odeint::fmt17;
use crate::roa::{trace_unstable_limit_cycle, RoaConfig, RoaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BifurcationError {
    #[error("trace of the reduced Jacobian does not change sign on [{lo}, {hi}] W")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("no equilibrium at P = {0} W")]
    NoEquilibrium(f64),
    #[error("P = {p} W is not below the Hopf point: the operating equilibrium is unstable")]
    NotBelowHopf { p: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("limit cycle at P = {p} W: {source}")]
    Cycle { p: f64, source: RoaError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    High,
    Low,
}

/// Unstable-cycle envelope around an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleAmplitude {
    pub dv_d: f64,
    pub di_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub p: f64,
    pub branch: Branch,
    pub equilibrium: EquilibriumPoint<PlanarState>,
    pub stable: bool,
    pub cycle_amplitude: Option<CycleAmplitude>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfPoint {
    pub p_hopf: f64,
    pub state: PlanarState,
    /// Imaginary part of the crossing pair, rad/s.
    pub omega_hopf: f64,
    pub eigenvalues: Vec<crate::Complex>,
}

/// Trace of the reduced Jacobian at the high-voltage equilibrium.
pub fn high_branch_trace(e_d: f64, p: &CircuitParams, p_pev: f64) -> Option<f64> {
    let u = GridInput::new(e_d, p_pev);
    let x = operating_point(&u, p)?;
    jacobian_planar(&x, &u, p).ok().map(|j| j.trace())
}

/// Both equilibrium branches on an evenly spaced grid of `n_steps` powers
/// spanning `p_range` inclusive.
pub fn sweep_equilibria(
    e_d: f64,
    p: &CircuitParams,
    p_range: (f64, f64),
    n_steps: usize,
) -> Result<Vec<BranchPoint>, BifurcationError> {
    let (lo, hi) = p_range;
    if n_steps < 2 || !(lo >= 0.0 && lo < hi) {
        return Err(BifurcationError::InvalidSweep(format!(
            "range ({lo}, {hi}) with {n_steps} steps"
        )));
    }
    if hi >= max_loadability(e_d, p) {
        return Err(BifurcationError::InvalidSweep(format!(
            "upper end {hi} W is not below the loadability limit"
        )));
    }
    let grid: Vec<f64> = (0..n_steps)
        .map(|k| lo + (hi - lo) * k as f64 / (n_steps - 1) as f64)
        .collect();
    let points = grid
        .par_iter()
        .flat_map_iter(|&pw| {
            let u = GridInput::new(e_d, pw);
            planar_equilibrium_voltages(e_d, pw, p)
                .into_iter()
                .zip([Branch::High, Branch::Low])
                .filter_map(move |(v, branch)| {
                    let x = PlanarState::new(v, 2.0 * pw / (3.0 * v));
                    classify_planar(&x, &u, p).ok().map(|eq| BranchPoint {
                        p: pw,
                        branch,
                        stable: eq.is_stable(),
                        equilibrium: eq,
                        cycle_amplitude: None,
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(points)
}

/// Default search bracket: from the operating load up to 99% of the
/// loadability limit.
pub fn default_hopf_bracket(u: &GridInput, p: &CircuitParams) -> (f64, f64) {
    (u.p_pev, 0.99 * max_loadability(u.e_d, p))
}

/// Locates the Hopf point by bisection on the sign of the reduced trace.
pub fn find_hopf(e_d: f64, p: &CircuitParams, bracket: (f64, f64), tol: f64) -> Result<HopfPoint, BifurcationError> {
    let (mut lo, mut hi) = bracket;
    let trace = |pw: f64| high_branch_trace(e_d, p, pw).ok_or(BifurcationError::NoEquilibrium(pw));
    let (t_lo, t_hi) = (trace(lo)?, trace(hi)?);
    if t_lo.signum() == t_hi.signum() {
        return Err(BifurcationError::NoSignChange { lo, hi });
    }
    let rising = t_lo < 0.0;
    let mut iterations = 0;
    while hi - lo > tol * hi.abs().max(1.0) && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        let t = trace(mid)?;
        if (t < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let p_hopf = 0.5 * (lo + hi);
    let u = GridInput::new(e_d, p_hopf);
    let state = operating_point(&u, p).ok_or(BifurcationError::NoEquilibrium(p_hopf))?;
    let eq = classify_planar(&state, &u, p).map_err(|_| BifurcationError::NoEquilibrium(p_hopf))?;
    let det = jacobian_planar(&state, &u, p)
        .map(|j| j.determinant())
        .unwrap_or(f64::NAN);
    Ok(HopfPoint {
        p_hopf,
        state,
        omega_hopf: det.sqrt(),
        eigenvalues: eq.eigenvalues,
    })
}

/// Traces the unstable cycle at each sampled power (all below P_hopf) and
/// reports its envelope. Samples are processed in parallel; output keeps
/// input order.
pub fn cycle_amplitude_sweep(
    e_d: f64,
    p: &CircuitParams,
    samples: &[f64],
    cfg: &RoaConfig,
) -> Result<Vec<(f64, CycleAmplitude)>, BifurcationError> {
    for &pw in samples {
        let u = GridInput::new(e_d, pw);
        let x = operating_point(&u, p).ok_or(BifurcationError::NoEquilibrium(pw))?;
        let stable = classify_planar(&x, &u, p).map(|e| e.is_stable()).unwrap_or(false);
        if !stable {
            return Err(BifurcationError::NotBelowHopf { p: pw });
        }
    }
    samples
        .par_iter()
        .map(|&pw| {
            let u = GridInput::new(e_d, pw);
            let curve =
                trace_unstable_limit_cycle(&u, p, cfg).map_err(|source| BifurcationError::Cycle { p: pw, source })?;
            let (dv_d, di_d) = curve.amplitude();
            Ok((pw, CycleAmplitude { dv_d, di_d }))
        })
        .collect()
}

/// Least-squares slope of log(amplitude) against log(P_hopf − P).
pub fn scaling_exponent(p_hopf: f64, amplitudes: &[(f64, CycleAmplitude)]) -> f64 {
    let pts: Vec<(f64, f64)> = amplitudes
        .iter()
        .map(|(pw, a)| ((p_hopf - pw).ln(), a.dv_d.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fills `cycle_amplitude` for the stable high-branch points of a sweep.
pub fn attach_cycle_amplitudes(points: &mut [BranchPoint], e_d: f64, p: &CircuitParams, cfg: &RoaConfig) {
    points.par_iter_mut().for_each(|bp| {
        if bp.branch == Branch::High && bp.stable && bp.p > 0.0 {
            let u = GridInput::new(e_d, bp.p);
            if let Ok(curve) = trace_unstable_limit_cycle(&u, p, cfg) {
                let (dv_d, di_d) = curve.amplitude();
                bp.cycle_amplitude = Some(CycleAmplitude { dv_d, di_d });
            }
        }
    });
}

/// Branch CSV with header `P,branch,V_d,I_d,stable,cycle_amp_V`; the last
/// column is empty where no cycle was traced.
pub fn branch_csv(points: &[BranchPoint]) -> String {
    let mut out = String::from("P,branch,V_d,I_d,stable,cycle_amp_V\n");
    for bp in points {
        let branch = match bp.branch {
            Branch::High => "high",
            Branch::Low => "low",
        };
        let amp = bp.cycle_amplitude.map(|a| fmt17(a.dv_d)).unwrap_or_default();
        out.push_str(&format!(
            "{},{branch},{},{},{},{amp}\n",
            fmt17(bp.p),
            fmt17(bp.equilibrium.state.v_d),
            fmt17(bp.equilibrium.state.i_d),
            bp.stable
        ));
    }
    out
}
