//! Equilibria of the planar and full models, spectral classification and
//! the static P–V (nose) characteristic.
//!
//! Setting both planar derivatives to zero gives `I_d = 2P / (3 V_d)` and
//! the quadratic `V_d² − E_d·V_d + (2R/3)·P = 0`. Its discriminant vanishes
//! at the loadability limit `P_max = 3 E_d² / (8R)`.

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    deriv_full, deriv_full_scale, jacobian_full, jacobian_planar, CircuitParams, FullState, GridInput, ModelError,
    PlanarState, StateVector,
};
use crate::Complex;

/// Relative half-width of the Marginal band.
pub const DEFAULT_MARGIN_REL: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("initial guess has V_d = {0} V; the constant-power load needs V_d > 0")]
    InvalidGuess(f64),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian at Newton iterate {0}")]
    SingularJacobian(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    Marginal,
}

impl Classification {
    pub fn is_stable(self) -> bool {
        matches!(self, Self::StableNode | Self::StableFocus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumPoint<S> {
    pub state: S,
    pub eigenvalues: Vec<Complex>,
    pub classification: Classification,
}

impl<S> EquilibriumPoint<S> {
    pub fn is_stable(&self) -> bool {
        self.classification.is_stable()
    }

    /// Largest real part of the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Eigenvalues of a real 2×2 matrix from trace and determinant.
pub fn eigenvalues_2x2(j: &Matrix2<f64>) -> [Complex; 2] {
    let tr = j.trace();
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = if half >= 0.0 { half + s } else { half - s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex::new(hi, 0.0), Complex::new(lo, 0.0)]
    } else {
        let w = (-disc).sqrt();
        [Complex::new(half, w), Complex::new(half, -w)]
    }
}

/// Classifies a spectrum. `margin` is either absolute (s⁻¹) or relative to
/// each eigenvalue's modulus.
pub fn classify_spectrum(eigenvalues: &[Complex], margin: Margin) -> Classification {
    let band = |l: &Complex| match margin {
        Margin::Absolute(m) => m,
        Margin::Relative(r) => r * l.norm(),
    };
    if eigenvalues.iter().any(|l| l.re.abs() <= band(l)) {
        return Classification::Marginal;
    }
    let oscillatory = eigenvalues.iter().any(|l| l.im.abs() > band(l));
    let stable = eigenvalues.iter().filter(|l| l.re < 0.0).count();
    match (stable, eigenvalues.len() - stable) {
        (_, 0) if oscillatory => Classification::StableFocus,
        (_, 0) => Classification::StableNode,
        (0, _) if oscillatory => Classification::UnstableFocus,
        (0, _) => Classification::UnstableNode,
        _ => Classification::Saddle,
    }
}

/// Width of the band around the imaginary axis that counts as Marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Margin {
    Absolute(f64),
    /// |Re λ| ≤ r·|λ|, per eigenvalue.
    Relative(f64),
}

impl Default for Margin {
    fn default() -> Self {
        Self::Relative(DEFAULT_MARGIN_REL)
    }
}

/// Eigenvalues and classification of a 2×2 or 4×4 (or any square) real
/// matrix. 2×2 uses the closed form; larger matrices go through a real
/// Schur decomposition.
pub fn classify(j: &DMatrix<f64>, margin: Margin) -> (Vec<Complex>, Classification) {
    assert!(j.is_square(), "classify needs a square matrix");
    let mut eig: Vec<Complex> = if j.nrows() == 2 {
        let m = Matrix2::new(j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
        eigenvalues_2x2(&m).to_vec()
    } else {
        j.clone().complex_eigenvalues().iter().copied().collect()
    };
    sort_spectrum(&mut eig);
    let class = classify_spectrum(&eig, margin);
    (eig, class)
}

/// Descending real part, then descending imaginary part.
fn sort_spectrum(eig: &mut [Complex]) {
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

pub fn classify_planar(
    x: &PlanarState,
    u: &GridInput,
    p: &CircuitParams,
) -> Result<EquilibriumPoint<PlanarState>, ModelError> {
    let j = jacobian_planar(x, u, p)?;
    let (eigenvalues, classification) = classify(&DMatrix::from_column_slice(2, 2, j.as_slice()), Margin::default());
    Ok(EquilibriumPoint {
        state: *x,
        eigenvalues,
        classification,
    })
}

pub fn classify_full(
    x: &FullState,
    u: &GridInput,
    p: &CircuitParams,
) -> Result<EquilibriumPoint<FullState>, ModelError> {
    let j = jacobian_full(x, u, p)?;
    let (eigenvalues, classification) = classify(&DMatrix::from_column_slice(4, 4, j.as_slice()), Margin::default());
    Ok(EquilibriumPoint {
        state: *x,
        eigenvalues,
        classification,
    })
}

/// Largest load power for which a planar equilibrium exists.
pub fn max_loadability(e_d: f64, p: &CircuitParams) -> f64 {
    3.0 * e_d * e_d / (8.0 * p.r)
}

/// Positive roots of the equilibrium quadratic, high-voltage root first.
/// At zero load the low root degenerates to V_d = 0 and is dropped.
pub fn planar_equilibrium_voltages(e_d: f64, p_pev: f64, p: &CircuitParams) -> Vec<f64> {
    let product = 2.0 * p.r * p_pev / 3.0;
    let mut disc = e_d * e_d - 4.0 * product;
    if e_d <= 0.0 || disc < -1e-12 * e_d * e_d {
        return Vec::new();
    }
    // rounding at the nose point
    if disc < 1e-12 * e_d * e_d {
        disc = 0.0;
    }
    let high = 0.5 * (e_d + disc.sqrt());
    if disc == 0.0 {
        return vec![high];
    }
    // Vieta for the small root; the direct formula cancels badly
    let low = product / high;
    if low > 0.0 {
        vec![high, low]
    } else {
        vec![high]
    }
}

/// The high-voltage (operating) equilibrium state, if one exists.
pub fn operating_point(u: &GridInput, p: &CircuitParams) -> Option<PlanarState> {
    planar_equilibrium_voltages(u.e_d, u.p_pev, p)
        .first()
        .map(|&v| PlanarState::new(v, 2.0 * u.p_pev / (3.0 * v)))
}

/// All planar equilibria (0, 1 or 2), higher V_d first, classified by the
/// reduced Jacobian spectrum.
pub fn solve_planar_equilibria(u: &GridInput, p: &CircuitParams) -> Vec<EquilibriumPoint<PlanarState>> {
    planar_equilibrium_voltages(u.e_d, u.p_pev, p)
        .into_iter()
        .filter_map(|v| {
            let x = PlanarState::new(v, 2.0 * u.p_pev / (3.0 * v));
            classify_planar(&x, u, p).ok()
        })
        .collect()
}

/// Starting guess for the full model built from a planar state, with the
/// q-axis quantities taken from the algebraic q-axis balance
/// `I_q = ωC·V_d`, `V_q = E_q − ωL·I_d − R·I_q`.
pub fn full_guess_from_planar(x: &PlanarState, u: &GridInput, p: &CircuitParams) -> FullState {
    let i_q = p.omega * p.c_eq * x.v_d;
    let v_q = u.e_q - p.omega * p.l * x.i_d - p.r * i_q;
    FullState::new(x.i_d, i_q, x.v_d, v_q)
}

/// Max over components of |f_i| / (sum of |terms_i|).
pub fn full_relative_residual(x: &FullState, u: &GridInput, p: &CircuitParams) -> Result<f64, ModelError> {
    let f = deriv_full(x, u, p)?;
    let s = deriv_full_scale(x, u, p);
    Ok(f.components()
        .iter()
        .zip(s.components())
        .map(|(fi, si)| if si > 0.0 { fi.abs() / si } else { fi.abs() })
        .fold(0.0, f64::max))
}

/// Damped Newton on `deriv_full = 0`.
pub fn solve_full_equilibrium(
    u: &GridInput,
    p: &CircuitParams,
    guess: &FullState,
) -> Result<(EquilibriumPoint<FullState>, usize), EquilibriumError> {
    if !(guess.v_d > 0.0) {
        return Err(EquilibriumError::InvalidGuess(guess.v_d));
    }
    const TOL: f64 = 1e-13;
    let to_vec = |f: FullState| Vector4::from(f.to_array());
    let mut x = *guess;
    let mut res = full_relative_residual(&x, u, p)?;
    let mut fnorm = to_vec(deriv_full(&x, u, p)?).norm();
    for it in 0..NEWTON_MAX_ITER {
        if res < TOL {
            return Ok((classify_full(&x, u, p)?, it));
        }
        let j: Matrix4<f64> = jacobian_full(&x, u, p)?;
        let f = to_vec(deriv_full(&x, u, p)?);
        let step = j.lu().solve(&(-f)).ok_or(EquilibriumError::SingularJacobian(it))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = FullState::from_array((to_vec(x) + step * lambda).into());
            if let Ok(ft) = deriv_full(&trial, u, p) {
                let n = to_vec(ft).norm();
                if n < fnorm || n == 0.0 {
                    x = trial;
                    fnorm = n;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        res = full_relative_residual(&x, u, p)?;
        if !accepted {
            // the residual cannot be reduced in floating point any more
            if res < 1e-9 {
                return Ok((classify_full(&x, u, p)?, it + 1));
            }
            return Err(EquilibriumError::NoConvergence {
                iterations: it + 1,
                residual: res,
            });
        }
    }
    if res < 1e-9 {
        return Ok((classify_full(&x, u, p)?, NEWTON_MAX_ITER));
    }
    Err(EquilibriumError::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residual: res,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvCurvePoint {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "V_high")]
    pub v_high: Option<f64>,
    #[serde(rename = "V_low")]
    pub v_low: Option<f64>,
}

/// Network P–V characteristic: both equilibrium voltages per load level.
pub fn pv_curve(e_d: f64, p: &CircuitParams, p_grid: &[f64]) -> Vec<PvCurvePoint> {
    p_grid
        .par_iter()
        .map(|&pw| {
            let roots = planar_equilibrium_voltages(e_d, pw, p);
            let v_high = roots.first().copied();
            let v_low = match roots.len() {
                2 => Some(roots[1]),
                1 if pw > 0.0 => v_high, // nose point
                _ => None,
            };
            PvCurvePoint { p: pw, v_high, v_low }
        })
        .collect()
}
