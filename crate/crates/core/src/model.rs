//! Circuit parameterization and the dq-frame vector fields.
//!
//! Two models share the same circuit: the full four-state model with the
//! ω cross-coupling terms, and the planar d-axis model used for the
//! bifurcation and region-of-attraction analysis. The charger is an ideal
//! constant-power load, which enters the capacitor equation as
//! `-2P / (3 C_eq V_d)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this |V_d| the constant-power term is treated as singular.
pub const DEFAULT_V_EPS: f64 = 1e-6;

/// Decoupling premise of the planar model: R/X must be at least this,
/// compared at one decimal.
pub const MIN_R_OVER_X: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ModelError {
    #[error("singular state: |V_d| = {v_d:e} V is below the guard {v_eps:e} V")]
    Singular { v_d: f64, v_eps: f64 },
    #[error("invalid circuit parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid grid input {name} = {value}")]
    InvalidInput { name: &'static str, value: f64 },
}

/// Line and source constants (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "C_eq")]
    pub c_eq: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_omega() -> f64 {
    2.0 * PI * 60.0
}

impl CircuitParams {
    /// Checked constructor; all four constants must be positive and finite.
    pub fn new(r: f64, l: f64, c_eq: f64, omega: f64) -> Result<Self, ModelError> {
        let p = Self { r, l, c_eq, omega };
        p.validate()?;
        Ok(p)
    }

    /// Short distribution line feeding a single charger, 60 Hz.
    pub fn paper_defaults() -> Self {
        Self {
            r: 0.0064,
            l: 1.698e-6,
            c_eq: 29.333e-6,
            omega: default_omega(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("R", self.r), ("L", self.l), ("C_eq", self.c_eq), ("omega", self.omega)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// R / (ωL).
    pub fn r_over_x(&self) -> f64 {
        self.r / (self.omega * self.l)
    }

    /// Whether the planar d-axis reduction is justified for this line.
    pub fn planar_reduction_valid(&self) -> bool {
        self.r_over_x() >= MIN_R_OVER_X - 0.05
    }

    /// Line damping R/L in s⁻¹.
    pub fn damping(&self) -> f64 {
        self.r / self.l
    }

    /// LC resonance 1/√(LC) in rad/s.
    pub fn resonance(&self) -> f64 {
        1.0 / (self.l * self.c_eq).sqrt()
    }
}

/// Exogenous inputs: source voltage in dq and charger demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInput {
    #[serde(rename = "E_d")]
    pub e_d: f64,
    #[serde(rename = "E_q", default)]
    pub e_q: f64,
    #[serde(rename = "P_pev")]
    pub p_pev: f64,
}

impl GridInput {
    pub fn new(e_d: f64, p_pev: f64) -> Self {
        Self { e_d, e_q: 0.0, p_pev }
    }

    pub fn paper_defaults() -> Self {
        Self::new(392.125, 19200.0)
    }

    pub fn with_power(self, p_pev: f64) -> Self {
        Self { p_pev, ..self }
    }

    pub fn with_source(self, e_d: f64) -> Self {
        Self { e_d, ..self }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("E_d", self.e_d), ("E_q", self.e_q), ("P_pev", self.p_pev)] {
            if !value.is_finite() {
                return Err(ModelError::InvalidInput { name, value });
            }
        }
        if self.p_pev < 0.0 {
            return Err(ModelError::InvalidInput {
                name: "P_pev",
                value: self.p_pev,
            });
        }
        Ok(())
    }
}

/// State of the four-state model: line currents and load-bus voltages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FullState {
    #[serde(rename = "I_d")]
    pub i_d: f64,
    #[serde(rename = "I_q")]
    pub i_q: f64,
    #[serde(rename = "V_d")]
    pub v_d: f64,
    #[serde(rename = "V_q")]
    pub v_q: f64,
}

/// State of the planar d-axis model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarState {
    #[serde(rename = "V_d")]
    pub v_d: f64,
    #[serde(rename = "I_d")]
    pub i_d: f64,
}

impl FullState {
    pub fn new(i_d: f64, i_q: f64, v_d: f64, v_q: f64) -> Self {
        Self { i_d, i_q, v_d, v_q }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.i_d, self.i_q, self.v_d, self.v_q]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// d-axis projection.
    pub fn planar(self) -> PlanarState {
        PlanarState::new(self.v_d, self.i_d)
    }
}

impl PlanarState {
    pub fn new(v_d: f64, i_d: f64) -> Self {
        Self { v_d, i_d }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v_d, self.i_d]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl fmt::Display for PlanarState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(V_d = {:.6} V, I_d = {:.6} A)", self.v_d, self.i_d)
    }
}

/// Plain vector-space behaviour needed by the integrators.
pub trait StateVector:
    Copy
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    fn components(&self) -> Vec<f64>;
    fn map2(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self;

    fn norm(&self) -> f64 {
        self.components().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn is_finite(&self) -> bool {
        self.components().into_iter().all(f64::is_finite)
    }
}

impl StateVector for f64 {
    fn components(&self) -> Vec<f64> {
        vec![*self]
    }
    fn map2(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        f(self, other)
    }
}

/// A state of one of the two circuit models, dispatching to its vector field.
pub trait ModelState: StateVector {
    const DIM: usize;
    /// Column names used for trajectory CSV export.
    const COLUMNS: &'static [&'static str];

    fn v_d(&self) -> f64;
    fn i_d(&self) -> f64;

    fn deriv(&self, u: &GridInput, p: &CircuitParams, v_eps: f64) -> Result<Self, ModelError>;
}

macro_rules! impl_vector_ops {
    ($t:ident { $($f:ident),+ }) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                $t { $($f: self.$f + o.$f),+ }
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                $t { $($f: self.$f - o.$f),+ }
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, k: f64) -> $t {
                $t { $($f: self.$f * k),+ }
            }
        }
    };
}

impl_vector_ops!(FullState { i_d, i_q, v_d, v_q });
impl_vector_ops!(PlanarState { v_d, i_d });

impl StateVector for PlanarState {
    fn components(&self) -> Vec<f64> {
        vec![self.v_d, self.i_d]
    }
    fn map2(self, o: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(f(self.v_d, o.v_d), f(self.i_d, o.i_d))
    }
}

impl ModelState for PlanarState {
    const DIM: usize = 2;
    const COLUMNS: &'static [&'static str] = &["V_d", "I_d"];

    fn v_d(&self) -> f64 {
        self.v_d
    }
    fn i_d(&self) -> f64 {
        self.i_d
    }
    fn deriv(&self, u: &GridInput, p: &CircuitParams, v_eps: f64) -> Result<Self, ModelError> {
        deriv_planar_guarded(self, u, p, v_eps)
    }
}

impl StateVector for FullState {
    fn components(&self) -> Vec<f64> {
        // CSV column order: V_d, I_d, I_q, V_q
        vec![self.v_d, self.i_d, self.i_q, self.v_q]
    }
    fn map2(self, o: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(
            f(self.i_d, o.i_d),
            f(self.i_q, o.i_q),
            f(self.v_d, o.v_d),
            f(self.v_q, o.v_q),
        )
    }
}

impl ModelState for FullState {
    const DIM: usize = 4;
    const COLUMNS: &'static [&'static str] = &["V_d", "I_d", "I_q", "V_q"];

    fn v_d(&self) -> f64 {
        self.v_d
    }
    fn i_d(&self) -> f64 {
        self.i_d
    }
    fn deriv(&self, u: &GridInput, p: &CircuitParams, v_eps: f64) -> Result<Self, ModelError> {
        deriv_full_guarded(self, u, p, v_eps)
    }
}

fn guard(v_d: f64, v_eps: f64) -> Result<(), ModelError> {
    // NaN must fail the guard too
    if v_d.abs() > v_eps {
        Ok(())
    } else {
        Err(ModelError::Singular { v_d, v_eps })
    }
}

/// Four-state dq vector field.
pub fn deriv_full(x: &FullState, u: &GridInput, p: &CircuitParams) -> Result<FullState, ModelError> {
    deriv_full_guarded(x, u, p, DEFAULT_V_EPS)
}

pub fn deriv_full_guarded(
    x: &FullState,
    u: &GridInput,
    p: &CircuitParams,
    v_eps: f64,
) -> Result<FullState, ModelError> {
    guard(x.v_d, v_eps)?;
    let CircuitParams { r, l, c_eq, omega } = *p;
    Ok(FullState {
        i_d: -(r / l) * x.i_d + omega * x.i_q - x.v_d / l + u.e_d / l,
        i_q: -omega * x.i_d - (r / l) * x.i_q - x.v_q / l + u.e_q / l,
        v_d: x.i_d / c_eq - 2.0 * u.p_pev / (3.0 * c_eq * x.v_d) + omega * x.v_q,
        v_q: x.i_q / c_eq - omega * x.v_d,
    })
}

/// Sum of absolute term magnitudes per component of [`deriv_full`]; the
/// natural scale against which a residual is "zero".
pub fn deriv_full_scale(x: &FullState, u: &GridInput, p: &CircuitParams) -> FullState {
    let CircuitParams { r, l, c_eq, omega } = *p;
    FullState {
        i_d: ((r / l) * x.i_d).abs() + (omega * x.i_q).abs() + (x.v_d / l).abs() + (u.e_d / l).abs(),
        i_q: (omega * x.i_d).abs() + ((r / l) * x.i_q).abs() + (x.v_q / l).abs() + (u.e_q / l).abs(),
        v_d: (x.i_d / c_eq).abs() + (2.0 * u.p_pev / (3.0 * c_eq * x.v_d)).abs() + (omega * x.v_q).abs(),
        v_q: (x.i_q / c_eq).abs() + (omega * x.v_d).abs(),
    }
}

/// Planar d-axis vector field, returned as (V̇_d, İ_d).
pub fn deriv_planar(x: &PlanarState, u: &GridInput, p: &CircuitParams) -> Result<PlanarState, ModelError> {
    deriv_planar_guarded(x, u, p, DEFAULT_V_EPS)
}

pub fn deriv_planar_guarded(
    x: &PlanarState,
    u: &GridInput,
    p: &CircuitParams,
    v_eps: f64,
) -> Result<PlanarState, ModelError> {
    // the planar model lives on V_d > 0 only
    if !(x.v_d > v_eps) {
        return Err(ModelError::Singular { v_d: x.v_d, v_eps });
    }
    let CircuitParams { r, l, c_eq, .. } = *p;
    Ok(PlanarState {
        v_d: -2.0 * u.p_pev / (3.0 * c_eq * x.v_d) + x.i_d / c_eq,
        i_d: -x.v_d / l - (r / l) * x.i_d + u.e_d / l,
    })
}

/// Per-component term magnitudes of [`deriv_planar`].
pub fn deriv_planar_scale(x: &PlanarState, u: &GridInput, p: &CircuitParams) -> PlanarState {
    let CircuitParams { r, l, c_eq, .. } = *p;
    PlanarState {
        v_d: (2.0 * u.p_pev / (3.0 * c_eq * x.v_d)).abs() + (x.i_d / c_eq).abs(),
        i_d: (x.v_d / l).abs() + ((r / l) * x.i_d).abs() + (u.e_d / l).abs(),
    }
}

/// CPL incremental term 2P / (3 C_eq V_d²), the only state-dependent
/// Jacobian entry.
fn cpl_gain(v_d: f64, u: &GridInput, p: &CircuitParams) -> f64 {
    2.0 * u.p_pev / (3.0 * p.c_eq * v_d * v_d)
}

/// Jacobian of [`deriv_full`] in state order (I_d, I_q, V_d, V_q).
pub fn jacobian_full(x: &FullState, u: &GridInput, p: &CircuitParams) -> Result<Matrix4<f64>, ModelError> {
    guard(x.v_d, DEFAULT_V_EPS)?;
    let CircuitParams { r, l, c_eq, omega } = *p;
    #[rustfmt::skip]
    let j = Matrix4::new(
        -r / l,      omega,       -1.0 / l,              0.0,
        -omega,      -r / l,      0.0,                   -1.0 / l,
        1.0 / c_eq,  0.0,         cpl_gain(x.v_d, u, p), omega,
        0.0,         1.0 / c_eq,  -omega,                0.0,
    );
    Ok(j)
}

/// Jacobian of [`deriv_planar`] in state order (V_d, I_d).
pub fn jacobian_planar(x: &PlanarState, u: &GridInput, p: &CircuitParams) -> Result<Matrix2<f64>, ModelError> {
    if !(x.v_d > DEFAULT_V_EPS) {
        return Err(ModelError::Singular {
            v_d: x.v_d,
            v_eps: DEFAULT_V_EPS,
        });
    }
    let CircuitParams { r, l, c_eq, .. } = *p;
    Ok(Matrix2::new(cpl_gain(x.v_d, u, p), 1.0 / c_eq, -1.0 / l, -r / l))
}

/// Three-phase power drawn by the charger, (3/2)·V_d·I_d with I_q = 0.
pub fn power_from_state<S: ModelState>(x: &S) -> f64 {
    1.5 * x.v_d() * x.i_d()
}

/// Instantaneous three-phase quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePhaseSample {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

const PHASE_SHIFT: f64 = 2.0 * PI / 3.0;

/// Amplitude-invariant inverse Park transform with the d-axis on phase a
/// at angle θ = ωt + θ₀. A constant d-value maps to a balanced set of that
/// peak amplitude.
pub fn dq_to_abc(d: f64, q: f64, t: f64, omega: f64, theta0: f64) -> ThreePhaseSample {
    let theta = omega * t + theta0;
    let phase = |shift: f64| d * (theta + shift).cos() - q * (theta + shift).sin();
    ThreePhaseSample {
        t,
        a: phase(0.0),
        b: phase(-PHASE_SHIFT),
        c: phase(PHASE_SHIFT),
    }
}

/// Forward Park transform matching [`dq_to_abc`]. Returns (d, q).
pub fn abc_to_dq(s: &ThreePhaseSample, omega: f64, theta0: f64) -> (f64, f64) {
    let theta = omega * s.t + theta0;
    let (ta, tb, tc) = (theta, theta - PHASE_SHIFT, theta + PHASE_SHIFT);
    let d = 2.0 / 3.0 * (s.a * ta.cos() + s.b * tb.cos() + s.c * tc.cos());
    let q = -2.0 / 3.0 * (s.a * ta.sin() + s.b * tb.sin() + s.c * tc.sin());
    (d, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> (GridInput, CircuitParams) {
        (GridInput::paper_defaults(), CircuitParams::paper_defaults())
    }

    #[test]
    fn r_over_x_matches_decoupling_premise() {
        let p = CircuitParams::paper_defaults();
        assert!((p.r_over_x() - 10.0).abs() < 0.1, "{}", p.r_over_x());
        assert!(p.planar_reduction_valid());
        assert!(!CircuitParams {
            omega: 2.0 * PI * 61.0,
            ..p
        }
        .planar_reduction_valid());
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(CircuitParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(CircuitParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(GridInput::new(392.0, -1.0).validate().is_err());
    }

    #[test]
    fn full_field_term_by_term() {
        let (u, p) = paper();
        let u = GridInput { e_q: 3.0, ..u };
        let x = FullState::new(10.0, -2.0, 380.0, 1.5);
        let d = deriv_full(&x, &u, &p).unwrap();
        let (r, l, c, w) = (p.r, p.l, p.c_eq, p.omega);
        assert_eq!(d.i_d, -(r / l) * 10.0 + w * -2.0 - 380.0 / l + u.e_d / l);
        assert_eq!(d.i_q, -w * 10.0 - (r / l) * -2.0 - 1.5 / l + 3.0 / l);
        assert_eq!(d.v_d, 10.0 / c - 2.0 * u.p_pev / (3.0 * c * 380.0) + w * 1.5);
        assert_eq!(d.v_q, -2.0 / c - w * 380.0);
    }

    #[test]
    fn full_field_zero_load_fixture() {
        // no current, V_d = E_d: only the q-axis voltage rotates
        let (u, p) = paper();
        let u = u.with_power(0.0);
        let x = FullState::new(0.0, 0.0, u.e_d, 0.0);
        let d = deriv_full(&x, &u, &p).unwrap();
        assert_eq!(d.i_d, 0.0);
        assert_eq!(d.i_q, 0.0);
        assert_eq!(d.v_d, 0.0);
        assert_eq!(d.v_q, -p.omega * u.e_d);
    }

    #[test]
    fn planar_equilibrium_is_not_full_equilibrium() {
        let (u, p) = paper();
        let x = FullState::new(32.66, 0.0, 391.916, 0.0);
        let d = deriv_full(&x, &u, &p).unwrap();
        let expected = -p.omega * 391.916;
        assert!((d.v_q - expected).abs() < 1e-9 * expected.abs());
        assert!((d.v_q + 1.477e5).abs() < 1e2);
    }

    #[test]
    fn planar_zero_load_identity() {
        let (u, p) = paper();
        let u = u.with_power(0.0);
        let d = deriv_planar(&PlanarState::new(u.e_d, 0.0), &u, &p).unwrap();
        assert_eq!(d, PlanarState::new(0.0, 0.0));
    }

    #[test]
    fn planar_no_current_at_source_voltage() {
        let (u, p) = paper();
        let d = deriv_planar(&PlanarState::new(u.e_d, 0.0), &u, &p).unwrap();
        let expected = -2.0 * 19200.0 / (3.0 * 29.333e-6 * 392.125);
        assert!((d.v_d - expected).abs() <= 1e-12 * expected.abs());
        assert!((d.v_d + 1.1128e6).abs() < 1e3, "{}", d.v_d);
        assert_eq!(d.i_d, 0.0);
    }

    #[test]
    fn singular_guard() {
        let (u, p) = paper();
        assert!(matches!(
            deriv_planar(&PlanarState::new(0.0, 1.0), &u, &p),
            Err(ModelError::Singular { .. })
        ));
        assert!(deriv_planar(&PlanarState::new(-5.0, 1.0), &u, &p).is_err());
        assert!(deriv_full(&FullState::new(0.0, 0.0, 5e-7, 0.0), &u, &p).is_err());
        assert!(jacobian_planar(&PlanarState::new(f64::NAN, 1.0), &u, &p).is_err());
    }

    #[test]
    fn jacobian_default_entries() {
        let (u, p) = paper();
        let j = jacobian_full(&FullState::new(32.664, 0.0, 391.916, 0.0), &u, &p).unwrap();
        assert!((j[(0, 0)] + 0.0064 / 1.698e-6).abs() < 1e-9);
        assert!((j[(0, 0)] + 3769.14).abs() < 0.01);
        let c33 = 2.0 * 19200.0 / (3.0 * 29.333e-6 * 391.916f64.powi(2));
        assert!((j[(2, 2)] - c33).abs() < 1e-9 * c33);
        assert!((j[(2, 2)] - 2841.0).abs() < 1.0, "{}", j[(2, 2)]);
    }

    #[test]
    fn planar_jacobian_zero_load_is_hurwitz() {
        let (u, p) = paper();
        let j = jacobian_planar(&PlanarState::new(u.e_d, 0.0), &u.with_power(0.0), &p).unwrap();
        assert_eq!(j[(0, 0)], 0.0);
        assert_eq!(j[(0, 1)], 1.0 / p.c_eq);
        assert_eq!(j[(1, 0)], -1.0 / p.l);
        // trace < 0, det > 0
        assert!(j.trace() < 0.0 && j.determinant() > 0.0);
    }

    #[test]
    fn planar_jacobian_trace_and_det_at_operating_point() {
        let (u, p) = paper();
        let x = PlanarState::new(391.915_975_604_212_9, 32.660_061_841_741_39);
        let j = jacobian_planar(&x, &u, &p).unwrap();
        assert!((j.trace() + 928.0).abs() < 1.0, "{}", j.trace());
        let det = (1.0 / (p.l * p.c_eq)) * (1.0 - 2.0 * u.p_pev * p.r / (3.0 * x.v_d * x.v_d));
        assert!((j.determinant() - det).abs() < 1e-9 * det);
        assert!((det - 2.0066e10).abs() < 1e7, "{det}");
    }

    #[test]
    fn power_formula() {
        assert!((power_from_state(&PlanarState::new(391.916, 32.66)) - 19200.0).abs() < 1.0);
        assert_eq!(power_from_state(&PlanarState::new(100.0, 0.0)), 0.0);
        assert_eq!(power_from_state(&PlanarState::new(2.0, 3.0)), 9.0);
        assert_eq!(power_from_state(&FullState::new(3.0, 7.0, 2.0, 0.0)), 9.0);
    }

    #[test]
    fn park_convention_defining_case() {
        let s = dq_to_abc(1.0, 0.0, 0.0, 377.0, 0.0);
        assert!((s.a - 1.0).abs() < 1e-15);
        assert!((s.b + 0.5).abs() < 1e-15);
        assert!((s.c + 0.5).abs() < 1e-15);
    }

    #[test]
    fn balanced_set_maps_to_d_axis() {
        let w = 2.0 * PI * 60.0;
        let peak = 392.125;
        for k in 0..50 {
            let t = k as f64 * 1.3e-4;
            let th = w * t;
            let s = ThreePhaseSample {
                t,
                a: peak * th.cos(),
                b: peak * (th - PHASE_SHIFT).cos(),
                c: peak * (th + PHASE_SHIFT).cos(),
            };
            let (d, q) = abc_to_dq(&s, w, 0.0);
            assert!((d - peak).abs() < 1e-10, "{d}");
            assert!(q.abs() < 1e-10, "{q}");
        }
    }
}
