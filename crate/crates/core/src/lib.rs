//! Large-disturbance voltage stability of a grid-connected constant-power
//! load (a PEV charger) modelled in the dq frame.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: circuit parameters, states, vector fields, Jacobians and the
//!   dq/abc transforms.
//! - [`equilibrium`]: closed-form planar equilibria, Newton for the full
//!   model, spectral classification and the P–V nose curve.
//! - [`odeint`]: fixed RK4 and adaptive Dormand–Prince integration with
//!   exact input switching and divergence guards.
//! - [`bifurcation`]: load-power sweeps, the Hopf point and unstable limit
//!   cycle amplitudes.
//! - [`roa`]: the unstable limit cycle bounding the region of attraction and
//!   point membership.
//! - [`scenario`]: voltage-sag and demand-surge faults and critical clearing
//!   times.
//! - [`cli`]: configuration and the subcommands behind the `pev-stability`
//!   binary.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod cli;
pub mod equilibrium;
pub mod model;
pub mod odeint;
pub mod roa;
pub mod scenario;

/// Complex eigenvalue type used throughout.
pub type Complex = nalgebra::Complex<f64>;

pub use model::{CircuitParams, FullState, GridInput, ModelError, ModelState, PlanarState, StateVector};
