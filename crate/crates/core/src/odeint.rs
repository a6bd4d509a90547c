//! Time-domain integration with piecewise-constant inputs.
//!
//! Input switches (fault application and clearing) are honoured exactly:
//! every event time is a step boundary, so no stage of any step ever sees
//! an input from the wrong interval. Integration stops early when the
//! trajectory collapses onto the constant-power singularity, blows up, or
//! produces non-finite values.

use std::fmt::Write as _;
use std::marker::PhantomData;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CircuitParams, GridInput, ModelError, ModelState, StateVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time span or event schedule: {0}")]
    InvalidSchedule(String),
    #[error("initial state rejected: {0}")]
    InitialState(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    FixedRk4 {
        dt: f64,
    },
    /// Dormand–Prince 5(4) with local error control.
    AdaptiveRk45 {
        abs_tol: f64,
        rel_tol: f64,
        dt_min: f64,
        dt_max: f64,
    },
}

impl Method {
    pub fn fixed(dt: f64) -> Self {
        Self::FixedRk4 { dt }
    }

    pub fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        Self::AdaptiveRk45 {
            abs_tol,
            rel_tol,
            dt_min: 1e-14,
            dt_max: 1e-5,
        }
    }
}

impl Default for Method {
    fn default() -> Self {
        Self::adaptive(1e-8, 1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: Method,
    /// State-norm bound; `None` means 100× the norm of the initial state.
    #[serde(default)]
    pub blowup_norm: Option<f64>,
    /// Voltage collapse guard in volts.
    #[serde(default = "default_collapse_voltage")]
    pub v_eps: f64,
}

fn default_collapse_voltage() -> f64 {
    1.0
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::default(),
            blowup_norm: None,
            v_eps: default_collapse_voltage(),
        }
    }
}

impl IntegratorConfig {
    pub fn fixed(dt: f64) -> Self {
        Self {
            method: Method::fixed(dt),
            ..Self::default()
        }
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |m: &str| Err(IntegrateError::InvalidConfig(m.to_string()));
        match self.method {
            Method::FixedRk4 { dt } if !(dt > 0.0 && dt.is_finite()) => return bad("dt must be > 0"),
            Method::AdaptiveRk45 {
                abs_tol,
                rel_tol,
                dt_min,
                dt_max,
            } => {
                if !(abs_tol > 0.0 && rel_tol > 0.0) {
                    return bad("tolerances must be > 0");
                }
                if !(dt_min > 0.0 && dt_min <= dt_max && dt_max.is_finite()) {
                    return bad("need 0 < dt_min <= dt_max");
                }
            }
            _ => {}
        }
        if !(self.v_eps > 0.0) {
            return bad("v_eps must be > 0");
        }
        if let Some(b) = self.blowup_norm {
            if !(b > 0.0) {
                return bad("blowup_norm must be > 0");
            }
        }
        Ok(())
    }
}

/// Input switch at an absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledEvent {
    pub t: f64,
    pub new_input: GridInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Converged,
    Diverged,
    Undecided,
}

/// Why an integration was cut short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// V_d fell to the collapse guard.
    Collapse,
    BlowUp,
    NonFinite,
    /// The step observer asked to stop.
    Observer,
}

impl StopReason {
    pub fn is_divergence(self) -> bool {
        !matches!(self, StopReason::Observer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub outcome: Outcome,
    pub stop: Option<StopReason>,
}

impl<S: ModelState> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (f64, S) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }

    /// Linear interpolation between accepted steps; clamps outside the span.
    pub fn sample(&self, t: f64) -> S {
        let i = self.times.partition_point(|&ti| ti <= t);
        if i == 0 {
            return self.states[0];
        }
        if i >= self.times.len() {
            return *self.states.last().unwrap();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.states[i - 1] + (self.states[i] - self.states[i - 1]) * w
    }

    /// CSV with header `t,V_d,I_d[,I_q,V_q]`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in S::COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{}", fmt17(*t));
            for c in x.components() {
                let _ = write!(out, ",{}", fmt17(c));
            }
            out.push('\n');
        }
        out
    }
}

/// Decimal with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Converged if the last `dwell` seconds stay within `tol_ball` of
/// `target`; Diverged if the integration tripped a divergence guard or
/// V_d left the positive half-plane; Undecided otherwise.
pub fn classify_outcome<S: ModelState>(traj: &Trajectory<S>, target: &S, tol_ball: f64, dwell: f64) -> Outcome {
    if traj.stop.is_some_and(StopReason::is_divergence) || traj.states.iter().any(|x| !(x.v_d() > 0.0)) {
        return Outcome::Diverged;
    }
    let (t_end, _) = traj.last();
    if t_end - traj.times[0] < dwell {
        return Outcome::Undecided;
    }
    let from = traj.times.partition_point(|&t| t < t_end - dwell);
    let settled = traj.states[from..].iter().all(|x| (*x - *target).norm() <= tol_ball);
    if settled {
        Outcome::Converged
    } else {
        Outcome::Undecided
    }
}

/// One accepted step handed to an observer.
#[derive(Debug, Clone, Copy)]
pub struct Step<S> {
    pub t0: f64,
    pub x0: S,
    pub t1: f64,
    pub x1: S,
    pub input: GridInput,
}

// Dormand–Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Explicit Runge–Kutta stepping on an arbitrary vector field.
///
/// The field closure receives the state and the index of the current input
/// segment; it is how both the circuit models and the test oracles plug in.
pub struct Stepper<S, F> {
    field: F,
    method: Method,
    _state: PhantomData<S>,
}

impl<S, F> Stepper<S, F>
where
    S: StateVector,
    F: Fn(&S, usize) -> Result<S, ModelError>,
{
    pub fn new(field: F, method: Method) -> Self {
        Self {
            field,
            method,
            _state: PhantomData,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    fn rk4(&self, x: &S, seg: usize, h: f64) -> Result<S, ModelError> {
        let f = &self.field;
        let k1 = f(x, seg)?;
        let k2 = f(&(*x + k1 * (0.5 * h)), seg)?;
        let k3 = f(&(*x + k2 * (0.5 * h)), seg)?;
        let k4 = f(&(*x + k3 * h), seg)?;
        Ok(*x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
    }

    /// Fifth-order solution and the embedded error estimate.
    fn dopri(&self, x: &S, seg: usize, h: f64) -> Result<(S, S), ModelError> {
        let f = &self.field;
        let k1 = f(x, seg)?;
        let k2 = f(&(*x + k1 * (h * A21)), seg)?;
        let k3 = f(&(*x + (k1 * A31 + k2 * A32) * h), seg)?;
        let k4 = f(&(*x + (k1 * A41 + k2 * A42 + k3 * A43) * h), seg)?;
        let k5 = f(&(*x + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h), seg)?;
        let k6 = f(&(*x + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h), seg)?;
        let x5 = *x + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
        let k7 = f(&x5, seg)?;
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        Ok((x5, err))
    }

    /// A single uncontrolled step of the configured scheme. Used to locate
    /// events inside an accepted step.
    pub fn single_step(&self, x: &S, seg: usize, h: f64) -> Result<S, ModelError> {
        match self.method {
            Method::FixedRk4 { .. } => self.rk4(x, seg, h),
            Method::AdaptiveRk45 { .. } => self.dopri(x, seg, h).map(|(x5, _)| x5),
        }
    }

    /// Integrates across `breaks` (segment boundaries, first = t0, last =
    /// t1), calling `observe` after every accepted step. `guard` is checked
    /// on every accepted state.
    pub fn drive(
        &self,
        x0: S,
        breaks: &[f64],
        guard: impl Fn(&S) -> Option<StopReason>,
        mut observe: impl FnMut(&Step<S>, usize) -> ControlFlow<()>,
    ) -> Result<(f64, S, Option<StopReason>), IntegrateError> {
        let mut t = breaks[0];
        let mut x = x0;
        let mut h_adapt = match self.method {
            Method::AdaptiveRk45 { dt_max, .. } => 0.1 * dt_max,
            Method::FixedRk4 { dt } => dt,
        };
        for seg in 0..breaks.len() - 1 {
            let te = breaks[seg + 1];
            while t < te {
                let remaining = te - t;
                let (x_new, h) = match self.method {
                    Method::FixedRk4 { dt } => {
                        // absorb a sliver left by rounding into the last step
                        let h = if remaining <= dt * (1.0 + 1e-9) { remaining } else { dt };
                        match self.rk4(&x, seg, h) {
                            Ok(xn) => (xn, h),
                            Err(ModelError::Singular { .. }) => return Ok((t, x, Some(StopReason::Collapse))),
                            Err(e) => return Err(e.into()),
                        }
                    }
                    Method::AdaptiveRk45 {
                        abs_tol,
                        rel_tol,
                        dt_min,
                        dt_max,
                    } => {
                        let mut h = h_adapt.min(dt_max);
                        loop {
                            let last = h >= remaining;
                            let h_try = if last { remaining } else { h };
                            match self.dopri(&x, seg, h_try) {
                                Ok((xn, err)) => {
                                    let e = error_norm(&x, &xn, &err, abs_tol, rel_tol);
                                    if e <= 1.0 {
                                        let grow = if e == 0.0 {
                                            5.0
                                        } else {
                                            (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
                                        };
                                        h_adapt = (h_try * grow).max(h).min(dt_max);
                                        break (xn, h_try);
                                    }
                                    if !e.is_finite() {
                                        h = 0.25 * h_try;
                                    } else {
                                        h = h_try * (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
                                    }
                                    if h < dt_min {
                                        return Err(IntegrateError::StepUnderflow { t, h });
                                    }
                                }
                                Err(ModelError::Singular { .. }) => {
                                    h = 0.25 * h_try;
                                    if h < dt_min {
                                        return Ok((t, x, Some(StopReason::Collapse)));
                                    }
                                }
                                Err(e) => return Err(e.into()),
                            }
                        }
                    }
                };
                let t_new = if h >= remaining { te } else { t + h };
                let step = Step {
                    t0: t,
                    x0: x,
                    t1: t_new,
                    x1: x_new,
                    input: GridInput::new(0.0, 0.0),
                };
                t = t_new;
                x = x_new;
                if let Some(reason) = guard(&x) {
                    let _ = observe(&step, seg);
                    return Ok((t, x, Some(reason)));
                }
                if observe(&step, seg).is_break() {
                    return Ok((t, x, Some(StopReason::Observer)));
                }
            }
        }
        Ok((t, x, None))
    }
}

fn error_norm<S: StateVector>(x: &S, xn: &S, err: &S, atol: f64, rtol: f64) -> f64 {
    let (a, b, e) = (x.components(), xn.components(), err.components());
    let mut worst: f64 = 0.0;
    for i in 0..e.len() {
        let sc = atol + rtol * a[i].abs().max(b[i].abs());
        let r = e[i].abs() / sc;
        if r.is_nan() {
            return f64::INFINITY;
        }
        worst = worst.max(r);
    }
    worst
}

/// Integration of one circuit model along an input schedule.
pub struct Flow<'a> {
    pub params: &'a CircuitParams,
    pub cfg: &'a IntegratorConfig,
    /// +1 forward, −1 for the negated (reverse-time) field.
    pub direction: f64,
}

impl<'a> Flow<'a> {
    pub fn forward(params: &'a CircuitParams, cfg: &'a IntegratorConfig) -> Self {
        Self {
            params,
            cfg,
            direction: 1.0,
        }
    }

    pub fn reverse(params: &'a CircuitParams, cfg: &'a IntegratorConfig) -> Self {
        Self {
            params,
            cfg,
            direction: -1.0,
        }
    }

    /// Validated segment boundaries and per-segment inputs.
    pub fn schedule(
        t_span: (f64, f64),
        u0: GridInput,
        events: &[ScheduledEvent],
    ) -> Result<(Vec<f64>, Vec<GridInput>), IntegrateError> {
        let (t0, t1) = t_span;
        if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
            return Err(IntegrateError::InvalidSchedule(format!(
                "need t0 < t1, got ({t0}, {t1})"
            )));
        }
        let mut breaks = vec![t0];
        let mut inputs = vec![u0];
        let mut prev = f64::NEG_INFINITY;
        for e in events {
            if !(e.t > prev) {
                return Err(IntegrateError::InvalidSchedule(
                    "event times must be strictly increasing".into(),
                ));
            }
            if !(t0..=t1).contains(&e.t) {
                return Err(IntegrateError::InvalidSchedule(format!(
                    "event at {} outside [{t0}, {t1}]",
                    e.t
                )));
            }
            e.new_input.validate()?;
            prev = e.t;
            if e.t == t0 {
                inputs[0] = e.new_input;
                continue;
            }
            breaks.push(e.t);
            inputs.push(e.new_input);
        }
        if *breaks.last().unwrap() < t1 {
            breaks.push(t1);
        } else {
            // an event exactly at t1 has no interval to act on
            inputs.pop();
        }
        Ok((breaks, inputs))
    }

    pub fn stepper<S: ModelState>(
        &self,
        inputs: &'a [GridInput],
    ) -> Stepper<S, impl Fn(&S, usize) -> Result<S, ModelError> + 'a> {
        let (p, v_eps, dir) = (
            self.params,
            self.cfg.v_eps.min(crate::model::DEFAULT_V_EPS),
            self.direction,
        );
        Stepper::new(
            move |x: &S, seg: usize| x.deriv(&inputs[seg], p, v_eps).map(|d| d * dir),
            self.cfg.method,
        )
    }

    pub fn guard<S: ModelState>(&self, x0: &S) -> impl Fn(&S) -> Option<StopReason> {
        let blowup = self.cfg.blowup_norm.unwrap_or(100.0 * x0.norm());
        let v_eps = self.cfg.v_eps;
        move |x: &S| {
            if !x.is_finite() {
                Some(StopReason::NonFinite)
            } else if x.v_d() <= v_eps {
                Some(StopReason::Collapse)
            } else if x.norm() > blowup {
                Some(StopReason::BlowUp)
            } else {
                None
            }
        }
    }

    /// Runs the schedule, handing every accepted step to `observe` (with
    /// the input active during that step).
    pub fn run<S: ModelState>(
        &self,
        x0: S,
        u0: GridInput,
        t_span: (f64, f64),
        events: &[ScheduledEvent],
        mut observe: impl FnMut(&Step<S>) -> ControlFlow<()>,
    ) -> Result<(f64, S, Option<StopReason>), IntegrateError> {
        self.cfg.validate()?;
        u0.validate()?;
        let (breaks, inputs) = Self::schedule(t_span, u0, events)?;
        x0.deriv(&inputs[0], self.params, self.cfg.v_eps.min(crate::model::DEFAULT_V_EPS))?;
        let guard = self.guard(&x0);
        if let Some(reason) = guard(&x0) {
            return Ok((t_span.0, x0, Some(reason)));
        }
        let stepper = self.stepper::<S>(&inputs);
        stepper.drive(x0, &breaks, guard, |step, seg| {
            let mut s = *step;
            s.input = inputs[seg];
            observe(&s)
        })
    }

    /// Records every accepted step into a trajectory.
    pub fn trajectory<S: ModelState>(
        &self,
        x0: S,
        u0: GridInput,
        t_span: (f64, f64),
        events: &[ScheduledEvent],
    ) -> Result<Trajectory<S>, IntegrateError> {
        let mut times = vec![t_span.0];
        let mut states = vec![x0];
        let (_, _, stop) = self.run(x0, u0, t_span, events, |s| {
            times.push(s.t1);
            states.push(s.x1);
            ControlFlow::Continue(())
        })?;
        let outcome = match stop {
            Some(r) if r.is_divergence() => Outcome::Diverged,
            _ => Outcome::Undecided,
        };
        Ok(Trajectory {
            times,
            states,
            outcome,
            stop,
        })
    }
}

/// Integrates either model from `x0` with the scheduled input switches.
pub fn integrate<S: ModelState>(
    x0: S,
    u0: GridInput,
    p: &CircuitParams,
    t_span: (f64, f64),
    events: &[ScheduledEvent],
    cfg: &IntegratorConfig,
) -> Result<Trajectory<S>, IntegrateError> {
    Flow::forward(p, cfg).trajectory(x0, u0, t_span, events)
}

/// Integrates the negated vector field; `times` run from t0 to t1 in the
/// reversed clock.
pub fn reverse_time_integrate<S: ModelState>(
    x0: S,
    u: GridInput,
    p: &CircuitParams,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory<S>, IntegrateError> {
    Flow::reverse(p, cfg).trajectory(x0, u, t_span, &[])
}

/// Generic fixed-schedule solve of `ẋ = f(x)` on [t0, t1] without guards,
/// returning the final state. Used for oracle checks on simple systems.
pub fn solve<S: StateVector>(
    field: impl Fn(&S) -> Result<S, ModelError>,
    x0: S,
    t_span: (f64, f64),
    method: Method,
) -> Result<S, IntegrateError> {
    let stepper = Stepper::new(move |x: &S, _| field(x), method);
    let (_, x, _) = stepper.drive(x0, &[t_span.0, t_span.1], |_| None, |_, _| ControlFlow::Continue(()))?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::operating_point;
    use crate::model::PlanarState;

    fn paper() -> (GridInput, CircuitParams) {
        (GridInput::paper_defaults(), CircuitParams::paper_defaults())
    }

    #[test]
    fn rejects_bad_config_and_schedule() {
        let (u, p) = paper();
        let x0 = operating_point(&u, &p).unwrap();
        let bad = IntegratorConfig::fixed(0.0);
        assert!(matches!(
            integrate(x0, u, &p, (0.0, 1e-3), &[], &bad),
            Err(IntegrateError::InvalidConfig(_))
        ));
        let cfg = IntegratorConfig::default();
        assert!(integrate(x0, u, &p, (1.0, 0.0), &[], &cfg).is_err());
        let ev = [
            ScheduledEvent { t: 2e-4, new_input: u },
            ScheduledEvent { t: 1e-4, new_input: u },
        ];
        assert!(matches!(
            integrate(x0, u, &p, (0.0, 1e-3), &ev, &cfg),
            Err(IntegrateError::InvalidSchedule(_))
        ));
        let ev = [ScheduledEvent { t: 2e-3, new_input: u }];
        assert!(integrate(x0, u, &p, (0.0, 1e-3), &ev, &cfg).is_err());
    }

    #[test]
    fn event_times_are_step_boundaries() {
        let (u, p) = paper();
        let x0 = operating_point(&u, &p).unwrap();
        let ev = [
            ScheduledEvent {
                t: 1.234_567e-4,
                new_input: u.with_power(30000.0),
            },
            ScheduledEvent {
                t: 3.3e-4,
                new_input: u,
            },
        ];
        for cfg in [IntegratorConfig::default(), IntegratorConfig::fixed(1e-7)] {
            let traj = integrate(x0, u, &p, (0.0, 5e-4), &ev, &cfg).unwrap();
            for e in &ev {
                assert!(traj.times.contains(&e.t), "missing boundary {}", e.t);
            }
            assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn collapse_is_reported_as_divergence() {
        let (u, p) = paper();
        // far outside the region of attraction
        let x0 = PlanarState::new(60.0, 32.66);
        for cfg in [IntegratorConfig::default(), IntegratorConfig::fixed(1e-8)] {
            let traj = integrate(x0, u, &p, (0.0, 0.01), &[], &cfg).unwrap();
            assert_eq!(traj.outcome, Outcome::Diverged);
            assert_eq!(traj.stop, Some(StopReason::Collapse));
            let target = operating_point(&u, &p).unwrap();
            assert_eq!(classify_outcome(&traj, &target, 1.0, 1e-3), Outcome::Diverged);
        }
    }

    #[test]
    fn classify_outcome_dwell() {
        let (u, p) = paper();
        let eq = operating_point(&u, &p).unwrap();
        let traj = Trajectory {
            times: vec![0.0, 1e-3, 5e-3, 7e-3],
            states: vec![eq + PlanarState::new(5.0, 0.0), eq, eq, eq],
            outcome: Outcome::Undecided,
            stop: None,
        };
        assert_eq!(classify_outcome(&traj, &eq, 0.1, 5e-3), Outcome::Converged);
        assert_eq!(classify_outcome(&traj, &eq, 0.1, 7e-3), Outcome::Undecided);
        assert_eq!(classify_outcome(&traj, &eq, 0.1, 8e-3), Outcome::Undecided);
        let mut low = traj.clone();
        low.states[1].v_d = -1.0;
        assert_eq!(classify_outcome(&low, &eq, 0.1, 5e-3), Outcome::Diverged);
    }

    #[test]
    fn csv_header_and_precision() {
        let (u, p) = paper();
        let eq = operating_point(&u, &p).unwrap();
        let traj = integrate(eq, u, &p, (0.0, 2e-6), &[], &IntegratorConfig::fixed(1e-6)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,V_d,I_d"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 3);
        assert_eq!(row[1].parse::<f64>().unwrap(), eq.v_d);
        assert_eq!(csv.lines().count(), 4);
        let full = Trajectory {
            times: vec![0.0],
            states: vec![crate::model::FullState::default()],
            outcome: Outcome::Undecided,
            stop: None,
        };
        assert!(full.to_csv().starts_with("t,V_d,I_d,I_q,V_q\n"));
    }
}
