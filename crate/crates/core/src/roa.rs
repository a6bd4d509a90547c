//! Region of attraction of the stable planar equilibrium.
//!
//! Below the Hopf point the operating equilibrium is surrounded by an
//! unstable limit cycle; its interior is the region of attraction. In
//! reverse time the cycle attracts, so it is traced by reverse-integrating
//! from a point near the equilibrium and following the first-return map
//! on the half-line `{I_d = I_d*, V_d > V_d*}` until it closes.
//!
//! The plain return-map iteration contracts slowly when the equilibrium is
//! weakly damped (near the Hopf point, or from a tiny seed), so after
//! `max_revolutions` iterations the fixed point of the return map is
//! finished off by a bracketed root search on `Π(s) − s`.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{classify_planar, operating_point};
use crate::model::{CircuitParams, GridInput, PlanarState, StateVector};
use crate::odeint::{
    classify_outcome, fmt17, Flow, IntegrateError, IntegratorConfig, Method, Outcome, StopReason, Trajectory,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoaError {
    #[error("no unstable limit cycle found: {0}")]
    NoCycleFound(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoaConfig {
    pub integrator: IntegratorConfig,
    /// Reverse-time seed distance from the equilibrium along +V_d, relative
    /// to the equilibrium norm.
    pub seed_offset_rel: f64,
    /// Plain return-map iterations before switching to the root search.
    pub max_revolutions: usize,
    /// Closure tolerance relative to the cycle diameter.
    pub closure_tol_rel: f64,
    /// Crossing-time refinement tolerance in seconds.
    pub crossing_time_tol: f64,
    /// Minimum polygon vertex count.
    pub min_vertices: usize,
    /// Return-map evaluations allowed in the root search.
    pub max_root_evals: usize,
}

impl Default for RoaConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig {
                method: Method::AdaptiveRk45 {
                    abs_tol: 1e-9,
                    rel_tol: 1e-11,
                    dt_min: 1e-15,
                    dt_max: 1e-6,
                },
                blowup_norm: None,
                v_eps: 1.0,
            },
            seed_offset_rel: 1e-3,
            max_revolutions: 200,
            closure_tol_rel: 1e-4,
            crossing_time_tol: 1e-10,
            min_vertices: 200,
            max_root_evals: 200,
        }
    }
}

/// One application of the first-return map.
#[derive(Debug, Clone, PartialEq)]
pub struct Return {
    /// Section coordinate V_d − V_d* at the start.
    pub s: f64,
    /// Section coordinate at the next crossing.
    pub s_next: f64,
    /// Reverse-time duration of the revolution.
    pub period: f64,
    /// Accepted states of the revolution, start included, crossing excluded.
    pub path: Vec<PlanarState>,
}

/// First-return map of the reverse-time planar flow on the section
/// half-line through the equilibrium.
pub struct PoincareMap<'a> {
    pub u: GridInput,
    pub p: &'a CircuitParams,
    pub center: PlanarState,
    cfg: IntegratorConfig,
    crossing_time_tol: f64,
    /// Reverse-time budget per revolution.
    time_cap: f64,
}

impl<'a> PoincareMap<'a> {
    pub fn new(u: GridInput, p: &'a CircuitParams, cfg: &RoaConfig) -> Result<Self, RoaError> {
        let center = stable_center(&u, p)?;
        let eq = classify_planar(&center, &u, p).expect("center is regular");
        let w = eq.eigenvalues[0].im.abs().max(p.resonance() * 1e-3);
        Ok(Self {
            u,
            p,
            center,
            cfg: cfg.integrator,
            crossing_time_tol: cfg.crossing_time_tol,
            time_cap: 50.0 * 2.0 * std::f64::consts::PI / w,
        })
    }

    /// Caps the step size, so a recorded revolution has enough vertices.
    pub fn with_max_step(mut self, dt: f64) -> Self {
        match &mut self.cfg.method {
            Method::AdaptiveRk45 { dt_min, dt_max, .. } => {
                *dt_max = dt_max.min(dt);
                *dt_min = dt_min.min(*dt_max);
            }
            Method::FixedRk4 { dt: h } => *h = h.min(dt),
        }
        self
    }

    /// Applies the map once. `Ok(None)` means the reverse trajectory did not
    /// come back to the section: it collapsed or left the physical domain.
    pub fn apply(&self, s: f64, record: bool) -> Result<Option<Return>, RoaError> {
        let (vc, ic) = (self.center.v_d, self.center.i_d);
        let x0 = PlanarState::new(vc + s, ic);
        let flow = Flow::reverse(self.p, &self.cfg);
        let inputs = [self.u];
        let stepper = flow.stepper::<PlanarState>(&inputs);
        let mut path = vec![x0];
        let mut hit: Option<(f64, PlanarState)> = None;
        let tol = self.crossing_time_tol;
        let section = |x: &PlanarState| x.i_d - ic;
        flow.run(x0, self.u, (0.0, self.time_cap), &[], |st| {
            let (g0, g1) = (section(&st.x0), section(&st.x1));
            if g0 < 0.0 && g1 >= 0.0 && st.x1.v_d > vc {
                // bisect the crossing inside the step
                let (mut lo, mut hi) = (0.0, st.t1 - st.t0);
                let mut x_hi = st.x1;
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    match stepper.single_step(&st.x0, 0, mid) {
                        Ok(xm) if section(&xm) < 0.0 => lo = mid,
                        Ok(xm) => {
                            hi = mid;
                            x_hi = xm;
                        }
                        Err(_) => break,
                    }
                }
                hit = Some((st.t0 + hi, x_hi));
                return ControlFlow::Break(());
            }
            if record {
                path.push(st.x1);
            }
            ControlFlow::Continue(())
        })?;
        Ok(hit.map(|(period, x)| Return {
            s,
            s_next: x.v_d - vc,
            period,
            path,
        }))
    }
}

fn stable_center(u: &GridInput, p: &CircuitParams) -> Result<PlanarState, RoaError> {
    let none = || RoaError::NoCycleFound(format!("no stable equilibrium to enclose at P = {} W", u.p_pev));
    let x = operating_point(u, p).ok_or_else(none)?;
    match classify_planar(&x, u, p) {
        Ok(eq) if eq.is_stable() => Ok(x),
        _ => Err(none()),
    }
}

/// Polygonal approximation of the unstable limit cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedCurve {
    pub vertices: Vec<PlanarState>,
    pub center: PlanarState,
    /// |Π(s*) − s*| on the section, volts.
    pub closure_residual: f64,
    /// Section coordinate of the cycle, V_d − V_d* in volts.
    pub section_offset: f64,
    /// Cycle period in seconds.
    pub period: f64,
    /// Successive plain-iteration residuals |s_{k+1} − s_k|.
    #[serde(skip)]
    pub iteration_residuals: Vec<f64>,
}

/// Axis-aligned extents of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub v_d_min: f64,
    pub v_d_max: f64,
    pub i_d_min: f64,
    pub i_d_max: f64,
}

impl Extents {
    pub fn width(&self) -> f64 {
        self.v_d_max - self.v_d_min
    }
    pub fn height(&self) -> f64 {
        self.i_d_max - self.i_d_min
    }
    pub fn contains(&self, x: &PlanarState) -> bool {
        (self.v_d_min..=self.v_d_max).contains(&x.v_d) && (self.i_d_min..=self.i_d_max).contains(&x.i_d)
    }
}

impl ClosedCurve {
    pub fn extents(&self) -> Extents {
        let mut e = Extents {
            v_d_min: f64::INFINITY,
            v_d_max: f64::NEG_INFINITY,
            i_d_min: f64::INFINITY,
            i_d_max: f64::NEG_INFINITY,
        };
        for v in &self.vertices {
            e.v_d_min = e.v_d_min.min(v.v_d);
            e.v_d_max = e.v_d_max.max(v.v_d);
            e.i_d_min = e.i_d_min.min(v.i_d);
            e.i_d_max = e.i_d_max.max(v.i_d);
        }
        e
    }

    /// Signed shoelace area in V·A; positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a.v_d * b.i_d - b.v_d * a.i_d
            })
            .sum::<f64>()
            * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Max |V_d − V_d*| and |I_d − I_d*| over the cycle.
    pub fn amplitude(&self) -> (f64, f64) {
        self.vertices.iter().fold((0.0, 0.0), |(dv, di), x| {
            (
                f64::max(dv, (x.v_d - self.center.v_d).abs()),
                f64::max(di, (x.i_d - self.center.i_d).abs()),
            )
        })
    }

    /// Maps a state into coordinates where the curve's bounding box is the
    /// unit square, so that distances mix volts and amperes sensibly.
    pub fn normalize(&self, x: &PlanarState) -> (f64, f64) {
        let e = self.extents();
        ((x.v_d - e.v_d_min) / e.width(), (x.i_d - e.i_d_min) / e.height())
    }

    fn edges(&self) -> impl Iterator<Item = (PlanarState, PlanarState)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Distance from `x` to the polygon boundary in normalized coordinates.
    pub fn boundary_distance(&self, x: &PlanarState) -> f64 {
        let e = self.extents();
        let q = ((x.v_d - e.v_d_min) / e.width(), (x.i_d - e.i_d_min) / e.height());
        self.edges()
            .map(|(a, b)| {
                let a = ((a.v_d - e.v_d_min) / e.width(), (a.i_d - e.i_d_min) / e.height());
                let b = ((b.v_d - e.v_d_min) / e.width(), (b.i_d - e.i_d_min) / e.height());
                segment_distance(q, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Winding number of the polygon around `x`.
    pub fn winding_number(&self, x: &PlanarState) -> i32 {
        let mut w = 0;
        for (a, b) in self.edges() {
            let cross = (b.v_d - a.v_d) * (x.i_d - a.i_d) - (x.v_d - a.v_d) * (b.i_d - a.i_d);
            if a.i_d <= x.i_d {
                if b.i_d > x.i_d && cross > 0.0 {
                    w += 1;
                }
            } else if b.i_d <= x.i_d && cross < 0.0 {
                w -= 1;
            }
        }
        w
    }

    /// Whether any two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// CSV of vertex rows `V_d,I_d`; the last vertex connects to the first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("V_d,I_d\n");
        for v in &self.vertices {
            out.push_str(&format!("{},{}\n", fmt17(v.v_d), fmt17(v.i_d)));
        }
        out
    }
}

fn segment_distance(q: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((q.0 - a.0) * dx + (q.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (a.0 + t * dx, a.1 + t * dy);
    ((q.0 - px).powi(2) + (q.1 - py).powi(2)).sqrt()
}

fn orient(a: PlanarState, b: PlanarState, c: PlanarState) -> f64 {
    (b.v_d - a.v_d) * (c.i_d - a.i_d) - (b.i_d - a.i_d) * (c.v_d - a.v_d)
}

fn segments_intersect(a: PlanarState, b: PlanarState, c: PlanarState, d: PlanarState) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Strict interior test by ray casting, with points within a relative
/// 1e-12 of the boundary counted as outside.
pub fn contains(curve: &ClosedCurve, x: &PlanarState) -> bool {
    let mut inside = false;
    for (a, b) in curve.edges() {
        if (a.i_d > x.i_d) != (b.i_d > x.i_d) {
            let v_cross = a.v_d + (x.i_d - a.i_d) * (b.v_d - a.v_d) / (b.i_d - a.i_d);
            if x.v_d < v_cross {
                inside = !inside;
            }
        }
    }
    inside && curve.boundary_distance(x) > 1e-12
}

/// Symmetric Hausdorff distance between two curves' vertex sets and
/// polylines, in the normalized coordinates of `a`.
pub fn hausdorff_distance(a: &ClosedCurve, b: &ClosedCurve) -> f64 {
    let e = a.extents();
    let norm = |x: &PlanarState| ((x.v_d - e.v_d_min) / e.width(), (x.i_d - e.i_d_min) / e.height());
    let one_way = |from: &ClosedCurve, to: &ClosedCurve| {
        from.vertices
            .iter()
            .map(|x| {
                let q = norm(x);
                to.edges()
                    .map(|(s, t)| segment_distance(q, norm(&s), norm(&t)))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Traces the unstable limit cycle around the stable operating point.
pub fn trace_unstable_limit_cycle(u: &GridInput, p: &CircuitParams, cfg: &RoaConfig) -> Result<ClosedCurve, RoaError> {
    let map = PoincareMap::new(*u, p, cfg)?;
    let center = map.center;
    let mut s = cfg.seed_offset_rel * center.norm();
    let mut residuals = Vec::new();
    let no_return = |s: f64| {
        RoaError::NoCycleFound(format!(
            "reverse trajectory from section offset {s:.6e} V did not return"
        ))
    };

    // plain iteration of the return map; closed once the geometric tail
    // estimate |Δs|·r/(1 − r) drops below tolerance
    let mut closed = None;
    for k in 0..cfg.max_revolutions {
        let r = map.apply(s, false)?.ok_or_else(|| no_return(s))?;
        let step = r.s_next - s;
        if k == 0 && step <= 0.0 {
            return Err(RoaError::NoCycleFound(format!(
                "reverse flow does not spiral outward from the equilibrium (Π(s) − s = {step:.3e} V)"
            )));
        }
        residuals.push(step.abs());
        if let [.., prev, last] = residuals[..] {
            let ratio = last / prev;
            if ratio < 1.0 && last * ratio / (1.0 - ratio) <= cfg.closure_tol_rel * 2.0 * r.s_next.abs() {
                closed = Some(r.s_next);
                break;
            }
        }
        s = r.s_next;
    }

    let s_star = match closed {
        Some(s) => s,
        None => root_search(&map, s, cfg)?,
    };

    // record one revolution finely enough to give the vertex budget
    let probe = map.apply(s_star, false)?.ok_or_else(|| no_return(s_star))?;
    let fine = map.with_max_step(probe.period / (2.0 * cfg.min_vertices as f64));
    let rev = fine.apply(s_star, true)?.ok_or_else(|| no_return(s_star))?;
    let closure_residual = (rev.s_next - s_star).abs();
    let diameter = 2.0 * s_star;
    if closure_residual > cfg.closure_tol_rel * diameter {
        return Err(RoaError::NoCycleFound(format!(
            "closure residual {closure_residual:.3e} V exceeds tolerance"
        )));
    }
    let curve = ClosedCurve {
        vertices: rev.path,
        center,
        closure_residual,
        section_offset: s_star,
        period: rev.period,
        iteration_residuals: residuals,
    };
    if curve.winding_number(&center) == 0 {
        return Err(RoaError::NoCycleFound(
            "traced orbit does not enclose the equilibrium".into(),
        ));
    }
    Ok(curve)
}

/// Bracketed search for `Π(s) = s` starting from an inside point `s_in`
/// (where the reverse flow still spirals outward). A trajectory that fails
/// to return counts as outside.
fn root_search(map: &PoincareMap<'_>, s_in: f64, cfg: &RoaConfig) -> Result<f64, RoaError> {
    let g = |s: f64| -> Result<Option<f64>, RoaError> { Ok(map.apply(s, false)?.map(|r| r.s_next - s)) };
    let mut lo = s_in;
    let mut g_lo = match g(lo)? {
        Some(v) if v > 0.0 => v,
        _ => return Err(RoaError::NoCycleFound("lost the inside bracket".into())),
    };
    // expand outward until the return map contracts or the orbit escapes
    let mut hi = lo * 1.5;
    let mut g_hi: Option<f64>;
    let mut evals = 0;
    loop {
        g_hi = g(hi)?;
        evals += 1;
        match g_hi {
            Some(v) if v > 0.0 => {
                lo = hi;
                g_lo = v;
                hi *= 1.5;
            }
            _ => break,
        }
        if evals > cfg.max_root_evals || hi > 1e3 * map.center.norm() {
            return Err(RoaError::NoCycleFound("no outer bracket for the return map".into()));
        }
    }
    // Illinois regula falsi, falling back to bisection when the outer end
    // has no value
    let mut side = 0i8;
    while evals < cfg.max_root_evals {
        let s = match g_hi {
            Some(gh) => {
                let c = hi - gh * (hi - lo) / (gh - g_lo);
                if c > lo && c < hi {
                    c
                } else {
                    0.5 * (lo + hi)
                }
            }
            None => 0.5 * (lo + hi),
        };
        let gs = g(s)?;
        evals += 1;
        match gs {
            Some(v) if v > 0.0 => {
                lo = s;
                g_lo = v;
                if side == 1 {
                    if let Some(gh) = g_hi.as_mut() {
                        *gh *= 0.5;
                    }
                }
                side = 1;
            }
            Some(v) => {
                hi = s;
                g_hi = Some(v);
                if side == -1 {
                    g_lo *= 0.5;
                }
                side = -1;
                if v == 0.0 {
                    return Ok(s);
                }
            }
            None => {
                hi = s;
                g_hi = None;
                side = 0;
            }
        }
        if hi - lo <= 1e-10 * hi {
            return Ok(if g_hi.is_some() { 0.5 * (lo + hi) } else { lo });
        }
    }
    Err(RoaError::NoCycleFound(format!(
        "root search did not converge in {} evaluations",
        cfg.max_root_evals
    )))
}

/// Region-of-attraction summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoaReport {
    pub curve: ClosedCurve,
    /// Shoelace area in V·A.
    pub area: f64,
    pub extents: Extents,
}

pub fn roa_report(u: &GridInput, p: &CircuitParams, cfg: &RoaConfig) -> Result<RoaReport, RoaError> {
    let curve = trace_unstable_limit_cycle(u, p, cfg)?;
    Ok(RoaReport {
        area: curve.area(),
        extents: curve.extents(),
        curve,
    })
}

/// Whether reverse-time stop reasons mean "left the domain".
pub fn escaped(stop: Option<StopReason>) -> bool {
    stop.is_some_and(StopReason::is_divergence)
}

/// Forward-integration check of the traced boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsCheckConfig {
    pub n_interior: usize,
    pub n_exterior: usize,
    /// Minimum normalized distance of a sample from the curve.
    pub standoff: f64,
    /// Exterior samples lie within this normalized distance of the curve.
    pub exterior_band: f64,
    pub integrator: IntegratorConfig,
    /// Forward horizon per sample, seconds.
    pub t_end: f64,
    /// Convergence ball relative to the equilibrium norm.
    pub tol_ball_rel: f64,
    pub dwell: f64,
}

impl Default for DynamicsCheckConfig {
    fn default() -> Self {
        Self {
            n_interior: 200,
            n_exterior: 50,
            standoff: 0.03,
            exterior_band: 0.1,
            integrator: IntegratorConfig::default(),
            t_end: 0.1,
            tol_ball_rel: 1e-3,
            dwell: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleVerdict {
    pub state: PlanarState,
    pub interior: bool,
    pub outcome: Outcome,
    /// Left the doubled bounding box without tripping a guard.
    pub left_box: bool,
}

impl SampleVerdict {
    pub fn consistent(&self) -> bool {
        if self.interior {
            self.outcome == Outcome::Converged
        } else {
            self.outcome == Outcome::Diverged || self.left_box
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsCheck {
    pub seed: u64,
    pub samples: Vec<SampleVerdict>,
    pub misclassified: usize,
}

/// Rejection-samples points inside the curve and in a band just outside
/// it, integrates each forward under `u`, and counts samples whose fate
/// disagrees with the geometry. Deterministic for a given seed.
pub fn check_dynamics(
    curve: &ClosedCurve,
    u: &GridInput,
    p: &CircuitParams,
    cfg: &DynamicsCheckConfig,
    seed: u64,
) -> Result<DynamicsCheck, RoaError> {
    let e = curve.extents();
    let (w, h) = (e.width(), e.height());
    let big = Extents {
        v_d_min: e.v_d_min - 0.5 * w,
        v_d_max: e.v_d_max + 0.5 * w,
        i_d_min: e.i_d_min - 0.5 * h,
        i_d_max: e.i_d_max + 0.5 * h,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(cfg.n_interior + cfg.n_exterior);
    let mut draw = |interior: bool, n: usize, points: &mut Vec<(PlanarState, bool)>| {
        let mut found = 0;
        let mut tries = 0usize;
        while found < n && tries < 1000 * n.max(1) {
            tries += 1;
            let x = PlanarState::new(
                rng.gen_range(big.v_d_min..big.v_d_max),
                rng.gen_range(big.i_d_min..big.i_d_max),
            );
            if x.v_d <= 0.0 {
                continue;
            }
            let d = curve.boundary_distance(&x);
            let ok = if interior {
                contains(curve, &x) && d >= cfg.standoff
            } else {
                !contains(curve, &x) && d >= cfg.standoff && d <= cfg.exterior_band
            };
            if ok {
                points.push((x, interior));
                found += 1;
            }
        }
    };
    draw(true, cfg.n_interior, &mut points);
    draw(false, cfg.n_exterior, &mut points);

    let target = curve.center;
    let tol_ball = cfg.tol_ball_rel * target.norm();
    let samples = points
        .par_iter()
        .map(|&(x, interior)| {
            let mut left_box = false;
            let flow = Flow::forward(p, &cfg.integrator);
            let mut times = vec![0.0];
            let mut states = vec![x];
            let (_, _, stop) = flow.run(x, *u, (0.0, cfg.t_end), &[], |s| {
                times.push(s.t1);
                states.push(s.x1);
                if !big.contains(&s.x1) {
                    left_box = true;
                    return ControlFlow::Break(());
                }
                ControlFlow::Continue(())
            })?;
            let traj = Trajectory {
                times,
                states,
                outcome: Outcome::Undecided,
                stop,
            };
            let outcome = classify_outcome(&traj, &target, tol_ball, cfg.dwell);
            Ok(SampleVerdict {
                state: x,
                interior,
                outcome,
                left_box,
            })
        })
        .collect::<Result<Vec<_>, IntegrateError>>()?;
    let misclassified = samples.iter().filter(|s| !s.consistent()).count();
    Ok(DynamicsCheck {
        seed,
        samples,
        misclassified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ClosedCurve {
        let v = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        ClosedCurve {
            vertices: v.iter().map(|&(a, b)| PlanarState::new(a, b)).collect(),
            center: PlanarState::new(1.0, 1.0),
            closure_residual: 0.0,
            section_offset: 1.0,
            period: 1.0,
            iteration_residuals: vec![],
        }
    }

    #[test]
    fn polygon_geometry() {
        let sq = square();
        assert_eq!(sq.area(), 4.0);
        assert!(sq.signed_area() > 0.0);
        assert!(contains(&sq, &PlanarState::new(1.0, 1.0)));
        assert!(contains(&sq, &PlanarState::new(0.1, 1.9)));
        assert!(!contains(&sq, &PlanarState::new(2.0, 1.0)), "edge is not interior");
        assert!(!contains(&sq, &PlanarState::new(0.0, 0.0)), "vertex is not interior");
        assert!(!contains(&sq, &PlanarState::new(3.0, 1.0)));
        assert_eq!(sq.winding_number(&PlanarState::new(1.0, 1.0)), 1);
        assert_eq!(sq.winding_number(&PlanarState::new(5.0, 1.0)), 0);
        assert!(sq.is_simple());
        let mut bow = sq.clone();
        bow.vertices.swap(1, 2);
        assert!(!bow.is_simple());
        assert_eq!(sq.amplitude(), (1.0, 1.0));
    }

    #[test]
    fn hausdorff_of_shifted_square() {
        let a = square();
        let mut b = square();
        for v in &mut b.vertices {
            v.v_d += 0.2;
        }
        // 0.2 V on a 2 V wide box
        assert!((hausdorff_distance(&a, &b) - 0.1).abs() < 1e-12);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    #[test]
    fn csv_is_vertex_rows() {
        let csv = square().to_csv();
        assert!(csv.starts_with("V_d,I_d\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn unstable_operating_point_has_no_cycle() {
        let p = CircuitParams::paper_defaults();
        let u = GridInput::paper_defaults().with_power(26000.0);
        let r = trace_unstable_limit_cycle(&u, &p, &RoaConfig::default());
        assert!(matches!(r, Err(RoaError::NoCycleFound(_))));
    }
}
