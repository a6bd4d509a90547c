//! Configuration and subcommands of the `pev-stability` binary.
//!
//! Every subcommand builds its artifacts in memory first; nothing is
//! written unless the whole computation succeeds. Numbers in CSV and JSON
//! are written with 17 significant digits.

use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::bifurcation::{
    attach_cycle_amplitudes, branch_csv, default_hopf_bracket, find_hopf, sweep_equilibria, BifurcationError,
};
use crate::equilibrium::{
    full_guess_from_planar, full_relative_residual, max_loadability, operating_point, pv_curve, solve_full_equilibrium,
    solve_planar_equilibria, Classification,
};
use crate::model::{dq_to_abc, CircuitParams, FullState, GridInput, ModelError, ModelState, PlanarState};
use crate::odeint::{
    classify_outcome, fmt17, integrate, IntegrateError, IntegratorConfig, Outcome, ScheduledEvent, Trajectory,
};
use crate::roa::{check_dynamics, roa_report, DynamicsCheckConfig, RoaConfig, RoaError};
use crate::scenario::{
    default_bracket, faulted_equilibrium, find_cct_bisection, find_cct_roa, CctConfig, CctMethod, CctResult,
    DisturbanceScenario, ScenarioError,
};
use crate::Complex;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    InvalidInput(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidInput(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidInput(_) => "invalid_input",
            CliError::Numerical(_) => "numerical_failure",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable error report for standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::InvalidInput(e.to_string())
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::InvalidConfig(_) | IntegrateError::InvalidSchedule(_) | IntegrateError::InitialState(_) => {
                CliError::InvalidInput(e.to_string())
            }
            IntegrateError::StepUnderflow { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<RoaError> for CliError {
    fn from(e: RoaError) -> Self {
        match e {
            RoaError::Integrate(e) => e.into(),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BifurcationError> for CliError {
    fn from(e: BifurcationError) -> Self {
        match e {
            BifurcationError::InvalidSweep(_) => CliError::InvalidInput(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidScenario(_) | ScenarioError::NoStablePreFault(_) | ScenarioError::Model(_) => {
                CliError::InvalidInput(e.to_string())
            }
            ScenarioError::Integrate(e) => e.into(),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pev-stability",
    version,
    about = "Voltage stability of a grid-connected constant-power load"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for sampling-based checks (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Load power in watts (overrides `input.P_pev`).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p_pev: Option<f64>,
    /// Source d-axis voltage in volts (overrides `input.E_d`).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub e_d: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Equilibria, spectra, classification and the loadability limit.
    Equilibria,
    /// Time-domain run from the operating point.
    Simulate(SimulateArgs),
    /// Equilibrium branches over load power and the Hopf point.
    Bifurcate(BifurcateArgs),
    /// Unstable limit cycle bounding the region of attraction.
    Roa(RoaArgs),
    /// Critical clearing time of a sag or surge.
    Cct(CctArgs),
    /// Static P–V characteristic.
    PvCurve(PvCurveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Planar,
    Full,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub t_end: Option<f64>,
    /// JSON list of input switches `[{"t": .., "E_d": .., "P_pev": ..}]`.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Scenario JSON; with `--t-clear` it supplies the events.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub t_clear: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Also write three-phase waveforms.
    #[arg(long)]
    pub abc: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BifurcateArgs {
    #[arg(long)]
    pub p_min: Option<f64>,
    #[arg(long)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Skip limit-cycle tracing along the stable branch.
    #[arg(long)]
    pub no_cycles: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RoaArgs {
    /// Skip the forward-simulation check of sampled points.
    #[arg(long)]
    pub no_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CctMethodArg {
    Bisection,
    Roa,
    Both,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CctArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<CctMethodArg>,
    #[arg(long)]
    pub t_lo: Option<f64>,
    #[arg(long)]
    pub t_hi: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PvCurveArgs {
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub p_max: Option<f64>,
}

/// Input switch in a simulate run; omitted fields keep their previous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub t: f64,
    #[serde(rename = "E_d", default)]
    pub e_d: Option<f64>,
    #[serde(rename = "E_q", default)]
    pub e_q: Option<f64>,
    #[serde(rename = "P_pev", default)]
    pub p_pev: Option<f64>,
}

fn resolve_events(u0: GridInput, specs: &[EventSpec]) -> Vec<ScheduledEvent> {
    let mut u = u0;
    specs
        .iter()
        .map(|e| {
            u = GridInput {
                e_d: e.e_d.unwrap_or(u.e_d),
                e_q: e.e_q.unwrap_or(u.e_q),
                p_pev: e.p_pev.unwrap_or(u.p_pev),
            };
            ScheduledEvent { t: e.t, new_input: u }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub t_end: f64,
    pub events: Vec<EventSpec>,
    pub t_clear: Option<f64>,
    pub model: ModelKind,
    pub abc: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t_end: 0.1,
            events: Vec::new(),
            t_clear: None,
            model: ModelKind::Planar,
            abc: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BifurcationConfig {
    pub p_min: f64,
    /// Defaults to 1.2·P_hopf.
    pub p_max: Option<f64>,
    pub steps: usize,
    pub cycles: bool,
}

impl Default for BifurcationConfig {
    fn default() -> Self {
        Self {
            p_min: 0.0,
            p_max: None,
            steps: 121,
            cycles: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvConfig {
    pub points: usize,
    /// Defaults to the loadability limit.
    pub p_max: Option<f64>,
}

impl Default for PvConfig {
    fn default() -> Self {
        Self {
            points: 201,
            p_max: None,
        }
    }
}

/// Outcome classification and search settings; the integrator is the
/// run-level one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CctSettings {
    pub tol_ball_rel: f64,
    pub dwell: f64,
    pub horizon: f64,
    pub max_extensions: u32,
    pub tol_t: f64,
    pub method: CctMethodArg,
    pub bracket: Option<(f64, f64)>,
}

impl Default for CctSettings {
    fn default() -> Self {
        let d = CctConfig::default();
        Self {
            tol_ball_rel: d.tol_ball_rel,
            dwell: d.dwell,
            horizon: d.horizon,
            max_extensions: d.max_extensions,
            tol_t: d.tol_t,
            method: CctMethodArg::Both,
            bracket: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoaSettings {
    pub tracer: RoaConfig,
    pub check: bool,
    pub dynamics: DynamicsCheckConfig,
}

impl Default for RoaSettings {
    fn default() -> Self {
        Self {
            tracer: RoaConfig::default(),
            check: true,
            dynamics: DynamicsCheckConfig::default(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "CircuitParams::paper_defaults")]
    pub circuit: CircuitParams,
    #[serde(default = "GridInput::paper_defaults")]
    pub input: GridInput,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub bifurcation: BifurcationConfig,
    #[serde(default)]
    pub roa: RoaSettings,
    #[serde(default)]
    pub cct: CctSettings,
    #[serde(default)]
    pub scenario: Option<DisturbanceScenario>,
    #[serde(default)]
    pub pv_curve: PvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        path.map(read_json).transpose().map(Option::unwrap_or_default)
    }

    pub fn apply(&mut self, common: &CommonArgs) {
        if let Some(out) = &common.out {
            self.output_dir = out.clone();
        }
        if let Some(seed) = common.seed {
            self.seed = seed;
        }
        if let Some(p) = common.p_pev {
            self.input.p_pev = p;
        }
        if let Some(e) = common.e_d {
            self.input.e_d = e;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.circuit.validate()?;
        self.input.validate()?;
        self.integrator.validate()?;
        self.roa.tracer.integrator.validate()?;
        self.roa.dynamics.integrator.validate()?;
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        let c = &self.cct;
        if !(c.tol_t > 0.0 && c.horizon > 0.0 && c.dwell > 0.0 && c.tol_ball_rel > 0.0) {
            return Err(CliError::InvalidInput(
                "cct: tol_t, horizon, dwell and tol_ball_rel must be > 0".into(),
            ));
        }
        if !(self.simulate.t_end > 0.0) {
            return Err(CliError::InvalidInput("simulate: t_end must be > 0".into()));
        }
        if self.bifurcation.steps < 2 || self.pv_curve.points < 2 {
            return Err(CliError::InvalidInput(
                "bifurcation.steps and pv_curve.points must be >= 2".into(),
            ));
        }
        Ok(())
    }

    pub fn cct_config(&self) -> CctConfig {
        CctConfig {
            integrator: self.integrator,
            tol_ball_rel: self.cct.tol_ball_rel,
            dwell: self.cct.dwell,
            horizon: self.cct.horizon,
            max_extensions: self.cct.max_extensions,
            tol_t: self.cct.tol_t,
            roa: self.roa.tracer,
        }
    }
}

/// One output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, s: String) -> Self {
        Self {
            name: name.into(),
            contents: s.into_bytes(),
        }
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Self {
        Self {
            name: name.into(),
            contents: to_json(value).into_bytes(),
        }
    }
}

/// Pretty JSON with floats written as `{:.16e}`.
struct Sig17(PrettyFormatter<'static>);

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializable");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8")
}

fn opt17(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

#[derive(Serialize)]
struct Spectrum {
    eigenvalues: Vec<Complex>,
    classification: Classification,
    stable: bool,
}

#[derive(Serialize)]
struct PlanarEntry {
    branch: &'static str,
    state: PlanarState,
    #[serde(flatten)]
    spectrum: Spectrum,
}

#[derive(Serialize)]
struct FullEntry {
    state: FullState,
    #[serde(flatten)]
    spectrum: Spectrum,
    newton_iterations: usize,
    relative_residual: f64,
}

#[derive(Serialize)]
struct EquilibriaReport {
    status: &'static str,
    circuit: CircuitParams,
    input: GridInput,
    p_max: f64,
    r_over_x: f64,
    planar_reduction_valid: bool,
    planar: Vec<PlanarEntry>,
    full: Option<FullEntry>,
}

pub fn cmd_equilibria(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let (u, p) = (&cfg.input, &cfg.circuit);
    let planar: Vec<PlanarEntry> = solve_planar_equilibria(u, p)
        .into_iter()
        .zip(["high", "low"])
        .map(|(eq, branch)| PlanarEntry {
            branch,
            state: eq.state,
            spectrum: Spectrum {
                stable: eq.is_stable(),
                eigenvalues: eq.eigenvalues,
                classification: eq.classification,
            },
        })
        .collect();
    let full = match planar.first() {
        Some(high) => {
            let guess = full_guess_from_planar(&high.state, u, p);
            let (eq, iterations) =
                solve_full_equilibrium(u, p, &guess).map_err(|e| CliError::Numerical(e.to_string()))?;
            Some(FullEntry {
                relative_residual: full_relative_residual(&eq.state, u, p)?,
                state: eq.state,
                newton_iterations: iterations,
                spectrum: Spectrum {
                    stable: eq.is_stable(),
                    eigenvalues: eq.eigenvalues,
                    classification: eq.classification,
                },
            })
        }
        None => None,
    };
    let report = EquilibriaReport {
        status: if planar.is_empty() { "none" } else { "ok" },
        circuit: *p,
        input: *u,
        p_max: max_loadability(u.e_d, p),
        r_over_x: p.r_over_x(),
        planar_reduction_valid: p.planar_reduction_valid(),
        planar,
        full,
    };
    Ok(vec![Artifact::json("equilibria.json", &report)])
}

#[derive(Serialize)]
struct SimulateReport {
    model: ModelKind,
    outcome: Outcome,
    stop: Option<crate::odeint::StopReason>,
    t_final: f64,
    samples: usize,
    initial_state: Vec<f64>,
    final_state: Vec<f64>,
    target_state: Vec<f64>,
    events: Vec<ScheduledEvent>,
}

fn abc_csv<S: ModelState>(traj: &Trajectory<S>, omega: f64, dq: impl Fn(&S) -> (f64, f64, f64, f64)) -> String {
    let mut out = String::from("t,v_a,v_b,v_c,i_a,i_b,i_c\n");
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let (v_d, v_q, i_d, i_q) = dq(x);
        let v = dq_to_abc(v_d, v_q, *t, omega, 0.0);
        let i = dq_to_abc(i_d, i_q, *t, omega, 0.0);
        out.push_str(&[*t, v.a, v.b, v.c, i.a, i.b, i.c].map(fmt17).join(","));
        out.push('\n');
    }
    out
}

fn simulate_model<S: ModelState + Serialize>(
    cfg: &RunConfig,
    x0: S,
    target: S,
    events: &[ScheduledEvent],
    t_end: f64,
    dq: impl Fn(&S) -> (f64, f64, f64, f64),
) -> Result<Vec<Artifact>, CliError> {
    let mut traj = integrate(x0, cfg.input, &cfg.circuit, (0.0, t_end), events, &cfg.integrator)?;
    let outcome = classify_outcome(&traj, &target, cfg.cct.tol_ball_rel * target.norm(), cfg.cct.dwell);
    traj.outcome = outcome;
    let (t_final, x_final) = traj.last();
    let report = SimulateReport {
        model: cfg.simulate.model,
        outcome,
        stop: traj.stop,
        t_final,
        samples: traj.len(),
        initial_state: x0.components().to_vec(),
        final_state: x_final.components().to_vec(),
        target_state: target.components().to_vec(),
        events: events.to_vec(),
    };
    let mut out = vec![
        Artifact::text("trajectory.csv", traj.to_csv()),
        Artifact::json("outcome.json", &report),
    ];
    if cfg.simulate.abc {
        out.push(Artifact::text("abc.csv", abc_csv(&traj, cfg.circuit.omega, dq)));
    }
    Ok(out)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let (u, p) = (&cfg.input, &cfg.circuit);
    let sim = &cfg.simulate;
    let events = match (&cfg.scenario, sim.t_clear) {
        (Some(s), Some(t_clear)) if sim.events.is_empty() => {
            if s.base != *u {
                return Err(CliError::InvalidInput(
                    "scenario base differs from the run input".into(),
                ));
            }
            s.events(t_clear.min(sim.t_end)).to_vec()
        }
        (Some(_), Some(_)) => {
            return Err(CliError::InvalidInput(
                "give either events or a scenario, not both".into(),
            ))
        }
        _ => resolve_events(*u, &sim.events),
    };
    let start = operating_point(u, p)
        .ok_or_else(|| CliError::InvalidInput(format!("no equilibrium to start from at P = {} W", u.p_pev)))?;
    let u_last = events.last().map_or(*u, |e| e.new_input);
    let target = operating_point(&u_last, p).unwrap_or(start);
    match sim.model {
        ModelKind::Planar => simulate_model(cfg, start, target, &events, sim.t_end, |x: &PlanarState| {
            (x.v_d, 0.0, x.i_d, 0.0)
        }),
        ModelKind::Full => {
            let solve = |x: &PlanarState, u: &GridInput| {
                solve_full_equilibrium(u, p, &full_guess_from_planar(x, u, p))
                    .map(|(eq, _)| eq.state)
                    .map_err(|e| CliError::Numerical(e.to_string()))
            };
            let x0 = solve(&start, u)?;
            let target = if u_last == *u { x0 } else { solve(&target, &u_last)? };
            simulate_model(cfg, x0, target, &events, sim.t_end, |x: &FullState| {
                (x.v_d, x.v_q, x.i_d, x.i_q)
            })
        }
    }
}

#[derive(Serialize)]
struct HopfReport {
    p_hopf: f64,
    state: PlanarState,
    omega_hopf: f64,
    eigenvalues: Vec<Complex>,
    bracket: (f64, f64),
    p_max: f64,
}

pub fn cmd_bifurcate(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let (u, p, b) = (&cfg.input, &cfg.circuit, &cfg.bifurcation);
    let bracket = default_hopf_bracket(&u.with_power(u.p_pev.min(b.p_min.max(0.0))), p);
    let hopf = find_hopf(u.e_d, p, bracket, 1e-12)?;
    let p_max = b.p_max.unwrap_or(1.2 * hopf.p_hopf);
    let mut points = sweep_equilibria(u.e_d, p, (b.p_min, p_max), b.steps)?;
    if b.cycles {
        attach_cycle_amplitudes(&mut points, u.e_d, p, &cfg.roa.tracer);
    }
    let report = HopfReport {
        p_hopf: hopf.p_hopf,
        state: hopf.state,
        omega_hopf: hopf.omega_hopf,
        eigenvalues: hopf.eigenvalues,
        bracket,
        p_max: max_loadability(u.e_d, p),
    };
    Ok(vec![
        Artifact::text("branches.csv", branch_csv(&points)),
        Artifact::json("hopf.json", &report),
    ])
}

#[derive(Serialize)]
struct CheckSummary {
    seed: u64,
    interior: usize,
    exterior: usize,
    misclassified: usize,
    standoff: f64,
}

#[derive(Serialize)]
struct RoaJson {
    input: GridInput,
    center: PlanarState,
    area: f64,
    extents: crate::roa::Extents,
    amplitude_v_d: f64,
    amplitude_i_d: f64,
    period: f64,
    vertices: usize,
    closure_residual: f64,
    dynamics_check: Option<CheckSummary>,
}

pub fn cmd_roa(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let (u, p) = (&cfg.input, &cfg.circuit);
    let report = roa_report(u, p, &cfg.roa.tracer)?;
    let c = &report.curve;
    let mut out = vec![Artifact::text("roa_curve.csv", c.to_csv())];
    let check = if cfg.roa.check {
        let check = check_dynamics(c, u, p, &cfg.roa.dynamics, cfg.seed)?;
        let mut csv = String::from("V_d,I_d,interior,outcome,consistent\n");
        for s in &check.samples {
            csv.push_str(&format!(
                "{},{},{},{:?},{}\n",
                fmt17(s.state.v_d),
                fmt17(s.state.i_d),
                s.interior,
                s.outcome,
                s.consistent()
            ));
        }
        out.push(Artifact::text("roa_samples.csv", csv));
        let interior = check.samples.iter().filter(|s| s.interior).count();
        Some(CheckSummary {
            seed: check.seed,
            interior,
            exterior: check.samples.len() - interior,
            misclassified: check.misclassified,
            standoff: cfg.roa.dynamics.standoff,
        })
    } else {
        None
    };
    let (dv, di) = c.amplitude();
    out.push(Artifact::json(
        "roa_report.json",
        &RoaJson {
            input: *u,
            center: c.center,
            area: report.area,
            extents: report.extents,
            amplitude_v_d: dv,
            amplitude_i_d: di,
            period: c.period,
            vertices: c.vertices.len(),
            closure_residual: c.closure_residual,
            dynamics_check: check,
        },
    ));
    Ok(out)
}

#[derive(Serialize)]
struct CctEntry {
    method: CctMethod,
    t_cr: f64,
    fault_duration: f64,
    bracket: (f64, f64),
    verified: bool,
    probes: usize,
    witness_converged: String,
    witness_diverged: String,
}

#[derive(Serialize)]
struct Agreement {
    difference: f64,
    tolerance: f64,
    agree: bool,
}

#[derive(Serialize)]
struct CctReport {
    scenario: DisturbanceScenario,
    faulted_equilibrium: crate::scenario::FaultedEquilibrium,
    results: Vec<CctEntry>,
    agreement: Option<Agreement>,
}

pub fn cmd_cct(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let s = cfg
        .scenario
        .ok_or_else(|| CliError::InvalidInput("cct needs a scenario (config `scenario` or --scenario)".into()))?;
    let (p, cc) = (&cfg.circuit, cfg.cct_config());
    let bracket = cfg.cct.bracket.unwrap_or_else(|| default_bracket(&s, &cc));
    let run_b = || find_cct_bisection(&s, p, &cc, bracket, cc.tol_t);
    let run_r = || find_cct_roa(&s, p, &cc);
    let results: Vec<CctResult> = match cfg.cct.method {
        CctMethodArg::Bisection => vec![run_b()?],
        CctMethodArg::Roa => vec![run_r()?],
        CctMethodArg::Both => {
            let (b, r) = rayon::join(run_b, run_r);
            vec![b?, r?]
        }
    };
    let mut out = Vec::new();
    let mut entries = Vec::new();
    for r in &results {
        let tag = match r.method {
            CctMethod::Bisection => "bisection",
            CctMethod::RoaExit => "roa",
        };
        let (wc, wd) = (
            format!("witness_converged_{tag}.csv"),
            format!("witness_diverged_{tag}.csv"),
        );
        out.push(Artifact::text(&wc, r.witness_converged.to_csv()));
        out.push(Artifact::text(&wd, r.witness_diverged.to_csv()));
        entries.push(CctEntry {
            method: r.method,
            t_cr: r.t_cr,
            fault_duration: r.fault_duration(&s),
            bracket: r.bracket,
            verified: r.verified,
            probes: r.probes,
            witness_converged: wc,
            witness_diverged: wd,
        });
    }
    let agreement = (results.len() == 2).then(|| {
        let difference = (results[0].t_cr - results[1].t_cr).abs();
        let tolerance = f64::max(2.0 * cc.tol_t, 0.01 * results[0].fault_duration(&s));
        Agreement {
            difference,
            tolerance,
            agree: difference <= tolerance,
        }
    });
    out.push(Artifact::json(
        "cct.json",
        &CctReport {
            scenario: s,
            faulted_equilibrium: faulted_equilibrium(&s, p),
            results: entries,
            agreement,
        },
    ));
    Ok(out)
}

pub fn cmd_pv_curve(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let (u, p) = (&cfg.input, &cfg.circuit);
    let limit = max_loadability(u.e_d, p);
    let top = cfg.pv_curve.p_max.unwrap_or(limit);
    if !(top > 0.0) {
        return Err(CliError::InvalidInput("pv_curve.p_max must be > 0".into()));
    }
    let n = cfg.pv_curve.points;
    let grid: Vec<f64> = (0..n).map(|k| top * k as f64 / (n - 1) as f64).collect();
    let mut csv = String::from("P,V_high,V_low\n");
    for pt in pv_curve(u.e_d, p, &grid) {
        csv.push_str(&format!("{},{},{}\n", fmt17(pt.p), opt17(pt.v_high), opt17(pt.v_low)));
    }
    Ok(vec![Artifact::text("pv_curve.csv", csv)])
}

/// Loads the configuration, applies flag overrides and validates it.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    cfg.apply(&cli.common);
    match &cli.command {
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            s.t_end = a.t_end.unwrap_or(s.t_end);
            s.t_clear = a.t_clear.or(s.t_clear);
            s.model = a.model.unwrap_or(s.model);
            s.abc |= a.abc;
            if let Some(path) = &a.events {
                s.events = read_json(path)?;
            }
            if let Some(path) = &a.scenario {
                cfg.scenario = Some(read_json(path)?);
            }
        }
        Command::Bifurcate(a) => {
            let b = &mut cfg.bifurcation;
            b.p_min = a.p_min.unwrap_or(b.p_min);
            b.p_max = a.p_max.or(b.p_max);
            b.steps = a.steps.unwrap_or(b.steps);
            b.cycles &= !a.no_cycles;
        }
        Command::Roa(a) => cfg.roa.check &= !a.no_check,
        Command::Cct(a) => {
            if let Some(path) = &a.scenario {
                cfg.scenario = Some(read_json(path)?);
            }
            let c = &mut cfg.cct;
            c.method = a.method.unwrap_or(c.method);
            c.tol_t = a.tol.unwrap_or(c.tol_t);
            match (a.t_lo, a.t_hi, c.bracket) {
                (Some(lo), Some(hi), _) => c.bracket = Some((lo, hi)),
                (None, None, _) => {}
                (lo, hi, existing) => {
                    let d = existing.unwrap_or_else(|| {
                        cfg.scenario
                            .map(|s| (s.t_start + 1e-4, s.t_start + c.horizon))
                            .unwrap_or((0.0, 0.0))
                    });
                    c.bracket = Some((lo.unwrap_or(d.0), hi.unwrap_or(d.1)));
                }
            }
        }
        Command::PvCurve(a) => {
            let v = &mut cfg.pv_curve;
            v.points = a.points.unwrap_or(v.points);
            v.p_max = a.p_max.or(v.p_max);
        }
        Command::Equilibria => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the subcommand and returns its artifacts without touching disk.
pub fn execute(cli: &Cli) -> Result<(RunConfig, Vec<Artifact>), CliError> {
    let cfg = resolve_config(cli)?;
    let artifacts = match &cli.command {
        Command::Equilibria => cmd_equilibria(&cfg),
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Bifurcate(_) => cmd_bifurcate(&cfg),
        Command::Roa(_) => cmd_roa(&cfg),
        Command::Cct(_) => cmd_cct(&cfg),
        Command::PvCurve(_) => cmd_pv_curve(&cfg),
    }?;
    Ok((cfg, artifacts))
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&cli).and_then(|(cfg, artifacts)| {
        write_artifacts(&cfg.output_dir, &artifacts)?;
        Ok((cfg, artifacts))
    });
    match result {
        Ok((cfg, artifacts)) => {
            for a in &artifacts {
                println!("{}", cfg.output_dir.join(&a.name).display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("pev-stability").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_match_paper() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.circuit, CircuitParams::paper_defaults());
        assert_eq!(cfg.input, GridInput::paper_defaults());
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"circuit":{"R":1,"L":1,"C_eq":1,"X":2}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed":1}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"seed": 5, "output_dir": "a", "input": {"E_d": 392.125, "P_pev": 1000}}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cli = parse(&["equilibria", "--config", p, "--seed", "9", "--p-pev", "2000"]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.input.p_pev), (9, 2000.0));
        assert_eq!(cfg.output_dir, PathBuf::from("a"));
    }

    #[test]
    fn invalid_config_is_exit_2() {
        let cli = parse(&["equilibria", "--p-pev", "-5"]);
        assert_eq!(execute(&cli).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn over_limit_reports_none() {
        let cli = parse(&["equilibria", "--p-pev", "1e8"]);
        let (_, a) = execute(&cli).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&a[0].contents).unwrap();
        assert_eq!(v["status"], "none");
        assert_eq!(v["planar"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn json_uses_17_digits() {
        let s = to_json(&serde_json::json!({"x": 0.1, "n": 3}));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn event_specs_carry_forward() {
        let u = GridInput::paper_defaults();
        let specs: Vec<EventSpec> = serde_json::from_str(r#"[{"t":0.01,"P_pev":30000},{"t":0.02,"E_d":380}]"#).unwrap();
        let ev = resolve_events(u, &specs);
        assert_eq!(ev[1].new_input, GridInput::new(380.0, 30000.0));
    }
}
