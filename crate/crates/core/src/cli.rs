//! Scenario configs, dotted overrides and the batch runner behind the binary.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::experiments::blowup::{build_theta_lambda, run_blowup_experiment, BlowupRunConfig, LOG16};
use crate::experiments::cut_paste::{run_cut_paste_experiment, Bump, CutPasteConfig};
use crate::fbsde::{check_decoupling, encode_values, isometry_check, martingale_check, mean_se, simulate_paths, EnsembleConfig, SnapshotField, SqrtField};
use crate::initial::{Family, InitialCondition, CATALOG};
use crate::io::{content_hash, diagnostics_csv, snapshots_csv, table_csv, to_json, Artifacts};
use crate::solver::{solve, SolveResult, SolverConfig, Status};
use crate::transform::{default_y_range, v_to_u, Geometry, Grid, Transform};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Default output root when the config names no directory.
pub const OUTPUT_ROOT_ENV: &str = "ROOTLIP_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Solve,
    Blowup,
    CutPaste,
    Fbsde,
    ConvergenceStudy,
}

impl ScenarioKind {
    pub const ALL: [(ScenarioKind, &'static str, &'static str); 5] = [
        (ScenarioKind::Solve, "solve", "integrate one initial condition; check sandwich, zero set, root-Lipschitz bound, closed form"),
        (ScenarioKind::Blowup, "blowup", "quadratic plus bump on the half-line; measured T* against 8/(kappa e^b) and 1/(2 kappa)"),
        (ScenarioKind::CutPaste, "cut_paste", "two bumps with disjoint supports versus the two isolated solutions"),
        (ScenarioKind::Fbsde, "fbsde", "Monte Carlo forward paths driven by sqrt(u); decoupling, martingale and isometry checks"),
        (ScenarioKind::ConvergenceStudy, "convergence_study", "repeat a solve under grid refinement and report observed orders"),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|e| e.0 == self).map(|e| e.1).unwrap_or("?")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    #[serde(alias = "bounded_interval")]
    Interval,
    #[serde(alias = "whole_line")]
    Line,
    #[serde(alias = "half-line")]
    HalfLine,
}

/// Flat form of a domain case as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    #[serde(default = "d_case_name")]
    pub kind: CaseName,
    /// Growth exponent for the line and half-line (default 2).
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Interval length (default 1).
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(rename = "K", default = "one")]
    pub k: f64,
}

fn one() -> f64 {
    1.0
}
fn d_case_name() -> CaseName {
    CaseName::Line
}

impl Default for CaseSpec {
    fn default() -> Self {
        CaseSpec { kind: CaseName::Line, gamma: None, length: None, kappa: 1.0, k: 1.0 }
    }
}

impl CaseSpec {
    pub fn to_case(&self) -> Result<DomainCase> {
        let kind = match self.kind {
            CaseName::Interval => {
                if self.gamma.is_some() {
                    return Err(Error::InvalidConfig("gamma does not apply to the interval case".into()));
                }
                CaseKind::BoundedInterval { length: self.length.unwrap_or(1.0) }
            }
            CaseName::Line | CaseName::HalfLine => {
                if self.length.is_some() {
                    return Err(Error::InvalidConfig("length applies only to the interval case".into()));
                }
                let gamma = self.gamma.unwrap_or(2.0);
                if self.kind == CaseName::Line {
                    CaseKind::WholeLine { gamma }
                } else {
                    CaseKind::HalfLine { gamma }
                }
            }
        };
        DomainCase::new(kind, self.kappa, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSection {
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_target_b")]
    pub target_b: f64,
    /// Also run θ ≡ 0 and require that it does not blow up.
    #[serde(default = "yes")]
    pub control: bool,
    #[serde(default)]
    pub run: BlowupRunConfig,
}

fn d_lambda() -> f64 {
    0.1
}
fn d_target_b() -> f64 {
    LOG16
}
fn yes() -> bool {
    true
}

impl Default for BlowupSection {
    fn default() -> Self {
        BlowupSection { lambda: d_lambda(), target_b: d_target_b(), control: true, run: BlowupRunConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutPasteSection {
    #[serde(default = "d_left")]
    pub left: Bump,
    #[serde(default = "d_right")]
    pub right: Bump,
    #[serde(default)]
    pub config: CutPasteConfig,
    /// Relative discrepancy allowed between the union and the sum.
    #[serde(default = "d_cp_tol")]
    pub tolerance: f64,
    /// Repeat at half the spacings and require the discrepancy to shrink.
    #[serde(default)]
    pub refine: bool,
}

fn d_left() -> Bump {
    Bump { a: 0.0, b: 1.0, amp: 1.0 }
}
fn d_right() -> Bump {
    Bump { a: 1.5, b: 2.5, amp: 1.0 }
}
fn d_cp_tol() -> f64 {
    1e-4
}

impl Default for CutPasteSection {
    fn default() -> Self {
        CutPasteSection { left: d_left(), right: d_right(), config: CutPasteConfig::default(), tolerance: d_cp_tol(), refine: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbsdeSection {
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(rename = "T", default = "d_horizon")]
    pub t_horizon: f64,
    #[serde(default = "d_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub dt_sde: Option<f64>,
    /// Intermediate times for the martingale check.
    #[serde(default = "d_checks")]
    pub n_checks: usize,
    #[serde(default = "d_bins")]
    pub x_bins: usize,
    /// Snapshots of the PDE solve used to interpolate √u.
    #[serde(default = "d_field_snaps")]
    pub field_snapshots: usize,
    /// Grid spacing of that solve; the field bias must stay well under the
    /// Monte Carlo standard error.
    #[serde(default = "d_field_dy")]
    pub field_dy: f64,
    /// Write the terminal values as a length-prefixed little-endian dump.
    #[serde(default)]
    pub dump_terminal: bool,
}

fn d_horizon() -> f64 {
    0.5
}
fn d_paths() -> usize {
    100_000
}
fn d_checks() -> usize {
    5
}
fn d_bins() -> usize {
    8
}
fn d_field_snaps() -> usize {
    50
}
fn d_field_dy() -> f64 {
    0.02
}

impl Default for FbsdeSection {
    fn default() -> Self {
        FbsdeSection {
            x0: 1.0,
            t_horizon: d_horizon(),
            n_paths: d_paths(),
            dt_sde: None,
            n_checks: d_checks(),
            x_bins: d_bins(),
            field_snapshots: d_field_snaps(),
            field_dy: d_field_dy(),
            dump_terminal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(default = "d_levels")]
    pub levels: usize,
    /// Minimum observed order between successive levels.
    #[serde(default = "d_min_order")]
    pub min_order: f64,
}

fn d_levels() -> usize {
    3
}
fn d_min_order() -> f64 {
    1.5
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection { levels: d_levels(), min_order: d_min_order() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Schema version; must be 1.
    pub spec: u32,
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub case: CaseSpec,
    /// Initial condition; defaults to the canonical family of the case.
    #[serde(default)]
    pub u0: Option<Family>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub y_range: Option<(f64, f64)>,
    /// Solve data that fails certification.
    #[serde(default)]
    pub override_certificate: bool,
    #[serde(default)]
    pub blowup: BlowupSection,
    #[serde(default)]
    pub cut_paste: CutPasteSection,
    #[serde(default)]
    pub fbsde: FbsdeSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        ScenarioConfig {
            spec: 1,
            scenario,
            case: CaseSpec::default(),
            u0: None,
            solver: SolverConfig::default(),
            y_range: None,
            override_certificate: false,
            blowup: BlowupSection::default(),
            cut_paste: CutPasteSection::default(),
            fbsde: FbsdeSection::default(),
            convergence: ConvergenceSection::default(),
            output: None,
            seed: 0,
        }
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_value(v).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    /// Everything that can be rejected without running anything.
    pub fn check(&self) -> Result<()> {
        if self.spec != 1 {
            return Err(Error::InvalidConfig(format!("unsupported spec version {}", self.spec)));
        }
        let case = self.case.to_case()?;
        self.solver.validate()?;
        if let Some((a, b)) = self.y_range {
            if !(a < b) {
                return Err(Error::InvalidRange { y_min: a, y_max: b });
            }
        }
        match self.scenario {
            ScenarioKind::Solve | ScenarioKind::ConvergenceStudy | ScenarioKind::Fbsde => {
                self.family(&case)?;
            }
            ScenarioKind::Blowup => {
                if !(self.blowup.lambda > 0.0 && self.blowup.lambda <= 0.5) {
                    return Err(Error::InvalidConfig(format!("lambda must be in (0, 1/2], got {}", self.blowup.lambda)));
                }
                if !(case.kappa > 0.0) {
                    return Err(Error::InvalidConfig("kappa must be positive".into()));
                }
            }
            ScenarioKind::CutPaste => {}
        }
        if self.scenario == ScenarioKind::ConvergenceStudy && !(2..=6).contains(&self.convergence.levels) {
            return Err(Error::InvalidConfig("convergence.levels must be in 2..=6".into()));
        }
        if self.scenario == ScenarioKind::Fbsde {
            let f = &self.fbsde;
            if !(f.t_horizon > 0.0 && f.field_dy > 0.0) || f.n_paths < 2 || f.n_checks == 0 || f.x_bins == 0 || f.field_snapshots < 2 {
                return Err(Error::InvalidConfig(format!("bad fbsde section {f:?}")));
            }
        }
        Ok(())
    }

    pub fn family(&self, case: &DomainCase) -> Result<Family> {
        match &self.u0 {
            Some(f) => Ok(f.clone()),
            None => {
                let name = match case.kind {
                    CaseKind::BoundedInterval { .. } => "bump_on_interval",
                    CaseKind::WholeLine { gamma } if gamma == 2.0 => "quadratic_plus_one",
                    CaseKind::HalfLine { gamma } if gamma == 2.0 => "quadratic",
                    _ => "power_law",
                };
                Ok(Family::default_for(name, case).expect("catalog family"))
            }
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.output {
            Some(p) => p.clone(),
            None => {
                let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("rootlip-runs"));
                root.join(self.scenario.name())
            }
        }
    }
}

fn alias(key: &str) -> String {
    match key {
        "case" => "case.kind".into(),
        "gamma" => "case.gamma".into(),
        "kappa" => "case.kappa".into(),
        "K" => "case.K".into(),
        "length" => "case.length".into(),
        "t-end" | "t_end" => "solver.t_end".into(),
        "dy" => "solver.dy".into(),
        "lambda" => "blowup.lambda".into(),
        "out" => "output".into(),
        other => other.replace('-', "_"),
    }
}

fn parse_scalar(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("bad override key {path:?}")));
    }
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        if !cur.is_object() {
            *cur = json!({});
        }
        let obj = cur.as_object_mut().expect("object");
        let next = obj.entry(p.to_string()).or_insert(Value::Null);
        if next.is_null() {
            *next = json!({});
        }
        cur = next;
    }
    match cur {
        Value::Object(m) => {
            m.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        _ => Err(Error::InvalidConfig(format!("override {path:?} descends into a non-object"))),
    }
}

/// Split `run` arguments into an optional config path and `(key, value)`
/// overrides. Accepts `--key value` and `--key=value`.
pub fn parse_overrides(args: &[String]) -> Result<(Option<PathBuf>, Vec<(String, String)>)> {
    let mut config = None;
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let key = a.strip_prefix("--").ok_or_else(|| Error::InvalidConfig(format!("expected --key, got {a:?}")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                i += 1;
                let v = args.get(i).ok_or_else(|| Error::InvalidConfig(format!("--{key} needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        i += 1;
        if key == "config" {
            config = Some(PathBuf::from(value));
        } else {
            out.push((key, value));
        }
    }
    Ok((config, out))
}

/// Resolve a config from an optional file plus overrides. A bare `--u0
/// <name>` replaces the whole initial-condition object.
pub fn resolve_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<ScenarioConfig> {
    let mut v = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
        }
        None => json!({ "spec": 1 }),
    };
    if !v.is_object() {
        return Err(Error::InvalidConfig("config must be a JSON object".into()));
    }
    if file.is_none() && !overrides.iter().any(|(k, _)| k == "scenario") {
        v["scenario"] = json!("solve");
    }
    for (k, raw) in overrides {
        let path = alias(k);
        let value = parse_scalar(raw);
        if path == "u0" {
            if let Value::String(name) = &value {
                v["u0"] = json!({ "family": name });
                continue;
            }
        }
        set_path(&mut v, &path, value)?;
    }
    ScenarioConfig::from_value(v)
}

/// Scenario kinds and initial-condition families with their admissible
/// ranges.
pub fn list_scenarios() -> String {
    let mut s = String::from("scenarios:\n");
    for (_, name, about) in ScenarioKind::ALL {
        s.push_str(&format!("  {name:<18} {about}\n"));
    }
    s.push_str("\ninitial-condition families (--u0 <name>):\n");
    for e in CATALOG {
        s.push_str(&format!("  {:<20} {}\n  {:<20} admissible: {}\n", e.name, e.formula, "", e.admissible));
    }
    s
}

/// Case flags under which a catalog family is admissible.
pub fn family_example_case(name: &str) -> &'static [&'static str] {
    match name {
        "quadratic_plus_one" => &["--case", "line", "--gamma", "2"],
        "power_law" => &["--case", "line", "--gamma", "1", "--solver.bc_mode", "frozen_dirichlet"],
        "bump_on_interval" => &["--case", "interval", "--length", "1", "--K", "4"],
        "quadratic_far_bump" => &["--case", "half_line", "--gamma", "2", "--kappa", "1.05"],
        _ => &["--case", "half_line", "--gamma", "2"],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Assertion { name: name.into(), pass, detail: detail.into() }
    }
}

/// Outcome of one scenario before anything is written.
#[derive(Debug)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub assertions: Vec<Assertion>,
    pub solver_failed: Option<String>,
    pub results: Value,
    pub artifacts: Artifacts,
    pub manifest_extra: Value,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.solver_failed.is_some() {
            EXIT_SOLVER
        } else if self.assertions.iter().any(|a| !a.pass) {
            EXIT_ASSERTION
        } else {
            EXIT_OK
        }
    }

    pub fn first_failure(&self) -> Option<&Assertion> {
        self.assertions.iter().find(|a| !a.pass)
    }
}

/// Map an error to its exit code.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::StepFailure { .. } | Error::Overflow(_) | Error::PastBlowup { .. } | Error::Unachievable(_) | Error::Horizon { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

struct Prepared {
    u0: InitialCondition,
    tr: Transform,
    family: Family,
}

fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    let mut case = cfg.case.to_case()?;
    let family = cfg.family(&case)?;
    let y_range = cfg.y_range.unwrap_or_else(|| default_y_range(&case));
    let u0 = match &family {
        Family::QuadraticPlusBump { lambda } => {
            if case.kind != (CaseKind::HalfLine { gamma: 2.0 }) {
                return Err(Error::WrongCase("quadratic_plus_bump needs the half_line case with gamma = 2"));
            }
            let c = build_theta_lambda(case.kappa, *lambda, LOG16)?;
            let u0 = c.initial_condition();
            // certified with κ' = sup u0/x² over the grid image
            let tr = Transform::new(case, y_range)?;
            let geo = Geometry::new(&tr, Grid::new(y_range.0, y_range.1, cfg.solver.dy)?);
            let sup = geo.x.iter().filter(|&&x| x > 0.0).map(|&x| u0.eval(x) / (x * x)).fold(case.kappa, f64::max);
            case.kappa = sup * (1.0 + 1e-9);
            u0
        }
        f => f.build(&case)?,
    };
    let u0 = if cfg.override_certificate { u0.with_override() } else { u0 };
    let tr = Transform::new(case, y_range)?;
    Ok(Prepared { u0, tr, family })
}

/// Closed-form solution for the quadratic families, if one applies.
pub fn closed_form(family: &Family, case: &DomainCase) -> Option<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
    match (family, case.kind) {
        (Family::QuadraticPlusOne, CaseKind::WholeLine { gamma }) if gamma == 2.0 => Some(Box::new(|t, x| (x * x + 1.0) / (1.0 - t))),
        (Family::Quadratic { c }, CaseKind::HalfLine { gamma }) if gamma == 2.0 => {
            let c = *c;
            Some(Box::new(move |t, x| if x > 0.0 { c * x * x / (1.0 - c * t) } else { 0.0 }))
        }
        _ => None,
    }
}

fn status_failure(s: &Status) -> Option<String> {
    match s {
        Status::StepFailure { t, reason } => Some(format!("step failure at t = {t}: {reason}")),
        _ => None,
    }
}

/// Invariant checks on one solve.
pub fn solve_assertions(res: &SolveResult, family: &Family, u0_scale: f64) -> Result<Vec<Assertion>> {
    let dy = res.geometry.grid.dy;
    let mut out = Vec::new();
    let mut worst: Option<(f64, usize)> = None;
    for f in &res.trajectory {
        for (i, &v) in f.v.iter().enumerate() {
            if !(v >= 0.0) && worst.is_none_or(|(w, _)| v < w) {
                worst = Some((v, i));
            }
        }
    }
    out.push(match worst {
        None => Assertion::new("nonnegativity", true, format!("min v >= 0; clamp_max = {:e}", res.clamp_max)),
        Some((v, i)) => Assertion::new("nonnegativity", false, format!("v = {v:e} at node {i}")),
    });
    let mut lip_fail = None;
    let mut margin_fail = None;
    let mut zero_fail = None;
    let mut min_margin = f64::INFINITY;
    // data sitting on a barrier (the quadratic families) touch it up to
    // discretization error
    let margin_tol = 1e-6 + dy * dy;
    for d in &res.diagnostics {
        let slack = d.root_lip_slack(dy);
        if slack.is_finite() && slack < 0.0 && lip_fail.is_none() {
            lip_fail = Some(format!("t = {}: lip^2 = {:e} exceeds d2_sup = {:e} by {:e}", d.t, d.lip_sqrt * d.lip_sqrt, d.d2_sup, -slack));
        }
        if d.barrier_margin_rel.is_finite() {
            min_margin = min_margin.min(d.barrier_margin_rel);
            if d.barrier_margin_rel < -margin_tol && margin_fail.is_none() {
                margin_fail = Some(format!("t = {}: relative barrier margin {:e}", d.t, d.barrier_margin_rel));
            }
        }
        if d.zero_residual > 1e-8 * u0_scale && zero_fail.is_none() {
            zero_fail = Some(format!("t = {}: zero residual {:e}", d.t, d.zero_residual));
        }
    }
    out.push(Assertion::new("root_lipschitz", lip_fail.is_none(), lip_fail.unwrap_or_else(|| "lip^2 <= d2_sup + 10 dy scale at every snapshot".into())));
    if min_margin.is_finite() {
        out.push(Assertion::new("sandwich", margin_fail.is_none(), margin_fail.unwrap_or_else(|| format!("min relative margin {min_margin:e}"))));
    }
    if res.case.has_left_boundary() {
        out.push(Assertion::new("zero_set", zero_fail.is_none(), zero_fail.unwrap_or_else(|| "boundary zeros kept".into())));
    }
    if let (Some(exact), true) = (closed_form(family, &res.case), res.is_completed()) {
        let f = res.final_field();
        let (lo, hi) = *res.trust.last().expect("trust");
        let u = v_to_u(f, &res.geometry);
        let mut worst = (0.0, 0usize);
        for i in lo..=hi {
            let e = exact(f.t, res.geometry.x[i]);
            if e > 0.0 {
                let r = (u[i] - e).abs() / e;
                if r > worst.0 {
                    worst = (r, i);
                }
            }
        }
        let tol = 5.0 * dy * dy + 1e-6;
        out.push(Assertion::new(
            "closed_form",
            worst.0 <= tol,
            format!("t = {}: max relative error {:e} at x = {} (tolerance {tol:e})", f.t, worst.0, res.geometry.x[worst.1]),
        ));
    }
    Ok(out)
}

fn solve_artifacts(res: &SolveResult, art: &mut Artifacts) -> Result<()> {
    art.add("snapshots.csv", snapshots_csv(res)?);
    art.add("diagnostics.csv", diagnostics_csv(&res.diagnostics));
    Ok(())
}

fn grid_json(res: &SolveResult) -> Value {
    let g = res.geometry.grid;
    json!({ "y_min": g.y_min, "y_max": g.y_max(), "dy": g.dy, "n": g.n })
}

/// Build the case, initial data and transform from `cfg` and integrate.
pub fn solve_config(cfg: &ScenarioConfig) -> Result<SolveResult> {
    let p = prepare(cfg)?;
    solve(&p.u0, &p.tr, &cfg.solver)
}

fn run_solve(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let p = prepare(cfg)?;
    let res = solve(&p.u0, &p.tr, &cfg.solver)?;
    let scale = p.u0.sample(&res.geometry.x).iter().cloned().fold(0.0, f64::max);
    let assertions = solve_assertions(&res, &p.family, scale.max(1.0))?;
    let mut artifacts = Artifacts::default();
    solve_artifacts(&res, &mut artifacts)?;
    let results = json!({
        "status": res.status,
        "steps": res.steps,
        "clamp_max": res.clamp_max,
        "case": res.case,
        "final": res.diagnostics.last(),
        "trust": res.trust.last(),
    });
    let extra = json!({ "grid": grid_json(&res), "barriers": res.barriers, "y_range": (p.tr.y_min, p.tr.y_max) });
    Ok(RunOutcome {
        config: cfg.clone(),
        assertions,
        solver_failed: status_failure(&res.status),
        results,
        artifacts,
        manifest_extra: extra,
    })
}

fn run_blowup(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let kappa = cfg.case.kappa;
    let b = &cfg.blowup;
    let c = build_theta_lambda(kappa, b.lambda, b.target_b)?;
    let rep = run_blowup_experiment(kappa, Some(&c), &b.run)?;
    let mut assertions = Vec::new();
    let half = 0.5 / kappa;
    match rep.measured_t_star {
        Some(t) => {
            assertions.push(Assertion::new("blowup_before_half_inverse_kappa", t < half, format!("measured T* = {t} vs 1/(2 kappa) = {half}")));
            assertions.push(Assertion::new(
                "blowup_within_bound",
                t <= rep.predicted_bound + rep.detection_slack,
                format!("measured T* = {t}, bound 8/(kappa e^b) = {}, slack {:e}", rep.predicted_bound, rep.detection_slack),
            ));
            assertions.push(Assertion::new("detection_slack", rep.detection_slack < 0.1 / kappa, format!("ladder spread {:e}", rep.detection_slack)));
        }
        None => assertions.push(Assertion::new("blowup_detected", false, format!("no blow-up detected up to t = {}", b.run.t_end_frac / kappa))),
    }
    assertions.push(Assertion::new("j_inequality", rep.j_inequality_min_slack >= -1e-6, format!("min slack {:e}", rep.j_inequality_min_slack)));
    assertions.push(Assertion::new("exp_moment", rep.exp_moment_violation <= 1e-6, format!("violation {:e}", rep.exp_moment_violation)));
    let control = if b.control {
        let ctl = run_blowup_experiment(kappa, None, &b.run)?;
        assertions.push(Assertion::new("control_no_blowup", !ctl.blew_up(), format!("control status {:?}", ctl.status)));
        Some(json!({ "status": ctl.status, "q_track_error": ctl.q_track_error, "steps": ctl.steps }))
    } else {
        None
    };
    let mut artifacts = Artifacts::default();
    artifacts.add(
        "series.csv",
        table_csv("t,a_num,J,J_lower,Q", rep.series.iter().map(|s| vec![s.t, s.a_num, s.j, s.j_lower, s.q])),
    );
    let results = json!({
        "construction": rep.construction,
        "status": rep.status,
        "ladder": rep.ladder,
        "measured_T_star": rep.measured_t_star,
        "detection_slack": rep.detection_slack,
        "predicted_bound": rep.predicted_bound,
        "half_inverse_kappa": half,
        "inverse_kappa": rep.inverse_kappa,
        "j_inequality_min_slack": rep.j_inequality_min_slack,
        "exp_moment_violation": rep.exp_moment_violation,
        "a_rel_error": rep.a_rel_error,
        "steps": rep.steps,
        "control": control,
    });
    let failed = status_failure(&rep.status);
    Ok(RunOutcome { config: cfg.clone(), assertions, solver_failed: failed, results, artifacts, manifest_extra: json!({}) })
}

fn run_cut_paste(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let s = &cfg.cut_paste;
    let rep = run_cut_paste_experiment(s.left, s.right, &s.config)?;
    let mut assertions = vec![
        Assertion::new("locality", rep.discrepancy <= s.tolerance, format!("relative discrepancy {:e} (tolerance {:e})", rep.discrepancy, s.tolerance)),
        Assertion::new("gap_stays_zero", rep.gap_max <= 1e-8 * rep.scale, format!("max u in the gap {:e}", rep.gap_max)),
    ];
    let mut rows = vec![vec![s.config.dx, s.config.dy, rep.discrepancy]];
    let mut fine = None;
    if s.refine {
        let c2 = CutPasteConfig { dx: s.config.dx / 2.0, dy: s.config.dy / 2.0, ..s.config.clone() };
        let r2 = run_cut_paste_experiment(s.left, s.right, &c2)?;
        assertions.push(Assertion::new(
            "locality_refines",
            r2.discrepancy < rep.discrepancy,
            format!("discrepancy {:e} -> {:e} under halving", rep.discrepancy, r2.discrepancy),
        ));
        rows.push(vec![c2.dx, c2.dy, r2.discrepancy]);
        fine = Some(r2);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("diagnostics.csv", table_csv("dx,dy,discrepancy", rows));
    let results = json!({ "report": rep, "refined": fine });
    Ok(RunOutcome { config: cfg.clone(), assertions, solver_failed: None, results, artifacts, manifest_extra: json!({}) })
}

fn run_fbsde(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let f = &cfg.fbsde;
    let p = prepare(cfg)?;
    let scfg = SolverConfig {
        dy: f.field_dy,
        dt_initial: cfg.solver.dt_initial.min(f.field_dy * f.field_dy),
        t_end: f.t_horizon,
        n_snapshots: f.field_snapshots.max(cfg.solver.n_snapshots), ..cfg.solver.clone() };
    let res = solve(&p.u0, &p.tr, &scfg)?;
    if let Some(msg) = status_failure(&res.status) {
        return Ok(RunOutcome {
            config: cfg.clone(),
            assertions: Vec::new(),
            solver_failed: Some(msg),
            results: json!({ "status": res.status }),
            artifacts: Artifacts::default(),
            manifest_extra: json!({}),
        });
    }
    let field = SnapshotField::from_result(&res)?;
    let record_times: Vec<f64> = (1..=f.n_checks).map(|k| f.t_horizon * k as f64 / (f.n_checks + 1) as f64).collect();
    let ecfg = EnsembleConfig {
        x0: f.x0,
        t_horizon: f.t_horizon,
        n_paths: f.n_paths,
        dt_sde: f.dt_sde,
        seed: cfg.seed,
        record_times: record_times.clone(),
    };
    let e = simulate_paths(&field, &ecfg)?;
    let reference = field.u(f.t_horizon, f.x0).ok_or_else(|| Error::InvalidInput(format!("x0 = {} is outside the trusted region", f.x0)))?;
    let ok: Vec<f64> = e.terminal_values.iter().cloned().filter(|v| v.is_finite()).collect();
    let (mean, se) = mean_se(&ok);
    let z = (mean - reference) / se;
    let mart = martingale_check(&e, &field);
    let (iso_mean, iso_se, iso_z) = isometry_check(&e);
    let dec = check_decoupling(&e, &field, f.n_checks / 2, f.x_bins)?;
    let mart_worst = mart.iter().fold(0.0f64, |m, p| m.max(p.standardized.abs()));
    let mut assertions = vec![
        Assertion::new("ensemble_valid", e.is_valid(), format!("exit fraction {:e}", e.exit_fraction)),
        Assertion::new("decoupling_mean", z.abs() <= 3.0, format!("mean {mean} vs u(T, x0) = {reference}, SE {se:e}, z = {z:.3}")),
        Assertion::new("martingale", mart_worst <= 3.0, format!("max |z| = {mart_worst:.3} over {} times", mart.len())),
        Assertion::new("isometry", iso_z.abs() <= 3.0, format!("difference {iso_mean:e}, SE {iso_se:e}, z = {iso_z:.3}")),
    ];
    if !dec.inconclusive {
        assertions.push(Assertion::new(
            "conditional_decoupling",
            dec.max_standardized <= 4.0,
            format!("t = {}: max standardized bin residual {:.3}", dec.t_check, dec.max_standardized),
        ));
    }
    let mut artifacts = Artifacts::default();
    solve_artifacts(&res, &mut artifacts)?;
    artifacts.add(
        "martingale.csv",
        table_csv("t,mean,se,standardized", mart.iter().map(|p| vec![p.t, p.mean, p.se, p.standardized])),
    );
    if f.dump_terminal {
        artifacts.add("terminal_values.bin", encode_values(&e.terminal_values));
    }
    let results = json!({
        "mc_mean": mean,
        "mc_se": se,
        "reference": reference,
        "z": z,
        "exit_fraction": e.exit_fraction,
        "dt_sde": e.dt_sde,
        "martingale": mart,
        "isometry": { "difference": iso_mean, "se": iso_se, "z": iso_z },
        "decoupling": dec,
        "terminal_hash": content_hash(&encode_values(&e.terminal_values)),
    });
    let extra = json!({ "grid": grid_json(&res), "barriers": res.barriers });
    Ok(RunOutcome { config: cfg.clone(), assertions, solver_failed: None, results, artifacts, manifest_extra: extra })
}

fn run_convergence(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let p = prepare(cfg)?;
    let exact = closed_form(&p.family, &p.tr.case);
    let mut levels = Vec::new();
    for k in 0..cfg.convergence.levels {
        let f = 0.5f64.powi(k as i32);
        let s = SolverConfig { dy: cfg.solver.dy * f, dt_initial: cfg.solver.dt_initial * f * f, ..cfg.solver.clone() };
        let res = solve(&p.u0, &p.tr, &s)?;
        if let Some(msg) = status_failure(&res.status) {
            return Ok(RunOutcome {
                config: cfg.clone(),
                assertions: Vec::new(),
                solver_failed: Some(msg),
                results: json!({ "level": k }),
                artifacts: Artifacts::default(),
                manifest_extra: json!({}),
            });
        }
        levels.push(res);
    }
    // compare on the coarse nodes trusted at every level
    let coarse = &levels[0];
    let (mut lo, mut hi) = *coarse.trust.last().expect("trust");
    for (k, r) in levels.iter().enumerate() {
        let m = 1usize << k;
        if (r.geometry.grid.n - 1) != (coarse.geometry.grid.n - 1) * m {
            return Err(Error::InvalidConfig("y-range is not a whole number of coarse cells".into()));
        }
        let (l, h) = *r.trust.last().expect("trust");
        lo = lo.max(l.div_ceil(m));
        hi = hi.min(h / m);
    }
    if hi <= lo {
        return Err(Error::InvalidConfig("no node is trusted at every level".into()));
    }
    let t_end = coarse.final_field().t;
    let us: Vec<Vec<f64>> = levels
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let u = v_to_u(r.final_field(), &r.geometry);
            (lo..=hi).map(|i| u[i << k]).collect()
        })
        .collect();
    let xs: Vec<f64> = (lo..=hi).map(|i| coarse.geometry.x[i]).collect();
    let rel = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs() / q.abs().max(1e-300)).fold(0.0, f64::max);
    let errors: Vec<f64> = match &exact {
        Some(e) => {
            let ex: Vec<f64> = xs.iter().map(|&x| e(t_end, x)).collect();
            us.iter().map(|u| rel(u, &ex)).collect()
        }
        None => us.windows(2).map(|w| rel(&w[0], &w[1])).collect(),
    };
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let assertions = vec![Assertion::new(
        "observed_order",
        min_order >= cfg.convergence.min_order,
        format!("errors {errors:?}, orders {orders:?} (minimum {})", cfg.convergence.min_order),
    )];
    let rows = errors.iter().enumerate().map(|(k, &e)| vec![cfg.solver.dy * 0.5f64.powi(k as i32), e]);
    let mut artifacts = Artifacts::default();
    artifacts.add("diagnostics.csv", table_csv("dy,error", rows));
    let results = json!({
        "reference": if exact.is_some() { "closed_form" } else { "successive_levels" },
        "errors": errors,
        "orders": orders,
        "x_range": (xs[0], xs[xs.len() - 1]),
    });
    Ok(RunOutcome { config: cfg.clone(), assertions, solver_failed: None, results, artifacts, manifest_extra: json!({}) })
}

/// Run a resolved scenario; nothing touches the filesystem.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    cfg.check()?;
    match cfg.scenario {
        ScenarioKind::Solve => run_solve(cfg),
        ScenarioKind::Blowup => run_blowup(cfg),
        ScenarioKind::CutPaste => run_cut_paste(cfg),
        ScenarioKind::Fbsde => run_fbsde(cfg),
        ScenarioKind::ConvergenceStudy => run_convergence(cfg),
    }
}

/// Write report.json and the manifest for an outcome.
/// The `report.json` document for a finished run.
pub fn report_json(out: &RunOutcome) -> Value {
    json!({
        "spec": 1,
        "scenario": out.config.scenario,
        "config": out.config,
        "assertions": out.assertions,
        "solver_failure": out.solver_failed,
        "exit_code": out.exit_code(),
        "results": out.results,
    })
}

pub fn write_outcome(out: RunOutcome, dir: &Path, timestamp: u64) -> Result<PathBuf> {
    let config_json = out.config.to_json()?;
    let report = report_json(&out);
    let mut art = out.artifacts;
    art.add("report.json", to_json(&report)?);
    let mut extra = json!({
        "scenario": out.config.scenario,
        "config": out.config,
        "input_hashes": { "config": content_hash(config_json.as_bytes()) },
    });
    if let Some(Family::Table { path }) = &out.config.u0 {
        if let Ok(bytes) = std::fs::read(path) {
            extra["input_hashes"]["table"] = json!(content_hash(&bytes));
        }
    }
    if let (Value::Object(m), Value::Object(x)) = (&mut extra, out.manifest_extra) {
        m.extend(x);
    }
    art.write(dir, extra, timestamp)
}

/// Resolve, run and write one scenario; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let cfg = match parse_overrides(args).and_then(|(file, ov)| resolve_config(file.as_deref(), &ov)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}: {e}", if error_exit_code(&e) == EXIT_CONFIG { "config error" } else { "solver failure" });
            return error_exit_code(&e);
        }
    };
    let code = out.exit_code();
    for a in &out.assertions {
        println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    if let Some(msg) = &out.solver_failed {
        eprintln!("solver failure: {msg}");
    } else if let Some(a) = out.first_failure() {
        eprintln!("assertion failed: {}: {}", a.name, a.detail);
    }
    let dir = cfg.output_dir();
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    match write_outcome(out, &dir, ts) {
        Ok(m) => println!("wrote {}", m.display()),
        Err(e) => {
            eprintln!("cannot write outputs to {}: {e}", dir.display());
            return EXIT_CONFIG;
        }
    }
    code
}
