//! Time stepping of the transformed equation
//! ∂t v = ½(v + ε) ∂y²v + (3ζ''/2ζ') v ∂y v + (ζ'''/ζ') v².

mod blowup;

pub use blowup::{detect_blowup, fit_reciprocal, BlowupEstimate, MonitorSample, Quantity, Thresholds};

use serde::{Deserialize, Serialize};

use crate::barriers::{barriers_for, Barrier};
use crate::diagnostics::{compute_report, lip_sqrt_estimate, DiagnosticsReport};
use crate::domain::DomainCase;
use crate::error::{Error, Result};
use crate::initial::InitialCondition;
use crate::numerics::solve_tridiagonal;
use crate::transform::{u_to_v, v_to_u_derivatives, FieldPair, Geometry, Grid, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SemiImplicitLagged,
    ExplicitCfl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    /// Edge values from the supersolution barrier.
    BarrierDirichlet,
    /// Edge values frozen at their initial values.
    FrozenDirichlet,
    /// Zero-slope edges (mirrored ghost node); the edge node keeps its
    /// reaction term and so follows the far-field ODE.
    FarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "d_dy")]
    pub dy: f64,
    #[serde(default = "d_dt")]
    pub dt_initial: f64,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    #[serde(default = "d_scheme")]
    pub scheme: Scheme,
    #[serde(default = "d_picard")]
    pub picard_iters: u32,
    #[serde(default = "d_bc")]
    pub bc_mode: BcMode,
    #[serde(default)]
    pub eps_viscosity: f64,
    #[serde(default)]
    pub blowup_thresholds: Thresholds,
    /// Number of equally spaced snapshots after t = 0.
    #[serde(default = "d_snap")]
    pub n_snapshots: usize,
    /// Cap on dt from the reaction term: dt·max|r3 v| ≤ this.
    #[serde(default = "d_react")]
    pub reaction_limit: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
}

fn d_dy() -> f64 {
    0.05
}
fn d_dt() -> f64 {
    1e-3
}
fn d_t_end() -> f64 {
    0.5
}
fn d_scheme() -> Scheme {
    Scheme::SemiImplicitLagged
}
fn d_picard() -> u32 {
    2
}
fn d_bc() -> BcMode {
    BcMode::BarrierDirichlet
}
fn d_snap() -> usize {
    10
}
fn d_react() -> f64 {
    2e-3
}
fn d_max_steps() -> usize {
    5_000_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dy: d_dy(),
            dt_initial: d_dt(),
            t_end: d_t_end(),
            scheme: d_scheme(),
            picard_iters: d_picard(),
            bc_mode: d_bc(),
            eps_viscosity: 0.0,
            blowup_thresholds: Thresholds::default(),
            n_snapshots: d_snap(),
            reaction_limit: d_react(),
            max_steps: d_max_steps(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dy > 0.0 && self.dy.is_finite()) {
            return bad(format!("dy must be positive, got {}", self.dy));
        }
        if !(self.dt_initial > 0.0 && self.dt_initial.is_finite()) {
            return bad(format!("dt_initial must be positive, got {}", self.dt_initial));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.picard_iters > 10 {
            return bad(format!("picard_iters must be at most 10, got {}", self.picard_iters));
        }
        if !(self.eps_viscosity >= 0.0) {
            return bad(format!("eps_viscosity must be nonnegative, got {}", self.eps_viscosity));
        }
        if !(self.reaction_limit > 0.0) {
            return bad("reaction_limit must be positive".into());
        }
        if self.n_snapshots == 0 {
            return bad("n_snapshots must be at least 1".into());
        }
        Ok(())
    }
}

/// Edge treatment for one step: `Some(v)` pins the edge, `None` is far-field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edges {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl Edges {
    pub const FAR: Edges = Edges { left: None, right: None };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Completed,
    BlowupDetected { t_star: f64, t_cross: f64, quantity: Quantity },
    StepFailure { t: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub trajectory: Vec<FieldPair>,
    pub status: Status,
    pub diagnostics: Vec<DiagnosticsReport>,
    /// Per-step monitor stream (only when thresholds are armed).
    pub monitor: Vec<MonitorSample>,
    /// Trusted node range `[lo, hi]` per snapshot.
    pub trust: Vec<(usize, usize)>,
    /// Largest clamp applied to a negative v, relative to max v.
    pub clamp_max: f64,
    pub steps: usize,
    pub geometry: Geometry,
    /// Barrier pair used for boundary data and margins, if available.
    pub barriers: Option<(Barrier, Barrier)>,
    /// Case with K raised to the certified value.
    pub case: DomainCase,
}

impl SolveResult {
    pub fn final_field(&self) -> &FieldPair {
        self.trajectory.last().expect("trajectory holds the initial snapshot")
    }

    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed
    }
}

// Terms of the right-hand side other than diffusion, evaluated at `w`.
fn explicit_terms(w: &[f64], geo: &Geometry, i: usize, far: bool) -> f64 {
    let n = w.len();
    let dy = geo.grid.dy;
    let d1 = if far && (i == 0 || i == n - 1) {
        0.0
    } else {
        (w[i + 1] - w[i - 1]) / (2.0 * dy)
    };
    1.5 * geo.r2[i] * w[i] * d1 + geo.r3[i] * w[i] * w[i]
}

fn sweep(v_old: &[f64], w: &[f64], geo: &Geometry, eps: f64, dt: f64, edges: Edges) -> Option<Vec<f64>> {
    let n = v_old.len();
    let h2 = geo.grid.dy * geo.grid.dy;
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        let c = 0.5 * (w[i] + eps) * dt / h2;
        lower[i] = -c;
        diag[i] = 1.0 + 2.0 * c;
        upper[i] = -c;
        rhs[i] = v_old[i] + dt * explicit_terms(w, geo, i, false);
    }
    match edges.left {
        Some(b) => rhs[0] = b,
        None => {
            let c = 0.5 * (w[0] + eps) * dt / h2;
            diag[0] = 1.0 + 2.0 * c;
            upper[0] = -2.0 * c;
            rhs[0] = v_old[0] + dt * explicit_terms(w, geo, 0, true);
        }
    }
    match edges.right {
        Some(b) => rhs[n - 1] = b,
        None => {
            let c = 0.5 * (w[n - 1] + eps) * dt / h2;
            diag[n - 1] = 1.0 + 2.0 * c;
            lower[n - 1] = -2.0 * c;
            rhs[n - 1] = v_old[n - 1] + dt * explicit_terms(w, geo, n - 1, true);
        }
    }
    solve_tridiagonal(&lower, &diag, &upper, &rhs)
}

fn forward_euler(v: &[f64], geo: &Geometry, eps: f64, dt: f64, edges: Edges) -> Vec<f64> {
    let n = v.len();
    let h2 = geo.grid.dy * geo.grid.dy;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
        out[i] = v[i] + dt * (0.5 * (v[i] + eps) * d2 + explicit_terms(v, geo, i, false));
    }
    out[0] = match edges.left {
        Some(b) => b,
        None => v[0] + dt * (0.5 * (v[0] + eps) * 2.0 * (v[1] - v[0]) / h2 + explicit_terms(v, geo, 0, true)),
    };
    out[n - 1] = match edges.right {
        Some(b) => b,
        None => {
            v[n - 1]
                + dt * (0.5 * (v[n - 1] + eps) * 2.0 * (v[n - 2] - v[n - 1]) / h2
                    + explicit_terms(v, geo, n - 1, true))
        }
    };
    out
}

enum Attempt {
    Done(Vec<f64>, f64),
    NonContraction,
    NonFinite,
}

fn clamp(mut v: Vec<f64>) -> Attempt {
    if v.iter().any(|x| !x.is_finite()) {
        return Attempt::NonFinite;
    }
    let scale = v.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for x in v.iter_mut() {
        if *x < 0.0 {
            worst = worst.max(-*x / scale);
            *x = 0.0;
        }
    }
    Attempt::Done(v, worst)
}

fn attempt(v_old: &[f64], geo: &Geometry, cfg: &SolverConfig, dt: f64, edges: Edges) -> Attempt {
    let eps = cfg.eps_viscosity;
    match cfg.scheme {
        Scheme::ExplicitCfl => clamp(forward_euler(v_old, geo, eps, dt, edges)),
        Scheme::SemiImplicitLagged => {
            let mut w = v_old.to_vec();
            let mut prev_change = f64::INFINITY;
            for _ in 0..=cfg.picard_iters {
                let Some(next) = sweep(v_old, &w, geo, eps, dt, edges) else {
                    return Attempt::NonFinite;
                };
                let scale = next.iter().fold(0.0, |m: f64, x| m.max(x.abs())).max(1e-300);
                let change = next.iter().zip(&w).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
                if change > prev_change && change > 1e-12 * scale {
                    return Attempt::NonContraction;
                }
                prev_change = change;
                w = next;
            }
            clamp(w)
        }
    }
}

/// One time step of size `dt` with the given edge data. The result is
/// clamped at zero.
pub fn step(field: &FieldPair, geo: &Geometry, cfg: &SolverConfig, dt: f64, edges: Edges) -> Result<FieldPair> {
    if field.v.len() != geo.len() {
        return Err(Error::LengthMismatch { expected: geo.len(), got: field.v.len() });
    }
    let t = field.t;
    match attempt(&field.v, geo, cfg, dt, edges) {
        Attempt::Done(v, _) => Ok(FieldPair { t: t + dt, grid: field.grid, v }),
        Attempt::NonContraction => Err(Error::StepFailure { t, reason: "Picard iteration did not contract".into() }),
        Attempt::NonFinite => Err(Error::StepFailure { t, reason: "non-finite value in update".into() }),
    }
}

/// Largest stable/accurate step for the current state.
pub fn stable_dt(v: &[f64], geo: &Geometry, cfg: &SolverConfig) -> f64 {
    let dy = geo.grid.dy;
    let mut adv: f64 = 0.0;
    let mut react: f64 = 0.0;
    let mut vmax: f64 = 0.0;
    for i in 0..v.len() {
        adv = adv.max((1.5 * geo.r2[i] * v[i]).abs());
        react = react.max((geo.r3[i] * v[i]).abs());
        vmax = vmax.max(v[i]);
    }
    let mut dt = cfg.dt_initial;
    if adv > 0.0 {
        dt = dt.min(0.5 * dy / adv);
    }
    if react > 0.0 {
        dt = dt.min(cfg.reaction_limit / react);
    }
    if cfg.scheme == Scheme::ExplicitCfl {
        let d = vmax + cfg.eps_viscosity;
        if d > 0.0 {
            dt = dt.min(0.4 * dy * dy / d);
        }
    }
    dt
}

/// Boundary-influence bands. Each side accumulates a diffusive variance
/// and an advective drift from the largest coefficients in its band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    var: [f64; 2],
    adv: [f64; 2],
    dy: f64,
}

impl TrustRegion {
    pub fn new(dy: f64) -> Self {
        TrustRegion { var: [0.0; 2], adv: [0.0; 2], dy }
    }

    pub fn width(&self, side: usize) -> f64 {
        self.adv[side] + 5.0 * self.var[side].sqrt() + 2.0 * self.dy
    }

    fn band(&self, side: usize, n: usize) -> std::ops::Range<usize> {
        let k = ((self.width(side) / self.dy).ceil() as usize + 2).min(n);
        if side == 0 {
            0..k
        } else {
            n - k..n
        }
    }

    pub fn advance(&mut self, v: &[f64], geo: &Geometry, eps: f64, dt: f64) {
        for side in 0..2 {
            let mut d: f64 = 0.0;
            let mut a: f64 = 0.0;
            for i in self.band(side, v.len()) {
                d = d.max(v[i] + eps);
                a = a.max((1.5 * geo.r2[i] * v[i]).abs());
            }
            self.var[side] += d * dt;
            self.adv[side] += a * dt;
        }
    }

    /// Trusted node range, or `None` once the bands meet.
    pub fn nodes(&self, n: usize) -> Option<(usize, usize)> {
        let lo = (self.width(0) / self.dy).ceil() as usize;
        let hi_off = (self.width(1) / self.dy).ceil() as usize;
        if lo + hi_off + 3 > n {
            return None;
        }
        Some((lo, n - 1 - hi_off))
    }
}

/// Per-step state handed to observers.
pub struct StepView<'a> {
    pub field: &'a FieldPair,
    pub geo: &'a Geometry,
    pub trust: Option<(usize, usize)>,
}

fn monitor_sample(field: &FieldPair, geo: &Geometry, trust: (usize, usize)) -> Result<MonitorSample> {
    let (lo, hi) = trust;
    let p = v_to_u_derivatives(field, geo)?;
    let v_max = field.v[lo..=hi].iter().cloned().fold(0.0, f64::max);
    let lip = lip_sqrt_estimate(&p.x[lo..=hi], &p.u[lo..=hi]);
    let d2 = p.d2u[lo..=hi].iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    Ok(MonitorSample { t: field.t, v_max, lip, d2 })
}

fn edge_values(
    cfg: &SolverConfig,
    t: f64,
    v0: &[f64],
    geo: &Geometry,
    barriers: Option<&(Barrier, Barrier)>,
) -> Result<Edges> {
    let n = v0.len();
    Ok(match cfg.bc_mode {
        BcMode::FarField => Edges::FAR,
        BcMode::FrozenDirichlet => Edges { left: Some(v0[0]), right: Some(v0[n - 1]) },
        BcMode::BarrierDirichlet => {
            let (_, sup) = barriers.ok_or_else(|| Error::InvalidConfig("barrier_dirichlet needs a barrier pair".into()))?;
            if let Some(h) = sup.horizon() {
                if t >= h {
                    return Err(Error::StepFailure { t, reason: format!("past the supersolution horizon {h}") });
                }
            }
            let at = |i: usize| sup.eval(t, geo.x[i]) / (geo.z1[i] * geo.z1[i]);
            Edges { left: Some(at(0)), right: Some(at(n - 1)) }
        }
    })
}

/// Solve from sampled physical data `u0` on the transform's box.
///
/// Needs an admissible certificate on `u0` or its override flag; without a
/// certificate one is computed on the grid image.
pub fn solve(u0: &InitialCondition, tr: &Transform, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let grid = Grid::new(tr.y_min, tr.y_max, cfg.dy)?;
    let geo = Geometry::new(tr, grid);
    let u = u0.sample(&geo.x);
    let cert = match &u0.certificate {
        Some(c) => c.clone(),
        None => crate::experiments::hypothesis::validate_hypothesis(&geo.x, &u, &tr.case)?,
    };
    if !cert.is_admissible() && !u0.override_certificate {
        return Err(Error::InvalidInput(format!(
            "initial data {} is not admissible for {} ({:?}); set the override flag to solve anyway",
            u0.name,
            tr.case.label(),
            cert.verdict
        )));
    }
    let mut case = tr.case;
    if cert.k_found.is_finite() {
        case.k = case.k.max(cert.k_found);
    }
    let field = u_to_v(&u, &geo, 0.0)?;
    solve_field(field, geo, &case, cfg, &mut |_| {})
}

/// Solve from a prepared v-field on a prepared geometry. `observe` sees
/// every accepted step.
pub fn solve_field(
    mut field: FieldPair,
    geo: Geometry,
    case: &DomainCase,
    cfg: &SolverConfig,
    observe: &mut dyn FnMut(&StepView),
) -> Result<SolveResult> {
    cfg.validate()?;
    if field.v.len() != geo.len() {
        return Err(Error::LengthMismatch { expected: geo.len(), got: field.v.len() });
    }
    let armed = cfg.blowup_thresholds.armed();
    if let Some(h) = case.quadratic_horizon() {
        if cfg.t_end >= h && !armed {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} reaches the horizon 1/kappa = {h}; arm blow-up thresholds to go past it",
                cfg.t_end
            )));
        }
    }
    let barriers = barriers_for(case, 0.0).ok();
    if cfg.bc_mode == BcMode::BarrierDirichlet && barriers.is_none() {
        barriers_for(case, 0.0)?;
    }
    let v0 = field.v.clone();
    let n = geo.len();
    let dy = geo.grid.dy;
    let mut trust = TrustRegion::new(dy);
    let margin_ok = |t: f64| barriers.as_ref().map(|(_, s)| s.horizon().is_none_or(|h| t < 0.999 * h)).unwrap_or(false);
    let report = |f: &FieldPair, tn: (usize, usize)| {
        compute_report(f, &geo, case, tn, if margin_ok(f.t) { barriers.as_ref() } else { None })
    };
    let first_trust = trust.nodes(n).ok_or_else(|| Error::InvalidConfig("grid too small for a trust region".into()))?;
    let mut res = SolveResult {
        trajectory: vec![field.clone()],
        status: Status::Completed,
        diagnostics: vec![report(&field, first_trust)?],
        monitor: Vec::new(),
        trust: vec![first_trust],
        clamp_max: 0.0,
        steps: 0,
        geometry: geo.clone(),
        barriers: barriers.clone(),
        case: *case,
    };
    if armed {
        res.monitor.push(monitor_sample(&field, &geo, first_trust)?);
    }
    let snaps: Vec<f64> = (1..=cfg.n_snapshots).map(|k| cfg.t_end * k as f64 / cfg.n_snapshots as f64).collect();
    let mut next_snap = 0;
    let mut halvings = 0u32;
    let mut dt_cap = f64::INFINITY;
    while next_snap < snaps.len() {
        if res.steps >= cfg.max_steps {
            res.status = Status::StepFailure { t: field.t, reason: format!("step budget {} exhausted", cfg.max_steps) };
            break;
        }
        let target = snaps[next_snap];
        let mut dt = stable_dt(&field.v, &geo, cfg).min(dt_cap);
        let hit = field.t + dt >= target * (1.0 - 1e-14);
        if hit {
            dt = target - field.t;
        }
        if !(dt > 1e-15 * target.max(1.0)) && !hit {
            res.status = Status::StepFailure { t: field.t, reason: format!("time step underflow (dt = {dt:e})") };
            break;
        }
        let edges = match edge_values(cfg, field.t + dt, &v0, &geo, barriers.as_ref()) {
            Ok(e) => e,
            Err(Error::StepFailure { t, reason }) => {
                res.status = Status::StepFailure { t, reason };
                break;
            }
            Err(e) => return Err(e),
        };
        match attempt(&field.v, &geo, cfg, dt, edges) {
            Attempt::Done(v, c) => {
                halvings = 0;
                dt_cap = f64::INFINITY;
                res.clamp_max = res.clamp_max.max(c);
                trust.advance(&field.v, &geo, cfg.eps_viscosity, dt);
                field = FieldPair { t: if hit { target } else { field.t + dt }, grid: field.grid, v };
                res.steps += 1;
            }
            Attempt::NonContraction => {
                halvings += 1;
                if halvings >= 6 {
                    res.status = Status::StepFailure { t: field.t, reason: "Picard non-contraction after 6 halvings".into() };
                    break;
                }
                dt_cap = 0.5 * dt;
                continue;
            }
            Attempt::NonFinite => {
                res.status = Status::StepFailure { t: field.t, reason: "non-finite value in update".into() };
                break;
            }
        }
        let tn = trust.nodes(n);
        observe(&StepView { field: &field, geo: &geo, trust: tn });
        let Some(tn) = tn else {
            res.status = Status::StepFailure { t: field.t, reason: "trust region vanished".into() };
            res.trajectory.push(field.clone());
            break;
        };
        if armed {
            let s = monitor_sample(&field, &geo, tn)?;
            res.monitor.push(s);
            if let Some(q) = cfg.blowup_thresholds.crossed(&s) {
                let est = detect_blowup(&res.monitor, &cfg.blowup_thresholds);
                let t_star = est.map(|e| e.t_star).unwrap_or(field.t);
                res.status = Status::BlowupDetected { t_star, t_cross: field.t, quantity: q };
                res.trajectory.push(field.clone());
                res.diagnostics.push(report(&field, tn)?);
                res.trust.push(tn);
                break;
            }
        }
        if field.t == target {
            res.trajectory.push(field.clone());
            res.diagnostics.push(report(&field, tn)?);
            res.trust.push(tn);
            next_snap += 1;
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainCase;

    fn half_exp(y: (f64, f64), dy: f64) -> (Geometry, DomainCase) {
        let case = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let tr = Transform::new(case, y).unwrap();
        (Geometry::new(&tr, Grid::new(y.0, y.1, dy).unwrap()), case)
    }

    #[test]
    fn zero_is_fixed() {
        let (geo, _) = half_exp((-5.0, 5.0), 0.1);
        let f = FieldPair { t: 0.0, grid: geo.grid, v: vec![0.0; geo.len()] };
        for scheme in [Scheme::SemiImplicitLagged, Scheme::ExplicitCfl] {
            let cfg = SolverConfig { scheme, ..Default::default() };
            let g = step(&f, &geo, &cfg, 0.01, Edges::FAR).unwrap();
            assert!(g.v.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_step_on_exponential_map() {
        let (geo, _) = half_exp((-5.0, 5.0), 0.1);
        let f = FieldPair { t: 0.0, grid: geo.grid, v: vec![1.0; geo.len()] };
        for (scheme, picard) in [(Scheme::ExplicitCfl, 0), (Scheme::SemiImplicitLagged, 0)] {
            let cfg = SolverConfig { scheme, picard_iters: picard, ..Default::default() };
            let g = step(&f, &geo, &cfg, 0.01, Edges::FAR).unwrap();
            for &v in &g.v {
                assert!((v - 1.01).abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn explicit_and_semi_implicit_agree_to_second_order() {
        let (geo, _) = half_exp((-3.0, 3.0), 0.05);
        let v: Vec<f64> = (0..geo.len()).map(|i| 1.0 + 0.3 * (geo.grid.y(i)).sin()).collect();
        let f = FieldPair { t: 0.0, grid: geo.grid, v };
        let diff = |dt: f64| {
            let e = step(&f, &geo, &SolverConfig { scheme: Scheme::ExplicitCfl, ..Default::default() }, dt, Edges::FAR).unwrap();
            let s = step(&f, &geo, &SolverConfig { picard_iters: 3, ..Default::default() }, dt, Edges::FAR).unwrap();
            e.v.iter().zip(&s.v).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
        };
        let (a, b) = (diff(2e-4), diff(1e-4));
        let ratio = a / b;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn horizon_guard() {
        let case = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let tr = Transform::new(case, (-6.0, 6.0)).unwrap();
        let u0 = InitialCondition::new("x2", |x: f64| x * x);
        let cfg = SolverConfig { t_end: 1.0, bc_mode: BcMode::FarField, ..Default::default() };
        assert!(matches!(solve(&u0, &tr, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn uncertified_data_refused_without_override() {
        let case = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let tr = Transform::new(case, (-6.0, 6.0)).unwrap();
        let u0 = InitialCondition::new("2x2", |x: f64| 2.0 * x * x);
        let cfg = SolverConfig { t_end: 0.1, bc_mode: BcMode::FarField, ..Default::default() };
        assert!(solve(&u0, &tr, &cfg).is_err());
        assert!(solve(&u0.with_override(), &tr, &cfg).is_ok());
    }

    #[test]
    fn pure_quadratic_half_line_tracks_closed_form() {
        let case = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let tr = Transform::new(case, (-8.0, 8.0)).unwrap();
        let u0 = InitialCondition::new("x2", |x: f64| x * x);
        let cfg = SolverConfig { t_end: 0.5, dy: 0.1, bc_mode: BcMode::FarField, n_snapshots: 5, ..Default::default() };
        let r = solve(&u0, &tr, &cfg).unwrap();
        assert!(r.is_completed());
        let last = r.final_field();
        for &v in &last.v {
            assert!((v - 2.0).abs() < 5e-3, "{v}");
        }
        assert_eq!(r.trajectory.len(), 6);
        assert!(r.trajectory.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn trust_region_shrinks() {
        let (geo, _) = half_exp((-5.0, 5.0), 0.1);
        let v = vec![1.0; geo.len()];
        let mut t = TrustRegion::new(0.1);
        let (lo0, hi0) = t.nodes(geo.len()).unwrap();
        for _ in 0..10 {
            t.advance(&v, &geo, 0.0, 0.01);
        }
        let (lo1, hi1) = t.nodes(geo.len()).unwrap();
        assert!(lo1 > lo0 && hi1 < hi0);
    }
}
