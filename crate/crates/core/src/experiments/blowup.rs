//! Early blow-up on the half-line from κx² plus a bump near zero.
//!
//! Work in y = log x with w = e^{-2y} u(e^y). The bump is a cutoff of the
//! envelope κe^{-y} capped at κM; the modulated variable is w − a(t) with
//! a = (κ⁻¹ − t)⁻¹.

use serde::{Deserialize, Serialize};

use crate::domain::DomainCase;
use crate::error::{Error, Result};
use crate::initial::InitialCondition;
use crate::numerics::{integrate, smooth_step, trapezoid_uniform};
use crate::solver::{detect_blowup, solve_field, BcMode, SolverConfig, Status, StepView, Thresholds};
use crate::transform::{FieldPair, Geometry, Grid, Transform};

/// log 16, the smallest b for which the bound gives T* ≤ 1/(2κ).
pub const LOG16: f64 = 2.772_588_722_239_781;

const TARGET_WINDOW: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupConstruction {
    pub kappa: f64,
    pub lambda: f64,
    /// Cap: θ ≤ κM.
    pub cap: f64,
    /// Support [−r_left, r_right] of the cutoff.
    pub r_left: f64,
    pub r_right: f64,
    /// Width of the cutoff ramps.
    pub ramp: f64,
    /// Multiplier on θ (1 for the construction itself).
    pub scale: f64,
    pub b_lambda: f64,
    pub predicted_bound: f64,
}

impl BlowupConstruction {
    fn cutoff(&self, y: f64) -> f64 {
        let up = smooth_step((y + self.r_left) / self.ramp).0;
        let down = 1.0 - smooth_step((y - self.r_right + self.ramp) / self.ramp).0;
        up * down
    }

    /// θ(y) = scale · κ χ(y)/(1/M + e^y).
    pub fn theta(&self, y: f64) -> f64 {
        let c = self.cutoff(y);
        if c == 0.0 {
            return 0.0;
        }
        self.scale * self.kappa * c / (1.0 / self.cap + y.exp())
    }

    /// ϑ(x) = x² θ(log x), the physical bump.
    pub fn bump_x(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x * x * self.theta(x.ln())
        }
    }

    pub fn rho(&self, y: f64) -> f64 {
        self.lambda * (self.lambda * y).exp()
    }

    /// ∫ρ log(1 + θ/κ) − 2λ by adaptive quadrature.
    pub fn b_value(&self) -> f64 {
        let f = |y: f64| self.rho(y) * (self.theta(y) / self.kappa).ln_1p();
        let mut cuts = vec![
            -self.r_left,
            -self.r_left + self.ramp,
            -(self.cap.ln()).max(0.0),
            0.0,
            self.r_right - self.ramp,
            self.r_right,
        ];
        cuts.retain(|c| *c >= -self.r_left && *c <= self.r_right);
        cuts.sort_by(|a, b| a.total_cmp(b));
        let total: f64 = cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-13)).sum();
        total - 2.0 * self.lambda
    }

    /// The initial datum κx² + ϑ(x).
    pub fn initial_condition(&self) -> InitialCondition {
        let c = *self;
        InitialCondition::new(format!("quadratic_plus_bump(lambda={})", c.lambda), move |x| {
            if x <= 0.0 {
                0.0
            } else {
                c.kappa * x * x + c.bump_x(x)
            }
        })
    }

    /// Same cutoff and cap with θ multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut c = Self { scale: self.scale * s, ..*self };
        c.b_lambda = c.b_value();
        c.predicted_bound = blowup_bound(c.kappa, c.b_lambda).unwrap_or(f64::NAN);
        c
    }
}

/// Upper bound 8/(κ e^b) on the maximal existence time; needs b ≥ log 2.
pub fn blowup_bound(kappa: f64, b: f64) -> Result<f64> {
    if !(b >= 2f64.ln()) {
        return Err(Error::BoundInapplicable(format!("b = {b} is below log 2")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    Ok(8.0 / (kappa * b.exp()))
}

/// θ_λ with b_λ in [target_b, target_b + 0.01], found by bisection on log M
/// with the left cutoff radius widened if the cap alone cannot reach it.
pub fn build_theta_lambda(kappa: f64, lambda: f64, target_b: f64) -> Result<BlowupConstruction> {
    if !(lambda > 0.0 && lambda <= 0.5) {
        return Err(Error::InvalidInput(format!("lambda must lie in (0, 1/2], got {lambda}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    if 1.0 / lambda - 2.0 * lambda < target_b {
        return Err(Error::Unachievable(format!(
            "b = {target_b} exceeds 1/lambda - 2 lambda = {}; use a smaller lambda",
            1.0 / lambda - 2.0 * lambda
        )));
    }
    let make = |r_left: f64, log_m: f64| {
        let mut c = BlowupConstruction {
            kappa,
            lambda,
            cap: log_m.exp(),
            r_left,
            r_right: 6.0,
            ramp: 1.0,
            scale: 1.0,
            b_lambda: 0.0,
            predicted_bound: 0.0,
        };
        c.b_lambda = c.b_value();
        c
    };
    let mut r_left = 3.0 / lambda;
    for _ in 0..8 {
        let (mut lo, mut hi) = (0.0, 0.8 * r_left);
        if make(r_left, hi).b_lambda < target_b {
            r_left *= 1.5;
            continue;
        }
        if make(r_left, lo).b_lambda >= target_b {
            hi = lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let c = make(r_left, mid);
            if c.b_lambda < target_b {
                lo = mid;
            } else if c.b_lambda > target_b + TARGET_WINDOW {
                hi = mid;
            } else {
                hi = mid;
                break;
            }
        }
        let mut c = make(r_left, hi);
        if c.b_lambda >= target_b && c.b_lambda <= target_b + TARGET_WINDOW {
            c.predicted_bound = blowup_bound(kappa, c.b_lambda)?;
            return Ok(c);
        }
        r_left *= 1.5;
    }
    Err(Error::Unachievable(format!("no cap reaches b = {target_b} for lambda = {lambda}; use a smaller lambda")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupRunConfig {
    #[serde(default = "d_ymin")]
    pub y_min: f64,
    #[serde(default = "d_ymax")]
    pub y_max: f64,
    #[serde(default = "d_dy")]
    pub dy: f64,
    /// Horizon as a fraction of κ⁻¹.
    #[serde(default = "d_tfrac")]
    pub t_end_frac: f64,
    /// lip thresholds in units of √κ; the middle one gives the headline T*.
    #[serde(default = "d_ladder")]
    pub lip_ladder: Vec<f64>,
    #[serde(default = "d_picard")]
    pub picard_iters: u32,
}

fn d_ymin() -> f64 {
    -50.0
}
fn d_ymax() -> f64 {
    12.0
}
fn d_dy() -> f64 {
    0.05
}
fn d_tfrac() -> f64 {
    0.9
}
fn d_ladder() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}
fn d_picard() -> u32 {
    2
}

impl Default for BlowupRunConfig {
    fn default() -> Self {
        BlowupRunConfig {
            y_min: d_ymin(),
            y_max: d_ymax(),
            dy: d_dy(),
            t_end_frac: d_tfrac(),
            lip_ladder: d_ladder(),
            picard_iters: d_picard(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JSample {
    pub t: f64,
    /// a(t) read from the far-left node.
    pub a_num: f64,
    pub j: f64,
    /// Lower-bound trajectory b + (κ/4)∫(e^J − 1).
    pub j_lower: f64,
    /// sup e^{-2y}u over trusted nodes (the quantity behind 𝒬).
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub construction: Option<BlowupConstruction>,
    pub status: Status,
    /// (threshold in units of √κ, extrapolated T*).
    pub ladder: Vec<(f64, f64)>,
    pub measured_t_star: Option<f64>,
    /// Spread of T* across the threshold ladder.
    pub detection_slack: f64,
    pub predicted_bound: f64,
    pub inverse_kappa: f64,
    /// Smallest J − (b + (κ/4)∫(e^J − 1)) over all steps.
    pub j_inequality_min_slack: f64,
    /// Largest violation of 0 ≤ w − a ≤ a e^{-y}, relative to a.
    pub exp_moment_violation: f64,
    /// Largest |a_num − a|/a.
    pub a_rel_error: f64,
    /// Largest relative gap between 𝒬 and κ/(1 − κt) (meaningful for the control run).
    pub q_track_error: f64,
    pub series: Vec<JSample>,
    pub steps: usize,
}

impl BlowupReport {
    pub fn blew_up(&self) -> bool {
        matches!(self.status, Status::BlowupDetected { .. })
    }
}

/// Solve from w0 = κ + θ on y ∈ [y_min, y_max] with far-field edges; `None`
/// runs the control problem θ ≡ 0.
pub fn run_blowup_experiment(kappa: f64, c: Option<&BlowupConstruction>, run: &BlowupRunConfig) -> Result<BlowupReport> {
    if run.lip_ladder.is_empty() {
        return Err(Error::InvalidConfig("lip_ladder must not be empty".into()));
    }
    let case = DomainCase::half_line(2.0, kappa, 1.0)?;
    let tr = Transform::new(case, (run.y_min, run.y_max))?;
    let grid = Grid::new(run.y_min, run.y_max, run.dy)?;
    let geo = Geometry::new(&tr, grid);
    let v0: Vec<f64> = (0..grid.n).map(|i| kappa + c.map_or(0.0, |c| c.theta(grid.y(i)))).collect();
    let top = run.lip_ladder.iter().cloned().fold(0.0, f64::max);
    let cfg = SolverConfig {
        dy: run.dy,
        dt_initial: 1e-3 / kappa,
        t_end: run.t_end_frac / kappa,
        picard_iters: run.picard_iters,
        bc_mode: BcMode::FarField,
        blowup_thresholds: Thresholds { lip_max: Some(top * kappa.sqrt()), ..Default::default() },
        n_snapshots: 20,
        ..Default::default()
    };
    let lambda = c.map_or(0.1, |c| c.lambda);
    let b = c.map_or(0.0, |c| c.b_lambda);
    let neg: Vec<usize> = (0..grid.n).filter(|&i| grid.y(i) <= 0.0).collect();
    let rho: Vec<f64> = neg.iter().map(|&i| lambda * (lambda * grid.y(i)).exp()).collect();
    let mut series = Vec::new();
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut j_slack = f64::INFINITY;
    let mut exp_violation: f64 = 0.0;
    let mut a_err: f64 = 0.0;
    let mut q_err: f64 = 0.0;
    let mut q_run: f64 = 0.0;
    let mut record = |view: &StepView| {
        let f = view.field;
        let a_num = f.v[0];
        let a = 1.0 / (1.0 / kappa - f.t);
        a_err = a_err.max((a_num - a).abs() / a);
        let weighted: Vec<f64> = neg.iter().zip(&rho).map(|(&i, r)| r * (f.v[i] - a_num)).collect();
        let j = (trapezoid_uniform(&weighted, grid.dy) / a_num).ln_1p();
        if let Some((t0, e0)) = prev {
            integral += 0.5 * (f.t - t0) * (e0 + j.exp() - 1.0);
        }
        prev = Some((f.t, j.exp() - 1.0));
        let j_lower = b + 0.25 * kappa * integral;
        j_slack = j_slack.min(j - j_lower);
        let (lo, hi) = view.trust.unwrap_or((0, grid.n - 1));
        let mut q: f64 = 0.0;
        for i in lo..=hi {
            let m = f.v[i] - a_num;
            let env = a_num * (-grid.y(i)).exp();
            exp_violation = exp_violation.max(-m / a_num).max((m - env) / a_num);
            q = q.max(f.v[i]);
        }
        q_run = q_run.max(q);
        q_err = q_err.max((q_run - a).abs() / a);
        series.push(JSample { t: f.t, a_num, j, j_lower, q: q_run });
    };
    let field = FieldPair { t: 0.0, grid, v: v0 };
    record(&StepView { field: &field, geo: &geo, trust: None });
    let res = solve_field(field, geo, &case, &cfg, &mut record)?;
    let ladder: Vec<(f64, f64)> = run
        .lip_ladder
        .iter()
        .filter_map(|&l| {
            let th = Thresholds { lip_max: Some(l * kappa.sqrt()), ..Default::default() };
            detect_blowup(&res.monitor, &th).map(|e| (l, e.t_star))
        })
        .collect();
    let mid = run.lip_ladder[run.lip_ladder.len() / 2];
    let measured = ladder.iter().find(|(l, _)| *l == mid).map(|p| p.1);
    let slack = if ladder.len() == run.lip_ladder.len() {
        let ts = ladder.iter().map(|p| p.1);
        ts.clone().fold(f64::NEG_INFINITY, f64::max) - ts.fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    Ok(BlowupReport {
        construction: c.copied(),
        status: res.status.clone(),
        ladder,
        measured_t_star: measured,
        detection_slack: slack,
        predicted_bound: c.map_or(f64::NAN, |c| c.predicted_bound),
        inverse_kappa: 1.0 / kappa,
        j_inequality_min_slack: if c.is_some() { j_slack } else { f64::NAN },
        exp_moment_violation: exp_violation,
        a_rel_error: a_err,
        q_track_error: q_err,
        series,
        steps: res.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        assert!((blowup_bound(1.0, LOG16).unwrap() - 0.5).abs() < 1e-12);
        assert!((blowup_bound(2.0, LOG16).unwrap() - 0.25).abs() < 1e-12);
        assert!((blowup_bound(3.0, 2f64.ln()).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!(matches!(blowup_bound(1.0, 0.5), Err(Error::BoundInapplicable(_))));
    }

    #[test]
    fn envelope_integral_exceeds_inverse_lambda() {
        for lambda in [0.1, 0.25, 0.5] {
            let f = |y: f64| lambda * (lambda * y).exp() * (-y).exp().ln_1p();
            let v = integrate(f, -60.0 / lambda, 0.0, 1e-12);
            assert!(v > 1.0 / lambda, "{lambda}: {v}");
        }
    }

    #[test]
    fn construction_hits_target_and_respects_envelope() {
        let c = build_theta_lambda(1.0, 0.1, LOG16).unwrap();
        assert!(c.b_lambda >= LOG16 && c.b_lambda <= LOG16 + 0.01, "{c:?}");
        assert!(c.predicted_bound <= 0.5);
        for k in 0..20_000 {
            let y = -60.0 + 70.0 * k as f64 / 20_000.0;
            let th = c.theta(y);
            assert!(th >= 0.0 && th <= c.kappa * (-y).exp() * (1.0 + 1e-12), "y={y}");
        }
        assert_eq!(c.theta(-c.r_left - 0.1), 0.0);
        assert_eq!(c.theta(c.r_right + 0.1), 0.0);
    }

    #[test]
    fn unachievable_target_suggests_smaller_lambda() {
        let e = build_theta_lambda(1.0, 0.5, LOG16).unwrap_err();
        assert!(matches!(e, Error::Unachievable(ref m) if m.contains("smaller lambda")));
        assert!(build_theta_lambda(1.0, 0.7, 1.0).is_err());
    }

    #[test]
    fn rho_has_unit_mass_on_negative_axis() {
        let c = build_theta_lambda(1.0, 0.25, 1.0).unwrap();
        let m = integrate(|y| c.rho(y), -400.0, 0.0, 1e-13);
        assert!((m - 1.0).abs() < 1e-10);
    }
}
