//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rootlip::diagnostics::riccati_reference;
use rootlip::domain::DomainCase;
use rootlip::experiments::blowup::{build_theta_lambda, run_blowup_experiment, BlowupRunConfig, LOG16};
use rootlip::experiments::cut_paste::{run_cut_paste_experiment, Bump, CutPasteConfig};
use rootlip::experiments::random::{random_data, CASE_KINDS};
use rootlip::fbsde::{martingale_check, mean_se, simulate_paths, EnsembleConfig, SnapshotField};
use rootlip::initial::{Family, InitialCondition};
use rootlip::solver::{solve, BcMode, SolveResult, SolverConfig, Status};
use rootlip::transform::{u_to_v, v_to_u, v_to_u_derivatives, Geometry, Grid, Transform};

type Outcome = Result<String, String>;

/// Root-Lipschitz samples from every suite run: (label, t, slack).
#[derive(Default)]
struct LipLog {
    checked: usize,
    worst: Option<(String, f64, f64)>,
}

impl LipLog {
    fn record(&mut self, label: &str, res: &SolveResult) {
        let dy = res.geometry.grid.dy;
        for d in &res.diagnostics {
            let s = d.root_lip_slack(dy);
            if !s.is_finite() {
                continue;
            }
            self.checked += 1;
            if self.worst.as_ref().is_none_or(|w| s < w.2) {
                self.worst = Some((label.to_string(), d.t, s));
            }
        }
    }
}

fn max_rel_error(res: &SolveResult, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mut err: f64 = 0.0;
    for (f, &(lo, hi)) in res.trajectory.iter().zip(&res.trust) {
        let u = v_to_u(f, &res.geometry);
        for i in lo..=hi {
            let e = exact(f.t, res.geometry.x[i]);
            err = err.max((u[i] - e).abs() / e);
        }
    }
    err
}

fn quadratic_line(dy: f64) -> Result<SolveResult, rootlip::Error> {
    let case = DomainCase::line(2.0, 1.0, 1.0)?;
    let tr = Transform::new(case, (-8.0, 8.0))?;
    let u0 = Family::QuadraticPlusOne.build(&case)?;
    let cfg = SolverConfig { dy, dt_initial: 2.0 * dy * dy, t_end: 0.5, n_snapshots: 5, ..Default::default() };
    solve(&u0, &tr, &cfg)
}

fn c1(lip: &mut LipLog) -> Outcome {
    let exact = |t: f64, x: f64| (x * x + 1.0) / (1.0 - t);
    let fine = quadratic_line(1.0 / 128.0).map_err(|e| e.to_string())?;
    let coarse = quadratic_line(1.0 / 64.0).map_err(|e| e.to_string())?;
    lip.record("quadratic line", &fine);
    lip.record("quadratic line coarse", &coarse);
    if !fine.is_completed() {
        return Err(format!("status {:?}", fine.status));
    }
    let (ef, ec) = (max_rel_error(&fine, exact), max_rel_error(&coarse, exact));
    let msg = format!("max rel error {ef:.3e} at dy=1/128, {ec:.3e} at dy=1/64 (ratio {:.2})", ec / ef);
    if ef <= 1e-3 && ec / ef >= 2.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c2(lip: &mut LipLog) -> Outcome {
    let fam = Family::QuadraticFarBump { amp: 0.05, center: 3.0, width: 1.0 };
    let case = DomainCase::half_line(2.0, 1.02, 1.0).map_err(|e| e.to_string())?;
    let tr = Transform::new(case, (-45.0, 10.0)).map_err(|e| e.to_string())?;
    let u0 = fam.build(&case).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { dy: 0.05, t_end: 0.8, n_snapshots: 16, bc_mode: BcMode::FarField, ..Default::default() };
    let res = solve(&u0, &tr, &cfg).map_err(|e| e.to_string())?;
    lip.record("riccati", &res);
    if !res.is_completed() {
        return Err(format!("status {:?}", res.status));
    }
    let mut worst = (0.0, 0.0);
    for d in &res.diagnostics {
        let r = riccati_reference(2.0, d.t).map_err(|e| e.to_string())?;
        let e = (d.d2_at_zero / r - 1.0).abs();
        if !(e <= worst.0) {
            worst = (e, d.t);
        }
    }
    let msg = format!("max |d2u(t,0+)/(2/(1-t)) - 1| = {:.3e} at t = {:.3}", worst.0, worst.1);
    if worst.0 <= 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3() -> Outcome {
    let c = build_theta_lambda(1.0, 0.1, LOG16).map_err(|e| e.to_string())?;
    let run = BlowupRunConfig::default();
    let rep = run_blowup_experiment(1.0, Some(&c), &run).map_err(|e| e.to_string())?;
    let ctl = run_blowup_experiment(1.0, None, &run).map_err(|e| e.to_string())?;
    let t = rep.measured_t_star.ok_or_else(|| format!("no blow-up detected; status {:?}", rep.status))?;
    let msg = format!(
        "b = {:.4}, T* = {t:.5}, slack {:.2e}, bound {:.4}, control {}",
        c.b_lambda,
        rep.detection_slack,
        rep.predicted_bound,
        if ctl.blew_up() { "blew up" } else { "no blow-up to t = 0.9" }
    );
    let ok = c.b_lambda >= LOG16
        && t < 1.0
        && t <= 0.5 + rep.detection_slack
        && rep.detection_slack < 0.1
        && !ctl.blew_up()
        && matches!(ctl.status, Status::Completed);
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

const SUITE_DY: f64 = 0.05;

fn random_solve(seed: u64, u0: &InitialCondition, d: &rootlip::experiments::random::RandomData) -> Result<SolveResult, String> {
    let tr = d.transform().map_err(|e| e.to_string())?;
    // for γ < 2 the supersolutions sit orders of magnitude above the data
    // at the far edge; frozen edge data already lies between the barriers
    let bc_mode = match d.case.gamma() {
        Some(g) if g < 2.0 => BcMode::FrozenDirichlet,
        _ => BcMode::BarrierDirichlet,
    };
    let cfg = SolverConfig { dy: SUITE_DY, t_end: d.t_end, n_snapshots: 8, bc_mode, ..Default::default() };
    let res = solve(u0, &tr, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
    if !res.is_completed() {
        return Err(format!("seed {seed}: status {:?}", res.status));
    }
    Ok(res)
}

/// Sandwich runs, also feeding the zero-set and root-Lipschitz checks.
fn c4(lip: &mut LipLog, zero: &mut Vec<(String, f64)>) -> Outcome {
    let mut worst = (f64::INFINITY, 0u64, 0.0);
    let mut kinds = [0usize; CASE_KINDS];
    for seed in 0..20u64 {
        let kind = seed as usize % CASE_KINDS;
        let d = random_data(1000 + seed, kind, SUITE_DY).map_err(|e| e.to_string())?;
        let res = random_solve(seed, &d.initial(), &d)?;
        lip.record(&format!("sandwich seed {seed}"), &res);
        kinds[kind] += 1;
        let scale = res.diagnostics[0].u_max;
        for r in &res.diagnostics {
            if r.barrier_margin_rel.is_finite() && r.barrier_margin_rel < worst.0 {
                worst = (r.barrier_margin_rel, seed, r.t);
            }
            if res.case.has_left_boundary() {
                zero.push((format!("sandwich seed {seed} t={}", r.t), r.zero_residual / scale));
            }
        }
    }
    let msg = format!("min relative margin {:.3e} (seed {}, t = {:.3}); runs per case {kinds:?}", worst.0, worst.1, worst.2);
    if worst.0 >= -1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c5(lip: &mut LipLog) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_order = f64::INFINITY;
    let mut worst_rerun: f64 = 0.0;
    for seed in 0..20u64 {
        let d = random_data(2000 + seed, seed as usize % CASE_KINDS, SUITE_DY).map_err(|e| e.to_string())?;
        let tr = d.transform().map_err(|e| e.to_string())?;
        let (xa, xb) = (tr.zeta(tr.y_min * 0.5), tr.zeta(tr.y_max * 0.5));
        let center = rng.gen_range(xa..xb);
        let width = rng.gen_range(0.3..1.5);
        let lo = random_solve(seed, &d.initial(), &d)?;
        let hi = random_solve(seed, &d.raised(0.05, center, width), &d)?;
        lip.record(&format!("comparison seed {seed}"), &hi);
        for k in 0..lo.trajectory.len() {
            let (ul, uh) = (v_to_u(&lo.trajectory[k], &lo.geometry), v_to_u(&hi.trajectory[k], &hi.geometry));
            let (a, b) = (lo.trust[k].0.max(hi.trust[k].0), lo.trust[k].1.min(hi.trust[k].1));
            let scale = ul[a..=b].iter().cloned().fold(0.0, f64::max);
            for i in a..=b {
                worst_order = worst_order.min((uh[i] - ul[i]) / scale);
            }
        }
        let perm: Vec<usize> = (0..d.modes.len()).rev().collect();
        let again = random_solve(seed, &d.initial_permuted(&perm), &d)?;
        for (f, g) in lo.trajectory.iter().zip(&again.trajectory) {
            for (p, q) in f.v.iter().zip(&g.v) {
                worst_rerun = worst_rerun.max((p - q).abs() / p.abs().max(1e-300));
            }
        }
    }
    let msg = format!("min (u_hi - u_lo)/scale = {worst_order:.3e}; equal-data reruns differ by {worst_rerun:.3e}");
    if worst_order >= -1e-6 && worst_rerun <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c6(zero: &[(String, f64)]) -> Outcome {
    let worst = zero.iter().cloned().fold((String::new(), 0.0f64), |m, z| if z.1 > m.1 { z } else { m });
    let l = Bump { a: 0.0, b: 1.0, amp: 1.0 };
    let r = Bump { a: 1.5, b: 2.5, amp: 1.0 };
    let coarse = run_cut_paste_experiment(l, r, &CutPasteConfig { dx: 2e-3, dy: 0.02, ..Default::default() }).map_err(|e| e.to_string())?;
    let fine = run_cut_paste_experiment(l, r, &CutPasteConfig { dx: 1e-3, dy: 0.01, ..Default::default() }).map_err(|e| e.to_string())?;
    let msg = format!(
        "max boundary u/scale {:.2e} over {} snapshots; cut-paste {:.2e} -> {:.2e} under halving, gap max {:.1e}",
        worst.1,
        zero.len(),
        coarse.discrepancy,
        fine.discrepancy,
        fine.gap_max
    );
    if !zero.is_empty() && worst.1 <= 1e-8 && fine.discrepancy <= 1e-5 && fine.discrepancy < coarse.discrepancy && fine.gap_max == 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7(lip: &LipLog) -> Outcome {
    match &lip.worst {
        None => Err("no snapshots recorded".into()),
        Some((label, t, s)) => {
            let msg = format!("{} snapshots; min slack {s:.3e} ({label}, t = {t:.3})", lip.checked);
            if *s >= 0.0 {
                Ok(msg)
            } else {
                Err(msg)
            }
        }
    }
}

fn c8() -> Outcome {
    let case = DomainCase::line(2.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let tr = Transform::with_default_range(case).map_err(|e| e.to_string())?;
    let u0 = Family::QuadraticPlusOne.build(&case).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { dy: 0.02, dt_initial: 4e-4, t_end: 0.5, n_snapshots: 50, ..Default::default() };
    let res = solve(&u0, &tr, &cfg).map_err(|e| e.to_string())?;
    let field = SnapshotField::from_result(&res).map_err(|e| e.to_string())?;
    let ecfg = EnsembleConfig {
        x0: 1.0,
        t_horizon: 0.5,
        n_paths: 100_000,
        dt_sde: None,
        seed: 0,
        record_times: (1..=5).map(|k| 0.5 * k as f64 / 6.0).collect(),
    };
    let e = simulate_paths(&field, &ecfg).map_err(|e| e.to_string())?;
    let again = simulate_paths(&field, &ecfg).map_err(|e| e.to_string())?;
    let identical = e.terminal_values.iter().zip(&again.terminal_values).all(|(a, b)| a.to_bits() == b.to_bits())
        && e.recorded == again.recorded;
    let (mean, se) = mean_se(&e.terminal_values);
    let mart = martingale_check(&e, &field);
    let worst = mart.iter().fold(0.0f64, |m, p| m.max(p.standardized.abs()));
    let msg = format!(
        "mean {mean:.4} (SE {se:.4}, {:.2} SE from 4); martingale max |z| {worst:.2} at {} times; reruns {}",
        (mean - 4.0).abs() / se,
        mart.len(),
        if identical { "bit-identical" } else { "differ" }
    );
    if e.is_valid() && (mean - 4.0).abs() <= 3.0 * se && mart.len() == 5 && worst <= 3.0 && identical {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9() -> Outcome {
    let cases = [
        DomainCase::interval(2.0, 1.0, 4.0),
        DomainCase::line(2.0, 1.0, 1.0),
        DomainCase::line(1.0, 1.0, 1.0),
        DomainCase::half_line(2.0, 1.0, 1.0),
        DomainCase::half_line(1.0, 1.0, 1.0),
    ];
    let mut round: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    let mut paths = Vec::new();
    for c in cases {
        let case = c.map_err(|e| e.to_string())?;
        let tr = Transform::new(case, (-3.0, 3.0)).map_err(|e| e.to_string())?;
        paths.push(format!("{:?}", tr.path));
        // a smooth positive profile in y, so the check does not depend on
        // the physical growth class
        let prof = |y: f64| 1.0 + 0.5 * (1.3 * y).sin() + 0.2 * y * y;
        let mut errs = Vec::new();
        for dy in [0.02, 0.01] {
            let geo = Geometry::new(&tr, Grid::new(-3.0, 3.0, dy).map_err(|e| e.to_string())?);
            let u: Vec<f64> = (0..geo.len()).map(|i| prof(geo.grid.y(i)) * geo.z1[i] * geo.z1[i]).collect();
            let f = u_to_v(&u, &geo, 0.0).map_err(|e| e.to_string())?;
            let back = v_to_u(&f, &geo);
            for (a, b) in u.iter().zip(&back) {
                round = round.max((a - b).abs() / a.abs().max(1e-300));
            }
            // ∂x u and ∂x² u from the identities against centered differences
            // of u(ζ(y)) taken on a much finer y-step
            let p = v_to_u_derivatives(&f, &geo).map_err(|e| e.to_string())?;
            let h = 1e-4;
            let uy = |y: f64| prof(y) * tr.zeta1(y).powi(2);
            let mut e1: f64 = 0.0;
            let mut e2: f64 = 0.0;
            for i in (geo.len() / 4)..(3 * geo.len() / 4) {
                let y = geo.grid.y(i);
                let z1 = tr.zeta1(y);
                let du_dy = (uy(y + h) - uy(y - h)) / (2.0 * h);
                let d2u_dy2 = (uy(y + h) - 2.0 * uy(y) + uy(y - h)) / (h * h);
                let z2 = (tr.zeta1(y + h) - tr.zeta1(y - h)) / (2.0 * h);
                let du = du_dy / z1;
                let d2u = (d2u_dy2 - du * z2) / (z1 * z1);
                e1 = e1.max((p.du[i] - du).abs() / du.abs().max(1.0));
                e2 = e2.max((p.d2u[i] - d2u).abs() / d2u.abs().max(1.0));
            }
            errs.push((e1, e2));
        }
        min_ratio = min_ratio.min((errs[0].0 / errs[1].0).min(errs[0].1 / errs[1].1));
    }
    let msg = format!("round-trip {round:.2e}; derivative error ratio under halving >= {min_ratio:.2} over {paths:?}");
    if round <= 1e-12 && min_ratio >= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let mut lip = LipLog::default();
    let mut zero = Vec::new();
    let mut failed = 0;
    let mut report = |id: &str, name: &str, budget: u64, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let out = f();
        let el = t0.elapsed();
        let over = el > Duration::from_secs(budget);
        let (ok, msg) = match out {
            Ok(m) => (!over, m),
            Err(m) => (false, m),
        };
        if !ok {
            failed += 1;
        }
        let timing = format!("{:.1}s of {budget}s{}", el.as_secs_f64(), if over { ", over budget" } else { "" });
        println!("{} {id} {name}: {msg} [{timing}]", if ok { "PASS" } else { "FAIL" });
    };
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('C')).collect();
    let mut report = |id: &str, name: &str, budget: u64, f: &mut dyn FnMut() -> Outcome| {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            return;
        }
        report(id, name, budget, f)
    };
    report("C1", "quadratic blow-up", 30, &mut || c1(&mut lip));
    report("C2", "riccati tracking", 30, &mut || c2(&mut lip));
    report("C3", "early blow-up", 120, &mut c3);
    report("C4", "sandwich", 180, &mut || c4(&mut lip, &mut zero));
    report("C5", "comparison and uniqueness", 180, &mut || c5(&mut lip));
    report("C6", "zero set and cut-paste", 60, &mut || c6(&zero));
    report("C7", "root-Lipschitz", 1, &mut || c7(&lip));
    report("C8", "fbsde decoupling", 60, &mut c8);
    report("C9", "transform algebra", 5, &mut c9);
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}
