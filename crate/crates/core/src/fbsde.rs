//! Monte Carlo for the forward SDE dX = √u(T − t, X) dB driven by a solved
//! field, and checks of the decoupling identity
//! u(T − t, x) = E[u0(X(T)) | X(t) = x].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::solver::SolveResult;
use crate::transform::v_to_u;

/// A field √u(t, x) that may be undefined outside a trusted region.
pub trait SqrtField: Sync {
    fn sqrt_u(&self, t: f64, x: f64) -> Option<f64>;
    /// Largest time covered.
    fn horizon(&self) -> f64;

    fn u(&self, t: f64, x: f64) -> Option<f64> {
        self.sqrt_u(t, x).map(|s| s * s)
    }
}

/// √u interpolated bilinearly in (t, x) from solver snapshots, restricted to
/// each snapshot's trusted nodes.
#[derive(Debug, Clone)]
pub struct SnapshotField {
    times: Vec<f64>,
    xs: Vec<Vec<f64>>,
    roots: Vec<Vec<f64>>,
}

impl SnapshotField {
    pub fn from_result(res: &SolveResult) -> Result<Self> {
        if res.trajectory.len() < 2 {
            return Err(Error::InvalidInput("trajectory needs at least two snapshots".into()));
        }
        let mut f = SnapshotField { times: Vec::new(), xs: Vec::new(), roots: Vec::new() };
        for (snap, &(lo, hi)) in res.trajectory.iter().zip(&res.trust) {
            let u = v_to_u(snap, &res.geometry);
            f.times.push(snap.t);
            f.xs.push(res.geometry.x[lo..=hi].to_vec());
            f.roots.push(u[lo..=hi].iter().map(|u| u.max(0.0).sqrt()).collect());
        }
        Ok(f)
    }

    fn at_snapshot(&self, k: usize, x: f64) -> Option<f64> {
        let xs = &self.xs[k];
        let n = xs.len();
        if n < 2 || x < xs[0] || x > xs[n - 1] {
            return None;
        }
        let i = xs.partition_point(|&p| p <= x).clamp(1, n - 1) - 1;
        let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
        Some(self.roots[k][i] * (1.0 - w) + self.roots[k][i + 1] * w)
    }
}

impl SqrtField for SnapshotField {
    fn sqrt_u(&self, t: f64, x: f64) -> Option<f64> {
        let n = self.times.len();
        if t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let a = self.at_snapshot(k, x)?;
        let b = self.at_snapshot(k + 1, x)?;
        Some(a * (1.0 - w) + b * w)
    }

    fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// A closed-form field, for oracles.
pub struct FnField<F: Fn(f64, f64) -> f64 + Sync> {
    pub u: F,
    pub horizon: f64,
}

impl<F: Fn(f64, f64) -> f64 + Sync> SqrtField for FnField<F> {
    fn sqrt_u(&self, t: f64, x: f64) -> Option<f64> {
        (t <= self.horizon).then(|| (self.u)(t, x).max(0.0).sqrt())
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub x0: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    #[serde(default = "d_paths")]
    pub n_paths: usize,
    /// Defaults to T/2000.
    #[serde(default)]
    pub dt_sde: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Times at which X(t) is recorded, in [0, T].
    #[serde(default)]
    pub record_times: Vec<f64>,
}

fn d_paths() -> usize {
    100_000
}

/// Paths of the forward SDE with recorded states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub dt_sde: f64,
    pub x0: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    pub rng_seed: u64,
    pub record_times: Vec<f64>,
    /// X(record_times[k]) for each path, indexed [k][path].
    pub recorded: Vec<Vec<f64>>,
    pub terminal_x: Vec<f64>,
    pub terminal_values: Vec<f64>,
    /// Per-path ∫₀ᵀ u(T − s, X(s)) ds (left-point rule).
    pub quad_variation: Vec<f64>,
    pub exited: Vec<bool>,
    pub exit_fraction: f64,
}

impl PathEnsemble {
    pub fn is_valid(&self) -> bool {
        self.exit_fraction < 0.01
    }
}

/// Sample mean and standard error over a set of values.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (m, (var / n).sqrt())
}

struct PathOut {
    recorded: Vec<f64>,
    x_t: f64,
    value: f64,
    qv: f64,
    exited: bool,
}

fn one_path(field: &dyn SqrtField, cfg: &EnsembleConfig, dt: f64, steps: usize, record_at: &[usize], path: u64) -> PathOut {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let t_h = cfg.t_horizon;
    let sqdt = dt.sqrt();
    let mut x = cfg.x0;
    let mut qv = 0.0;
    let mut exited = false;
    let mut recorded = vec![f64::NAN; record_at.len()];
    let mut r = 0;
    let mut n = 0;
    loop {
        while r < record_at.len() && record_at[r] == n {
            recorded[r] = x;
            r += 1;
        }
        if n == steps {
            break;
        }
        match field.sqrt_u(t_h - n as f64 * dt, x) {
            Some(s) => {
                qv += s * s * dt;
                let z: f64 = StandardNormal.sample(&mut rng);
                x += s * sqdt * z;
            }
            None => {
                exited = true;
                // a flagged path stays where it left
                recorded[r..].fill(x);
                break;
            }
        }
        n += 1;
    }
    let value = if exited { f64::NAN } else { field.u(0.0, x).unwrap_or(f64::NAN) };
    let exited = exited || value.is_nan();
    PathOut { recorded, x_t: x, value, qv, exited }
}

/// Euler–Maruyama paths of dX = √u(T − t, X) dB. Path `i` draws from the
/// ChaCha8 stream `(seed, i)`, so results do not depend on thread count.
pub fn simulate_paths(field: &dyn SqrtField, cfg: &EnsembleConfig) -> Result<PathEnsemble> {
    let t_h = cfg.t_horizon;
    if !(t_h > 0.0) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t_h}")));
    }
    if t_h > field.horizon() * (1.0 + 1e-12) {
        return Err(Error::Horizon { t: t_h, horizon: field.horizon() });
    }
    if cfg.n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be positive".into()));
    }
    if field.sqrt_u(t_h, cfg.x0).is_none() {
        return Err(Error::InvalidInput(format!("x0 = {} is outside the trusted region", cfg.x0)));
    }
    let dt0 = cfg.dt_sde.unwrap_or(t_h / 2000.0);
    if !(dt0 > 0.0) {
        return Err(Error::InvalidInput(format!("dt_sde must be positive, got {dt0}")));
    }
    let steps = (t_h / dt0).round().max(1.0) as usize;
    let dt = t_h / steps as f64;
    let mut record_at = Vec::new();
    for &t in &cfg.record_times {
        if !(0.0..=t_h).contains(&t) {
            return Err(Error::InvalidInput(format!("record time {t} outside [0, {t_h}]")));
        }
        record_at.push((t / dt).round() as usize);
    }
    if record_at.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("record times must be nondecreasing".into()));
    }
    let outs: Vec<PathOut> =
        (0..cfg.n_paths as u64).into_par_iter().map(|p| one_path(field, cfg, dt, steps, &record_at, p)).collect();
    let mut e = PathEnsemble {
        n_paths: cfg.n_paths,
        dt_sde: dt,
        x0: cfg.x0,
        t_horizon: t_h,
        rng_seed: cfg.seed,
        record_times: record_at.iter().map(|&n| n as f64 * dt).collect(),
        recorded: vec![Vec::with_capacity(cfg.n_paths); record_at.len()],
        terminal_x: Vec::with_capacity(cfg.n_paths),
        terminal_values: Vec::with_capacity(cfg.n_paths),
        quad_variation: Vec::with_capacity(cfg.n_paths),
        exited: Vec::with_capacity(cfg.n_paths),
        exit_fraction: 0.0,
    };
    let mut n_exit = 0usize;
    for o in outs {
        for (k, x) in o.recorded.into_iter().enumerate() {
            e.recorded[k].push(x);
        }
        e.terminal_x.push(o.x_t);
        e.terminal_values.push(o.value);
        e.quad_variation.push(o.qv);
        e.exited.push(o.exited);
        n_exit += o.exited as usize;
    }
    e.exit_fraction = n_exit as f64 / cfg.n_paths as f64;
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinResidual {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_terminal: f64,
    pub mean_field: f64,
    pub se: f64,
    pub standardized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub t_check: f64,
    pub bins: Vec<BinResidual>,
    pub max_standardized: f64,
    pub inconclusive: bool,
}

/// Minimum paths in a bin for it to count.
pub const MIN_BIN: usize = 500;

/// Compare E[u0(X(T)) | X(t) ∈ bin] with the within-bin average of
/// u(T − t, X(t)). The residual is standardized by the standard error of the
/// per-path difference.
pub fn check_decoupling(e: &PathEnsemble, field: &dyn SqrtField, record_index: usize, x_bins: usize) -> Result<DecouplingReport> {
    if !e.is_valid() {
        return Err(Error::InvalidInput(format!("ensemble invalid: exit fraction {}", e.exit_fraction)));
    }
    let xs = e.recorded.get(record_index).ok_or_else(|| Error::InvalidInput(format!("no record {record_index}")))?;
    let t = e.record_times[record_index];
    let tau = e.t_horizon - t;
    let live: Vec<usize> = (0..e.n_paths).filter(|&i| !e.exited[i]).collect();
    let lo = live.iter().map(|&i| xs[i]).fold(f64::INFINITY, f64::min);
    let hi = live.iter().map(|&i| xs[i]).fold(f64::NEG_INFINITY, f64::max);
    let nb = if hi > lo { x_bins.max(1) } else { 1 };
    let width = if hi > lo { (hi - lo) / nb as f64 } else { 1.0 };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for &i in &live {
        let b = (((xs[i] - lo) / width) as usize).min(nb - 1);
        members[b].push(i);
    }
    let mut bins = Vec::new();
    let mut worst: f64 = 0.0;
    for (b, m) in members.iter().enumerate() {
        if m.len() < MIN_BIN {
            continue;
        }
        let g: Vec<f64> = m.iter().map(|&i| e.terminal_values[i]).collect();
        let f: Vec<f64> = m.iter().map(|&i| field.u(tau, xs[i]).unwrap_or(f64::NAN)).collect();
        let d: Vec<f64> = g.iter().zip(&f).map(|(a, b)| a - b).collect();
        let (md, se) = mean_se(&d);
        let z = if se > 0.0 { md / se } else if md == 0.0 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z.abs());
        bins.push(BinResidual {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count: m.len(),
            mean_terminal: mean_se(&g).0,
            mean_field: mean_se(&f).0,
            se,
            standardized: z,
        });
    }
    Ok(DecouplingReport { t_check: t, inconclusive: bins.is_empty(), bins, max_standardized: worst })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingalePoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub standardized: f64,
}

/// Y(t) = u(T − t, X(t)) at each recorded time, against Y(0) = u(T, x0).
pub fn martingale_check(e: &PathEnsemble, field: &dyn SqrtField) -> Vec<MartingalePoint> {
    let y0 = field.u(e.t_horizon, e.x0).unwrap_or(f64::NAN);
    e.record_times
        .iter()
        .zip(&e.recorded)
        .map(|(&t, xs)| {
            let ys: Vec<f64> = xs
                .iter()
                .zip(&e.exited)
                .filter(|(_, ex)| !**ex)
                .map(|(&x, _)| field.u(e.t_horizon - t, x).unwrap_or(f64::NAN))
                .collect();
            let (m, se) = mean_se(&ys);
            let z = if se > 0.0 { (m - y0) / se } else if m == y0 { 0.0 } else { f64::INFINITY };
            MartingalePoint { t, mean: m, se, standardized: z }
        })
        .collect()
}

/// E[(X(T) − x0)² − ∫u ds] / SE, which is 0 in expectation by the Itô isometry.
pub fn isometry_check(e: &PathEnsemble) -> (f64, f64, f64) {
    let d: Vec<f64> = (0..e.n_paths)
        .filter(|&i| !e.exited[i])
        .map(|i| (e.terminal_x[i] - e.x0).powi(2) - e.quad_variation[i])
        .collect();
    let (m, se) = mean_se(&d);
    (m, se, if se > 0.0 { m / se } else { 0.0 })
}

/// Length-prefixed little-endian f64 dump.
pub fn encode_values(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * values.len());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_values(bytes: &[u8]) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput("malformed value dump".into());
    let n = u64::from_le_bytes(bytes.get(..8).ok_or_else(bad)?.try_into().map_err(|_| bad())?) as usize;
    if bytes.len() != 8 + 8 * n {
        return Err(bad());
    }
    Ok(bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> EnsembleConfig {
        EnsembleConfig { x0: 1.0, t_horizon: 0.5, n_paths: n, dt_sde: Some(0.5 / 200.0), seed: 7, record_times: vec![0.0, 0.25, 0.5] }
    }

    #[test]
    fn constant_field_variance() {
        let c = 0.8;
        let f = FnField { u: |_, _| c, horizon: 1.0 };
        let e = simulate_paths(&f, &cfg(20_000)).unwrap();
        let dev: Vec<f64> = e.terminal_x.iter().map(|x| (x - 1.0).powi(2)).collect();
        let (m, se) = mean_se(&dev);
        assert!((m - c * 0.5).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn zero_field_gives_zero_terminal_values() {
        let f = FnField { u: |_, _| 0.0, horizon: 1.0 };
        let e = simulate_paths(&f, &cfg(100)).unwrap();
        assert!(e.terminal_values.iter().all(|&v| v == 0.0));
        assert!(e.terminal_x.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let f = FnField { u: |t, x| (x * x + 1.0) / (1.0 - t), horizon: 0.9 };
        let a = simulate_paths(&f, &cfg(500)).unwrap();
        let b = simulate_paths(&f, &cfg(500)).unwrap();
        let bits = |e: &PathEnsemble| e.terminal_values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = simulate_paths(&f, &EnsembleConfig { seed: 8, ..cfg(500) }).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn decoupling_at_terminal_time_is_exact() {
        let f = FnField { u: |t, x| (x * x + 1.0) / (1.0 - t), horizon: 0.9 };
        let e = simulate_paths(&f, &cfg(2000)).unwrap();
        let r = check_decoupling(&e, &f, 2, 2).unwrap();
        assert!(!r.inconclusive);
        assert_eq!(r.max_standardized, 0.0);
        let r0 = check_decoupling(&e, &f, 0, 10).unwrap();
        assert_eq!(r0.bins.len(), 1);
    }

    #[test]
    fn horizon_and_start_checks() {
        let f = FnField { u: |_, _| 1.0, horizon: 0.4 };
        assert!(matches!(simulate_paths(&f, &cfg(10)), Err(Error::Horizon { .. })));
    }

    #[test]
    fn dump_round_trip() {
        let v = vec![1.0, -2.5, f64::MAX];
        assert_eq!(decode_values(&encode_values(&v)).unwrap(), v);
        assert!(decode_values(&[1, 2, 3]).is_err());
    }
}
