//! Scalars the regularity and blow-up statements are phrased in.

use serde::{Deserialize, Serialize};

use crate::barriers::Barrier;
use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::numerics::second_divided;
use crate::transform::{v_to_u_derivatives, FieldPair, Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub t: f64,
    pub lip_sqrt: f64,
    pub q_ratio: f64,
    pub d2_sup: f64,
    pub d2_at_zero: f64,
    /// One-sided ∂x u at the left boundary of I (the r of the formal ODE
    /// system); identically zero for strong solutions.
    pub d1_at_zero: f64,
    pub zero_residual: f64,
    pub barrier_margin: f64,
    /// Barrier margin divided by the local value of u.
    pub barrier_margin_rel: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_max: f64,
}

impl DiagnosticsReport {
    pub const CSV_HEADER: &'static str =
        "t,lip_sqrt,q_ratio,d2_sup,d2_at_zero,zero_residual,barrier_margin";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.lip_sqrt,
            self.q_ratio,
            self.d2_sup,
            self.d2_at_zero,
            self.zero_residual,
            self.barrier_margin
        )
    }

    /// Root-Lipschitz check: lip² ≤ sup|∂x²u| + 10·dy·max(1, sup|∂x²u|).
    pub fn root_lip_slack(&self, dy: f64) -> f64 {
        let scale = self.d2_sup.max(1.0);
        self.d2_sup + 10.0 * dy * scale - self.lip_sqrt * self.lip_sqrt
    }
}

/// max over adjacent node pairs of |√u_{i+1} − √u_i| / (x_{i+1} − x_i).
pub fn lip_sqrt_estimate(x: &[f64], u: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..x.len().saturating_sub(1) {
        let dx = x[i + 1] - x[i];
        if dx > 0.0 {
            m = m.max((u[i + 1].max(0.0).sqrt() - u[i].max(0.0).sqrt()).abs() / dx);
        }
    }
    m
}

/// Closed-form Riccati curve s(t) = 2/(2/s0 − t).
pub fn riccati_reference(s0: f64, t: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::InvalidInput(format!("riccati_reference needs s0 > 0, got {s0}")));
    }
    let tb = 2.0 / s0;
    if t >= tb {
        return Err(Error::PastBlowup { t, blowup: tb });
    }
    Ok(2.0 / (tb - t))
}

/// sup x⁻²u (half-line) or d(x)⁻²u (interval) over nodes with distance at
/// least `guard` from the boundary.
pub fn q_functional(x: &[f64], u: &[f64], case: &DomainCase, guard: f64) -> Result<f64> {
    if matches!(case.kind, CaseKind::WholeLine { .. }) {
        return Err(Error::WrongCase("q_functional"));
    }
    let mut m: f64 = 0.0;
    for (&xi, &ui) in x.iter().zip(u) {
        let d = case.dist(xi);
        if d >= guard && d > 0.0 {
            m = m.max(ui / (d * d));
        }
    }
    Ok(m)
}

/// Running maximum of a per-snapshot series.
pub fn running_max(xs: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    xs.iter()
        .map(|&x| {
            m = m.max(x);
            m
        })
        .collect()
}

/// Per-snapshot diagnostics over the trust-region node range `[lo, hi]`.
pub fn compute_report(
    field: &FieldPair,
    geo: &Geometry,
    case: &DomainCase,
    trust: (usize, usize),
    barriers: Option<&(Barrier, Barrier)>,
) -> Result<DiagnosticsReport> {
    let p = v_to_u_derivatives(field, geo)?;
    let n = field.v.len();
    let (lo, hi) = trust;
    let nan = f64::NAN;
    let mut r = DiagnosticsReport {
        t: field.t,
        lip_sqrt: nan,
        q_ratio: nan,
        d2_sup: nan,
        d2_at_zero: nan,
        d1_at_zero: nan,
        zero_residual: 0.0,
        barrier_margin: nan,
        barrier_margin_rel: nan,
        v_min: nan,
        v_max: nan,
        u_max: nan,
    };
    match case.kind {
        CaseKind::BoundedInterval { .. } => r.zero_residual = p.u[0].abs().max(p.u[n - 1].abs()),
        CaseKind::HalfLine { .. } => r.zero_residual = p.u[0].abs(),
        CaseKind::WholeLine { .. } => {}
    }
    if hi < lo + 2 {
        return Ok(r);
    }
    let xs = &p.x[lo..=hi];
    let us = &p.u[lo..=hi];
    r.lip_sqrt = lip_sqrt_estimate(xs, us);
    r.d2_sup = p.d2u[lo..=hi].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    r.v_min = field.v[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
    r.v_max = field.v[lo..=hi].iter().cloned().fold(0.0, f64::max);
    r.u_max = us.iter().cloned().fold(0.0, f64::max);
    r.q_ratio = match case.kind {
        CaseKind::WholeLine { .. } => (lo..=hi).map(|i| p.u[i] / (1.0 + p.x[i] * p.x[i])).fold(0.0, f64::max),
        _ => (lo..=hi)
            .filter(|&i| geo.d_over_z1[i] > 0.0)
            .map(|i| field.v[i] / (geo.d_over_z1[i] * geo.d_over_z1[i]))
            .fold(0.0, f64::max),
    };
    if case.has_left_boundary() {
        let xx = [p.x[lo], p.x[lo + 1], p.x[lo + 2]];
        let uu = [p.u[lo], p.u[lo + 1], p.u[lo + 2]];
        r.d2_at_zero = second_divided(xx, uu);
        // first derivative of the interpolating parabola, extrapolated to x = 0
        let d01 = (uu[1] - uu[0]) / (xx[1] - xx[0]);
        r.d1_at_zero = d01 + 0.5 * r.d2_at_zero * (-xx[0] - xx[1]);
    }
    if let Some((sub, sup)) = barriers {
        let mut m = f64::INFINITY;
        let mut mr = f64::INFINITY;
        for i in lo..=hi {
            let (x, u) = (p.x[i], p.u[i]);
            let a = sup.eval(field.t, x) - u;
            let b = u - sub.eval(field.t, x);
            let lm = a.min(b);
            m = m.min(lm);
            if u > 0.0 {
                mr = mr.min(lm / u);
            }
        }
        r.barrier_margin = m;
        r.barrier_margin_rel = mr;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn lip_examples() {
        let x = grid(0.0, 3.0, 301);
        let sq: Vec<f64> = x.iter().map(|x| x * x).collect();
        assert!((lip_sqrt_estimate(&x, &sq) - 1.0).abs() < 1e-12);
        let four = vec![4.0; x.len()];
        assert_eq!(lip_sqrt_estimate(&x, &four), 0.0);
        let nine: Vec<f64> = x.iter().map(|x| 9.0 * x * x).collect();
        assert!((lip_sqrt_estimate(&x, &nine) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn riccati_examples() {
        assert_eq!(riccati_reference(2.0, 0.5).unwrap(), 4.0);
        assert_eq!(riccati_reference(2.0, 0.0).unwrap(), 2.0);
        assert!((riccati_reference(4.0, 0.49).unwrap() - 200.0).abs() < 1e-9);
        assert!(riccati_reference(4.0, 0.5).is_err());
    }

    #[test]
    fn q_examples() {
        let c = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let x = grid(0.0, 4.0, 401);
        let dy = 0.01;
        let u: Vec<f64> = x.iter().map(|x| 3.0 * x * x).collect();
        assert!((q_functional(&x, &u, &c, dy).unwrap() - 3.0).abs() < 1e-12);
        let t = 0.75;
        let u: Vec<f64> = x.iter().map(|x| x * x / (1.0 - t)).collect();
        assert!((q_functional(&x, &u, &c, dy).unwrap() - 4.0).abs() < 1e-12);
        // localized bump on top of κx²
        let u: Vec<f64> = x
            .iter()
            .map(|&x| x * x + if (1.0..2.0).contains(&x) { 0.3 * ((x - 1.0) * (2.0 - x)) } else { 0.0 })
            .collect();
        let direct = x
            .iter()
            .zip(&u)
            .filter(|(x, _)| **x >= dy)
            .map(|(x, u)| u / (x * x))
            .fold(0.0, f64::max);
        let q = q_functional(&x, &u, &c, dy).unwrap();
        assert_eq!(q, direct);
        assert!(q > 1.0);
        assert!(q_functional(&x, &u, &DomainCase::line(2.0, 1.0, 1.0).unwrap(), dy).is_err());
    }

    #[test]
    fn running_max_is_monotone() {
        assert_eq!(running_max(&[1.0, 3.0, 2.0, 5.0]), vec![1.0, 3.0, 3.0, 5.0]);
    }
}
