//! Closed-form sub- and supersolutions.

mod g_profile;

pub use g_profile::{GProfile, Piece, Tail};

use serde::{Deserialize, Serialize};

use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::numerics::{golden_max, jb};

/// NH[f] = ∂t f − ½ f ∂x² f.
pub fn nh_residual(f: &dyn Fn(f64, f64) -> f64, t: f64, x: f64, h: f64, k: f64) -> f64 {
    let ft = (f(t + k, x) - f(t - k, x)) / (2.0 * k);
    let c = f(t, x);
    let fxx = (f(t, x + h) - 2.0 * c + f(t, x - h)) / (h * h);
    ft - 0.5 * c * fxx
}

/// a(t) = 2 − 1/(t + 1).
pub fn a_of_t(t: f64) -> f64 {
    2.0 - 1.0 / (t + 1.0)
}

/// Quadratic solution Q(t, x) = (ax² + bx + c)/(1 − at).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn blowup_time(&self) -> Option<f64> {
        (self.a > 0.0).then(|| 1.0 / self.a)
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        if let Some(tb) = self.blowup_time() {
            if t >= tb {
                return Err(Error::PastBlowup { t, blowup: tb });
            }
        }
        Ok((self.a * x * x + self.b * x + self.c) / (1.0 - self.a * t))
    }
}

pub fn quadratic_solution(a: f64, b: f64, c: f64) -> Quadratic {
    Quadratic { a, b, c }
}

/// Barrier identity and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BarrierKind {
    /// min over the mirrored pair of (x² + κ⁻¹ε)/(κ⁻¹ − t).
    IntervalSuper { kappa: f64, eps: f64, length: f64 },
    /// (G + ε)/(2(t + K)).
    ProfileSub { profile: GProfile, k: f64, eps: f64 },
    /// K⁻¹⟨x⟩².
    LineQuadSub { k: f64 },
    /// (x² + κ⁻¹K)/(κ⁻¹ − t).
    LineQuadSuper { kappa: f64, k: f64 },
    /// ⟨x⟩^γ/(t + K).
    LinePowerSub { gamma: f64, k: f64 },
    /// K a(t)⟨x⟩^γ + D e^{3Kt}.
    LinePowerSuper { gamma: f64, k: f64, d: f64 },
    /// min((x² + κ⁻¹ε)/(κ⁻¹ − t), K a(t)⟨x⟩^γ + D e^{3Kt}); the second
    /// member is absent for γ = 2.
    HalfSuper { kappa: f64, eps: f64, power: Option<(f64, f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub kind: BarrierKind,
    pub is_super: bool,
}

fn power_super(gamma: f64, k: f64, d: f64, t: f64, x: f64) -> f64 {
    k * a_of_t(t) * jb(x).powf(gamma) + d * (3.0 * k * t).exp()
}

impl Barrier {
    /// Last time at which the barrier is defined (exclusive), if finite.
    pub fn horizon(&self) -> Option<f64> {
        match &self.kind {
            BarrierKind::IntervalSuper { kappa, .. }
            | BarrierKind::LineQuadSuper { kappa, .. }
            | BarrierKind::HalfSuper { kappa, .. } => Some(1.0 / kappa),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match &self.kind {
            BarrierKind::IntervalSuper { kappa, eps, length } => {
                let d = x.min(length - x);
                (d * d + eps / kappa) / (1.0 / kappa - t)
            }
            BarrierKind::ProfileSub { profile, k, eps } => (profile.eval(x) + eps) / (2.0 * (t + k)),
            BarrierKind::LineQuadSub { k } => (1.0 + x * x) / k,
            BarrierKind::LineQuadSuper { kappa, k } => (x * x + k / kappa) / (1.0 / kappa - t),
            BarrierKind::LinePowerSub { gamma, k } => jb(x).powf(*gamma) / (t + k),
            BarrierKind::LinePowerSuper { gamma, k, d } => power_super(*gamma, *k, *d, t, x),
            BarrierKind::HalfSuper { kappa, eps, power } => {
                let q = (x * x + eps / kappa) / (1.0 / kappa - t);
                match power {
                    Some((g, k, d)) => q.min(power_super(*g, *k, *d, t, x)),
                    None => q,
                }
            }
        }
    }

    /// Check the sign of NH on an `nt × nx` grid over `[0, t_max] × [x_lo, x_hi]`.
    /// Returns the worst normalized residual net of the finite-difference
    /// rounding floor (negative means the barrier property holds with margin).
    pub fn verify(&self, t_max: f64, x_lo: f64, x_hi: f64, nt: usize, nx: usize) -> Result<f64> {
        let sign = if self.is_super { -1.0 } else { 1.0 };
        let tmax = match self.horizon() {
            Some(h) => t_max.min(0.95 * h),
            None => t_max,
        };
        let span = x_hi - x_lo;
        let k = 1e-5 * tmax.max(1e-3);
        let f = |t: f64, x: f64| self.eval(t, x);
        let mut worst = f64::NEG_INFINITY;
        for it in 0..nt {
            let t = k + (tmax - 2.0 * k) * it as f64 / (nt - 1).max(1) as f64;
            for ix in 0..nx {
                let x = x_lo + span * (ix as f64 + 0.5) / nx as f64;
                let h = 1e-3 * x.abs().max(1e-3 * span).min(1.0);
                let c = f(t, x);
                let ft = (f(t + k, x) - f(t - k, x)) / (2.0 * k);
                let fxx = (f(t, x + h) - 2.0 * c + f(t, x - h)) / (h * h);
                let scale = ft.abs() + (0.5 * c * fxx).abs() + 1e-300;
                let r = sign * nh_residual(&f, t, x, h, k) / scale;
                // rounding floor of the centered second difference; large
                // additive constants (D e^{3Kt}) make it dominate at small h
                let floor = 2.0 * f64::EPSILON * c.abs() * c.abs() / (h * h) / scale;
                worst = worst.max(r - floor);
                if r > 1e-6 + floor {
                    return Err(Error::InvalidInput(format!(
                        "barrier {:?} violates its NH sign at (t={t}, x={x}): {r}",
                        self.kind
                    )));
                }
            }
        }
        Ok(worst)
    }
}

/// Smallest D (up to 1% slack) with D e^{Kt} ≥ K[4K(t+1)²]^{4/(2−γ)} for
/// all t ≥ 0, inflated ×1.01.
pub fn compute_d(k: f64, gamma: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("compute_D needs gamma in [0, 2), got {gamma}")));
    }
    if k < 1.0 {
        return Err(Error::InvalidInput(format!("compute_D needs K >= 1, got {k}")));
    }
    let e = 4.0 / (2.0 - gamma);
    // log of K[4K(t+1)²]^e e^{−Kt}; concave in t, so a grid bracket plus
    // golden section finds the global maximum.
    let logf = |t: f64| k.ln() + e * (4.0 * k).ln() + 2.0 * e * (1.0 + t).ln() - k * t;
    let t_hi = 10.0 * (2.0 * e / k) + 10.0;
    let n = 2000;
    let mut best = (0usize, logf(0.0));
    for i in 1..=n {
        let v = logf(t_hi * i as f64 / n as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = t_hi * best.0.saturating_sub(1) as f64 / n as f64;
    let b = t_hi * (best.0 + 1).min(n) as f64 / n as f64;
    let (_, m) = golden_max(logf, a, b, 1e-12);
    let m = m.max(best.1);
    let log_d = m + 1.01f64.ln();
    if log_d > 700.0 {
        return Err(Error::Overflow(format!("D(K={k}, gamma={gamma}) = exp({log_d})")));
    }
    Ok(log_d.exp())
}

fn need_half(case: &DomainCase) -> Result<f64> {
    match case.kind {
        CaseKind::HalfLine { gamma } => Ok(gamma),
        _ => Err(Error::WrongCase("half_line_barriers")),
    }
}

pub fn interval_barriers(case: &DomainCase, eps: f64) -> Result<(Barrier, Barrier)> {
    let CaseKind::BoundedInterval { length } = case.kind else {
        return Err(Error::WrongCase("interval_barriers"));
    };
    let sub = Barrier {
        kind: BarrierKind::ProfileSub { profile: GProfile::interval(length), k: case.k, eps },
        is_super: false,
    };
    let sup = Barrier { kind: BarrierKind::IntervalSuper { kappa: case.kappa, eps, length }, is_super: true };
    Ok((sub, sup))
}

pub fn line_barriers(case: &DomainCase) -> Result<(Barrier, Barrier)> {
    let CaseKind::WholeLine { gamma } = case.kind else {
        return Err(Error::WrongCase("line_barriers"));
    };
    let k = case.k;
    if gamma == 2.0 {
        Ok((
            Barrier { kind: BarrierKind::LineQuadSub { k }, is_super: false },
            Barrier { kind: BarrierKind::LineQuadSuper { kappa: case.kappa, k }, is_super: true },
        ))
    } else {
        let d = compute_d(k, gamma)?;
        Ok((
            Barrier { kind: BarrierKind::LinePowerSub { gamma, k }, is_super: false },
            Barrier { kind: BarrierKind::LinePowerSuper { gamma, k, d }, is_super: true },
        ))
    }
}

pub fn half_line_barriers(case: &DomainCase, eps: f64) -> Result<(Barrier, Barrier)> {
    let gamma = need_half(case)?;
    let k = case.k;
    let power = if gamma < 2.0 { Some((gamma, k, compute_d(k, gamma)?)) } else { None };
    Ok((
        Barrier { kind: BarrierKind::ProfileSub { profile: GProfile::half_line(gamma)?, k, eps }, is_super: false },
        Barrier { kind: BarrierKind::HalfSuper { kappa: case.kappa, eps, power }, is_super: true },
    ))
}

/// Barrier pair for any case.
pub fn barriers_for(case: &DomainCase, eps: f64) -> Result<(Barrier, Barrier)> {
    match case.kind {
        CaseKind::BoundedInterval { .. } => interval_barriers(case, eps),
        CaseKind::WholeLine { .. } => line_barriers(case),
        CaseKind::HalfLine { .. } => half_line_barriers(case, eps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_examples() {
        assert_eq!(quadratic_solution(1.0, 0.0, 0.0).eval(0.5, 2.0).unwrap(), 8.0);
        assert_eq!(quadratic_solution(0.0, 0.0, 5.0).eval(123.0, -7.0).unwrap(), 5.0);
        let q = quadratic_solution(2.0, 1.0, 1.0);
        let f = |t: f64, x: f64| q.eval(t, x).unwrap();
        assert!(nh_residual(&f, 0.25, 1.0, 1e-3, 1e-5).abs() < 1e-6);
        assert_eq!(q.eval(0.5, 0.0).unwrap_err(), Error::PastBlowup { t: 0.5, blowup: 0.5 });
    }

    #[test]
    fn interval_super_at_origin_time() {
        let c = DomainCase::interval(2.0, 1.0, 1.0).unwrap();
        let (_, sup) = interval_barriers(&c, 0.0).unwrap();
        assert_eq!(sup.eval(0.0, 1.0), 1.0);
    }

    #[test]
    fn line_examples() {
        let c = DomainCase::line(2.0, 1.0, 1.0).unwrap();
        let (_, sup) = line_barriers(&c).unwrap();
        assert_eq!(sup.eval(0.5, 0.0), 2.0);
        let c0 = DomainCase::line(0.0, 1.0, 3.0).unwrap();
        let (sub, _) = line_barriers(&c0).unwrap();
        assert_eq!(sub.eval(0.0, 17.0), 1.0 / 3.0);
        assert!(line_barriers(&DomainCase::half_line(1.0, 1.0, 1.0).unwrap()).is_err());
        assert!(interval_barriers(&c, 0.0).is_err());
        assert!(half_line_barriers(&c, 0.0).is_err());
    }

    #[test]
    fn half_line_example() {
        let c = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let (sub, sup) = half_line_barriers(&c, 0.0).unwrap();
        assert_eq!(sup.eval(0.5, 1.0), 2.0);
        assert!((sub.eval(0.2, 1e-3) / (1e-6 / (2.0 * 1.2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compute_d_matches_closed_form_maximizer() {
        // max at t + 1 = 8/(K(2−γ)) when that exceeds 1
        for &(k, g) in &[(1.0, 0.0), (1.0, 1.0), (2.0, 0.5), (1.5, 1.5)] {
            let d = compute_d(k, g).unwrap();
            let e = 4.0 / (2.0 - g);
            let ts = (8.0 / (k * (2.0 - g)) - 1.0).max(0.0);
            let exact = k * (4.0 * k * (1.0 + ts).powi(2)).powf(e) * (-k * ts).exp();
            assert!((d / (1.01 * exact) - 1.0).abs() < 1e-9, "{k} {g}");
        }
        assert!((compute_d(1.0, 0.0).unwrap() / 1.01 - 4096.0 * (-3f64).exp()).abs() < 1e-8);
        assert!(compute_d(1.0, 2.0).is_err());
        assert!(matches!(compute_d(1.0, 1.999), Err(Error::Overflow(_))));
    }

    #[test]
    fn all_barriers_pass_verification() {
        let cases = [
            DomainCase::interval(1.5, 2.0, 3.0).unwrap(),
            DomainCase::line(2.0, 1.0, 2.0).unwrap(),
            DomainCase::line(1.0, 1.0, 2.0).unwrap(),
            DomainCase::line(0.0, 1.0, 1.0).unwrap(),
            DomainCase::half_line(2.0, 1.0, 1.0).unwrap(),
            DomainCase::half_line(1.0, 1.0, 2.0).unwrap(),
        ];
        for c in cases {
            let (sub, sup) = barriers_for(&c, 0.01).unwrap();
            let (lo, hi) = match c.kind {
                CaseKind::BoundedInterval { length } => (0.0, length),
                CaseKind::WholeLine { .. } => (-20.0, 20.0),
                CaseKind::HalfLine { .. } => (0.0, 20.0),
            };
            sub.verify(0.9, lo, hi, 16, 128).unwrap();
            sup.verify(0.9, lo, hi, 16, 128).unwrap();
        }
    }
}
