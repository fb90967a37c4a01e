use serde::{Deserialize, Serialize};

use crate::diagnostics::lip_sqrt_estimate;
use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::numerics::jb;

/// Largest K accepted as "finite" on a grid.
pub const K_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Admissible,
    Violated { node: usize, x: f64, bound: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCertificate {
    pub case: DomainCase,
    #[serde(rename = "K_found")]
    pub k_found: f64,
    pub lip_sqrt_u0: f64,
    pub verdict: Verdict,
}

impl HypothesisCertificate {
    pub fn is_admissible(&self) -> bool {
        self.verdict == Verdict::Admissible
    }
}

/// Smallest K ≥ 1 for which the growth bounds of H(κ,γ) hold at every node.
///
/// Each bound is linear in K or K⁻¹, so the minimal K is the maximum of the
/// per-node requirements; no search is needed. Bounds that do not involve K
/// (the κ caps) are checked directly.
pub fn validate_hypothesis(x: &[f64], u0: &[f64], case: &DomainCase) -> Result<HypothesisCertificate> {
    if x.len() != u0.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: u0.len() });
    }
    if let Some((i, &u)) = u0.iter().enumerate().find(|(_, u)| !(**u >= 0.0)) {
        return Err(Error::NegativeValue { index: i, value: u });
    }
    let kappa = case.kappa;
    let cap_tol = 1.0 + 1e-12;
    let mut k_need: f64 = 1.0;
    let mut k_arg = (0usize, "lower");
    let mut need = |k: f64, i: usize, which: &'static str| {
        if !(k <= k_need) {
            k_need = k;
            k_arg = (i, which);
        }
    };
    let violated = |i: usize, bound: &str| Verdict::Violated { node: i, x: x[i], bound: bound.to_string() };
    let mut verdict = Verdict::Admissible;
    for (i, (&xi, &ui)) in x.iter().zip(u0).enumerate() {
        let inside = match case.kind {
            CaseKind::BoundedInterval { length } => xi > 0.0 && xi < length,
            CaseKind::HalfLine { .. } => xi > 0.0,
            CaseKind::WholeLine { .. } => true,
        };
        if !inside {
            if ui != 0.0 {
                verdict = violated(i, "zero outside I");
                break;
            }
            continue;
        }
        match case.kind {
            CaseKind::BoundedInterval { .. } => {
                let d2 = case.dist(xi).powi(2);
                if ui > kappa * d2 * cap_tol {
                    verdict = violated(i, "upper kappa d^2");
                    break;
                }
                need(d2 / ui, i, "lower d^2/K");
            }
            CaseKind::WholeLine { gamma } => {
                let w = jb(xi).powf(gamma);
                need(w / ui, i, "lower <x>^gamma/K");
                need(ui - kappa * xi * xi, i, "upper kappa x^2 + K");
                need(ui / w, i, "upper K <x>^gamma");
            }
            CaseKind::HalfLine { gamma } => {
                if ui > kappa * xi * xi * cap_tol {
                    verdict = violated(i, "upper kappa x^2");
                    break;
                }
                let w = (xi * xi).min(xi.powf(gamma));
                need(w / ui, i, "lower (x^2 min x^gamma)/K");
                need(ui / xi.powf(gamma), i, "upper K x^gamma");
            }
        }
    }
    if verdict == Verdict::Admissible && !(k_need <= K_CAP) {
        verdict = violated(k_arg.0, k_arg.1);
    }
    Ok(HypothesisCertificate {
        case: *case,
        k_found: k_need,
        lip_sqrt_u0: lip_sqrt_estimate(x, u0),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn half_line_quadratic_equality_case() {
        let c = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let x = xs(1e-3, 50.0, 2000);
        let u: Vec<f64> = x.iter().map(|x| x * x).collect();
        let cert = validate_hypothesis(&x, &u, &c).unwrap();
        assert!(cert.is_admissible());
        assert_eq!(cert.k_found, 1.0);
        let u2: Vec<f64> = x.iter().map(|x| 2.0 * x * x).collect();
        let cert2 = validate_hypothesis(&x, &u2, &c).unwrap();
        assert!(matches!(cert2.verdict, Verdict::Violated { ref bound, .. } if bound == "upper kappa x^2"));
    }

    #[test]
    fn line_bracket_needs_no_kappa_for_large_kappa() {
        let x = xs(-40.0, 40.0, 4001);
        let u: Vec<f64> = x.iter().map(|&x| jb(x)).collect();
        for kappa in [0.5, 1.0, 5.0] {
            let c = DomainCase::line(1.0, kappa, 1.0).unwrap();
            let cert = validate_hypothesis(&x, &u, &c).unwrap();
            assert!(cert.is_admissible());
            assert!((cert.k_found - 1.0).abs() < 1e-12, "{kappa}: {}", cert.k_found);
        }
        // small κ: the cap κx² + K forces K ≥ 1/(4κ) + κ
        let c = DomainCase::line(1.0, 0.1, 1.0).unwrap();
        let cert = validate_hypothesis(&x, &u, &c).unwrap();
        assert!((cert.k_found - 2.6).abs() < 1e-4, "{}", cert.k_found);
    }

    #[test]
    fn negative_input_rejected() {
        let c = DomainCase::line(1.0, 1.0, 1.0).unwrap();
        assert!(validate_hypothesis(&[0.0, 1.0], &[1.0, -1.0], &c).is_err());
    }

    #[test]
    fn vanishing_inside_interval_is_violation() {
        let c = DomainCase::interval(1.0, 1.0, 1.0).unwrap();
        let x = xs(0.01, 0.99, 99);
        let mut u: Vec<f64> = x.iter().map(|&x| 0.5 * c.dist(x).powi(2)).collect();
        u[50] = 0.0;
        let cert = validate_hypothesis(&x, &u, &c).unwrap();
        assert!(matches!(cert.verdict, Verdict::Violated { node: 50, .. }));
    }
}
