//! Initial data: named families, sampled tables, and their certificates.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::experiments::hypothesis::{validate_hypothesis, HypothesisCertificate};
use crate::numerics::{jb, lagrange_cubic};

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// u0 as a callable, with an optional H(κ,γ) certificate.
#[derive(Clone)]
pub struct InitialCondition {
    pub name: String,
    f: Profile,
    pub certificate: Option<HypothesisCertificate>,
    /// Solve even without an admissible certificate.
    pub override_certificate: bool,
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialCondition")
            .field("name", &self.name)
            .field("certificate", &self.certificate)
            .field("override_certificate", &self.override_certificate)
            .finish()
    }
}

impl InitialCondition {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialCondition { name: name.into(), f: Arc::new(f), certificate: None, override_certificate: false }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn sample(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&x| self.eval(x)).collect()
    }

    /// Attach a certificate computed on the node set `x`.
    pub fn certify(mut self, x: &[f64], case: &DomainCase) -> Result<Self> {
        let u = self.sample(x);
        self.certificate = Some(validate_hypothesis(x, &u, case)?);
        Ok(self)
    }

    pub fn with_override(mut self) -> Self {
        self.override_certificate = true;
        self
    }

    pub fn is_admissible(&self) -> bool {
        self.certificate.as_ref().map(|c| c.is_admissible()).unwrap_or(false)
    }
}

/// Smooth compact bump exp(1 − 1/(1 − s²)) on |s| < 1, peak value 1.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Named initial-condition families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// c x² on the half-line.
    Quadratic {
        #[serde(default = "one")]
        c: f64,
    },
    /// x² + 1 on the line.
    QuadraticPlusOne,
    /// A⟨x⟩^γ on the line, A x²⟨x⟩^{γ−2} on the half-line.
    /// `gamma` defaults to the case's γ.
    PowerLaw {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "one")]
        amp: f64,
    },
    /// A x²(L − x)²/L² on (0, L).
    BumpOnInterval {
        #[serde(default = "one")]
        amp: f64,
    },
    /// κx² + x²θ_λ(log x) from the early-blow-up construction.
    QuadraticPlusBump {
        #[serde(default = "tenth")]
        lambda: f64,
    },
    /// x² + A·bump((x − c)/w): a small bump far from the zero at x = 0.
    QuadraticFarBump {
        #[serde(default = "far_amp")]
        amp: f64,
        #[serde(default = "far_center")]
        center: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// Sampled (x, u) pairs from a two-column CSV file.
    Table { path: PathBuf },
}

fn one() -> f64 {
    1.0
}
fn tenth() -> f64 {
    0.1
}
fn far_amp() -> f64 {
    0.05
}
fn far_center() -> f64 {
    3.0
}

pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub admissible: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry { name: "quadratic", formula: "c x^2", admissible: "half_line, gamma = 2, kappa >= c; K = 1/c when c <= 1" },
    CatalogEntry { name: "quadratic_plus_one", formula: "x^2 + 1", admissible: "line, gamma = 2, kappa >= 1, K = 1" },
    CatalogEntry {
        name: "power_law",
        formula: "amp <x>^gamma (line), amp x^2 <x>^(gamma-2) (half_line)",
        admissible: "line or half_line with the same gamma in [0, 2]; kappa >= amp (half_line) or kappa > 0 (line, gamma < 2)",
    },
    CatalogEntry {
        name: "bump_on_interval",
        formula: "amp x^2 (L-x)^2 / L^2",
        admissible: "interval, kappa >= amp, K = 4/amp",
    },
    CatalogEntry {
        name: "quadratic_plus_bump",
        formula: "kappa x^2 + x^2 theta_lambda(log x)",
        admissible: "half_line, gamma = 2, lambda in (0, 1/2]; certified with kappa' = kappa + sup theta",
    },
    CatalogEntry {
        name: "quadratic_far_bump",
        formula: "x^2 + amp bump((x - center)/width)",
        admissible: "half_line, gamma = 2, center > width, kappa >= 1 + amp/(center-width)^2",
    },
    CatalogEntry { name: "table", formula: "sampled (x, u) pairs, cubic interpolation", admissible: "as certified on the grid" },
];

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Quadratic { .. } => "quadratic",
            Family::QuadraticPlusOne => "quadratic_plus_one",
            Family::PowerLaw { .. } => "power_law",
            Family::BumpOnInterval { .. } => "bump_on_interval",
            Family::QuadraticPlusBump { .. } => "quadratic_plus_bump",
            Family::QuadraticFarBump { .. } => "quadratic_far_bump",
            Family::Table { .. } => "table",
        }
    }

    /// Default parameters for a family name (used by `--u0 <name>`).
    pub fn default_for(name: &str, case: &DomainCase) -> Option<Family> {
        Some(match name {
            "quadratic" => Family::Quadratic { c: 1.0 },
            "quadratic_plus_one" => Family::QuadraticPlusOne,
            "power_law" => Family::PowerLaw { gamma: case.gamma(), amp: 1.0 },
            "bump_on_interval" => Family::BumpOnInterval { amp: 1.0 },
            "quadratic_plus_bump" => Family::QuadraticPlusBump { lambda: 0.1 },
            "quadratic_far_bump" => Family::QuadraticFarBump { amp: far_amp(), center: far_center(), width: 1.0 },
            _ => return None,
        })
    }

    /// Build the callable. `quadratic_plus_bump` needs the blow-up
    /// construction and is built by the experiments module instead.
    pub fn build(&self, case: &DomainCase) -> Result<InitialCondition> {
        let wrong = |what: &str| Err(Error::InvalidInput(format!("family {} needs {what}", self.name())));
        let name = self.name();
        match (self, case.kind) {
            (Family::Quadratic { c }, CaseKind::HalfLine { .. }) => {
                let c = *c;
                Ok(InitialCondition::new(name, move |x| if x > 0.0 { c * x * x } else { 0.0 }))
            }
            (Family::Quadratic { .. }, _) => wrong("the half_line case"),
            (Family::QuadraticPlusOne, CaseKind::WholeLine { .. }) => Ok(InitialCondition::new(name, |x| x * x + 1.0)),
            (Family::QuadraticPlusOne, _) => wrong("the line case"),
            (Family::PowerLaw { gamma, amp }, CaseKind::WholeLine { gamma: cg }) => {
                let (g, a) = (gamma.unwrap_or(cg), *amp);
                Ok(InitialCondition::new(name, move |x| a * jb(x).powf(g)))
            }
            (Family::PowerLaw { gamma, amp }, CaseKind::HalfLine { gamma: cg }) => {
                let (g, a) = (gamma.unwrap_or(cg), *amp);
                Ok(InitialCondition::new(name, move |x| if x > 0.0 { a * x * x * jb(x).powf(g - 2.0) } else { 0.0 }))
            }
            (Family::PowerLaw { .. }, _) => wrong("the line or half_line case"),
            (Family::BumpOnInterval { amp }, CaseKind::BoundedInterval { length }) => {
                let (a, l) = (*amp, length);
                Ok(InitialCondition::new(name, move |x| {
                    if x > 0.0 && x < l {
                        a * x * x * (l - x) * (l - x) / (l * l)
                    } else {
                        0.0
                    }
                }))
            }
            (Family::BumpOnInterval { .. }, _) => wrong("the interval case"),
            (Family::QuadraticFarBump { amp, center, width }, CaseKind::HalfLine { .. }) => {
                let (a, c, w) = (*amp, *center, *width);
                if c - w <= 0.0 {
                    return wrong("center > width");
                }
                Ok(InitialCondition::new(name, move |x| if x > 0.0 { x * x + a * bump((x - c) / w) } else { 0.0 }))
            }
            (Family::QuadraticFarBump { .. }, _) => wrong("the half_line case"),
            (Family::QuadraticPlusBump { .. }, _) => {
                Err(Error::InvalidInput("quadratic_plus_bump is built by the blow-up construction".into()))
            }
            (Family::Table { path }, _) => {
                let text = std::fs::read_to_string(path)?;
                let (xs, us) = parse_table(&text)?;
                let name = format!("table:{}", path.display());
                Ok(InitialCondition::new(name, move |x| {
                    if x < xs[0] || x > xs[xs.len() - 1] {
                        f64::NAN
                    } else {
                        lagrange_cubic(&xs, &us, x).max(0.0)
                    }
                }))
            }
        }
    }
}

/// Parse a two-column CSV of (x, u); an optional header row is skipped.
pub fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let (a, b) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(u)) => {
                xs.push(x);
                us.push(u);
            }
            _ if ln == 0 => continue,
            _ => return Err(Error::InvalidInput(format!("table line {}: cannot parse {line:?}", ln + 1))),
        }
    }
    if xs.len() < 4 {
        return Err(Error::InvalidInput("table needs at least 4 rows".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("table x values must be strictly increasing".into()));
    }
    Ok((xs, us))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_build_on_their_cases() {
        let line = DomainCase::line(2.0, 1.0, 1.0).unwrap();
        let half = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let int = DomainCase::interval(2.0, 1.0, 4.0).unwrap();
        assert_eq!(Family::QuadraticPlusOne.build(&line).unwrap().eval(2.0), 5.0);
        assert!(Family::QuadraticPlusOne.build(&half).is_err());
        assert_eq!(Family::Quadratic { c: 2.0 }.build(&half).unwrap().eval(3.0), 18.0);
        let b = Family::BumpOnInterval { amp: 1.0 }.build(&int).unwrap();
        assert_eq!(b.eval(1.0), 0.25);
        assert_eq!(b.eval(2.5), 0.0);
        let p = Family::PowerLaw { gamma: Some(1.0), amp: 1.0 }.build(&half).unwrap();
        assert!((p.eval(1e-4) / 1e-8 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn table_parsing() {
        let (x, u) = parse_table("x,u\n0,0\n1,1\n2,4\n3,9\n").unwrap();
        assert_eq!(x.len(), 4);
        assert_eq!(u[3], 9.0);
        assert!(parse_table("0,0\n1,1\n1,2\n3,3\n").is_err());
        assert!(parse_table("0,0\nfoo,1\n").is_err());
    }

    #[test]
    fn catalog_names_have_defaults() {
        let half = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        for e in CATALOG.iter().filter(|e| e.name != "table") {
            assert_eq!(Family::default_for(e.name, &half).unwrap().name(), e.name);
        }
    }

    #[test]
    fn bump_is_compact_with_unit_peak() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert!(bump(0.99) > 0.0);
    }
}
