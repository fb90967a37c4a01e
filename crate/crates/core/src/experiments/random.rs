//! Randomized H(κ,γ)-admissible data for the sandwich and comparison suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::experiments::hypothesis::validate_hypothesis;
use crate::initial::{bump, InitialCondition};
use crate::numerics::jb;
use crate::transform::{default_y_range, Geometry, Grid, Transform};

/// One smooth oscillatory factor: amp·sin(freq·s + phase), s = tanh(x/width).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amp: f64,
    pub freq: f64,
    pub phase: f64,
    pub width: f64,
}

impl Mode {
    fn eval(&self, x: f64) -> f64 {
        self.amp * (self.freq * (x / self.width).tanh() + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomData {
    pub case: DomainCase,
    /// Base profile amplitude.
    pub c: f64,
    pub modes: Vec<Mode>,
    pub y_range: (f64, f64),
    pub t_end: f64,
}

fn base(case: &DomainCase, c: f64, x: f64) -> f64 {
    match case.kind {
        CaseKind::BoundedInterval { length } => {
            if x <= 0.0 || x >= length {
                0.0
            } else {
                c * x * x * (length - x) * (length - x) / (length * length)
            }
        }
        CaseKind::WholeLine { gamma } => {
            if gamma == 2.0 {
                c * (x * x + 1.0)
            } else {
                c * jb(x).powf(gamma)
            }
        }
        CaseKind::HalfLine { gamma } => {
            if x <= 0.0 {
                0.0
            } else {
                c * x * x * jb(x).powf(gamma - 2.0)
            }
        }
    }
}

impl RandomData {
    /// base·(1 + Σ modes), summing the modes in the order given by `perm`.
    pub fn eval_with_order(&self, x: f64, perm: &[usize]) -> f64 {
        let b = base(&self.case, self.c, x);
        if b == 0.0 {
            return 0.0;
        }
        let mut m = 0.0;
        for &k in perm {
            m += self.modes[k].eval(x);
        }
        b * (1.0 + m)
    }

    pub fn initial(&self) -> InitialCondition {
        let perm: Vec<usize> = (0..self.modes.len()).collect();
        self.initial_permuted(&perm)
    }

    /// Same data, modulation terms summed in another order.
    pub fn initial_permuted(&self, perm: &[usize]) -> InitialCondition {
        let d = self.clone();
        let perm = perm.to_vec();
        InitialCondition::new(format!("random_{}", self.case.label()), move |x| d.eval_with_order(x, &perm))
    }

    /// Data raised by a nonnegative smooth bump: u0·(1 + δ·bump((x − x_c)/w)).
    pub fn raised(&self, delta: f64, center: f64, width: f64) -> InitialCondition {
        let lo = self.initial();
        InitialCondition::new(format!("raised_{}", self.case.label()), move |x| {
            lo.eval(x) * (1.0 + delta * bump((x - center) / width))
        })
    }

    pub fn transform(&self) -> Result<Transform> {
        Transform::new(self.case, self.y_range)
    }
}

/// The five ζ paths: interval, line γ = 2, line γ < 2, half-line γ = 2,
/// half-line γ < 2.
pub const CASE_KINDS: usize = 5;

/// Draw data of kind `kind` (0..5) and certify it: κ and K are set from the
/// sampled bounds and then inflated by a random factor in [1.1, 2].
pub fn random_data(seed: u64, kind: usize, dy: f64) -> Result<RandomData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gammas = [0.0, 0.5, 1.0, 1.5];
    let kind_case = match kind % CASE_KINDS {
        0 => CaseKind::BoundedInterval { length: rng.gen_range(1.0..3.0) },
        1 => CaseKind::WholeLine { gamma: 2.0 },
        2 => CaseKind::WholeLine { gamma: gammas[rng.gen_range(0..4)] },
        3 => CaseKind::HalfLine { gamma: 2.0 },
        _ => CaseKind::HalfLine { gamma: gammas[rng.gen_range(0..4)] },
    };
    let c = rng.gen_range(0.3..1.0);
    let n_modes = rng.gen_range(1..=3);
    let total: f64 = rng.gen_range(0.05..0.3);
    let modes: Vec<Mode> = (0..n_modes)
        .map(|_| Mode {
            amp: total / n_modes as f64,
            freq: rng.gen_range(0.5..4.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            width: rng.gen_range(0.5..3.0),
        })
        .collect();
    // provisional κ large enough for any modulation; refined below
    let mut case = DomainCase::new(kind_case, 10.0, 1.0)?;
    let y_range = match kind_case {
        CaseKind::BoundedInterval { .. } => (-8.0, 8.0),
        _ => {
            let (a, b) = default_y_range(&case);
            (a.max(-10.0), b.min(10.0))
        }
    };
    let mut d = RandomData { case, c, modes, y_range, t_end: 0.0 };
    let tr = Transform::new(case, y_range)?;
    let geo = Geometry::new(&tr, Grid::new(y_range.0, y_range.1, dy)?);
    let u0 = d.initial().sample(&geo.x);
    let kappa_need = geo
        .x
        .iter()
        .zip(&u0)
        .filter_map(|(&x, &u)| match kind_case {
            CaseKind::BoundedInterval { .. } | CaseKind::HalfLine { .. } => {
                let dd = case.dist(x);
                (dd > 0.0).then(|| u / (dd * dd))
            }
            CaseKind::WholeLine { gamma } => (gamma == 2.0).then(|| u / (1.0 + x * x)),
        })
        .fold(0.0, f64::max);
    let inflate = rng.gen_range(1.1..2.0);
    case.kappa = if kappa_need > 0.0 { kappa_need * inflate } else { c * inflate };
    let cert = validate_hypothesis(&geo.x, &u0, &case)?;
    if !cert.is_admissible() {
        return Err(Error::Unachievable(format!("random data {seed} not admissible: {:?}", cert.verdict)));
    }
    case.k = (cert.k_found * rng.gen_range(1.1..2.0)).max(1.0);
    d.case = case;
    d.t_end = (0.3f64).min(0.5 / case.kappa);
    Ok(d)
}

/// `Arc` wrapper so suites can share a draw across threads.
pub fn shared(seed: u64, kind: usize, dy: f64) -> Result<Arc<RandomData>> {
    random_data(seed, kind, dy).map(Arc::new)
}
