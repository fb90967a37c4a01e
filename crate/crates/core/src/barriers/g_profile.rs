use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One quadratic piece `c0 + c1 (x − x0) + c2 (x − x0)²` on `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub x0: f64,
    pub x1: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        let s = x - self.x0;
        self.c0 + s * (self.c1 + s * self.c2)
    }

    fn slope(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * (x - self.x0)
    }
}

/// Power tail `a x^γ + b` for `x ≥ x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub x0: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

/// Piecewise-quadratic lower profile G used in the subsolution
/// (G + ε) / (2(t + K)). Zero to the left of the first piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GProfile {
    pub pieces: Vec<Piece>,
    pub tail: Option<Tail>,
    /// G vanishes beyond the last piece when set (bounded interval).
    pub compact: bool,
}

impl GProfile {
    /// Interval (0, L): 2x² near each end joined by a concave cap, so that
    /// d² ≤ G ≤ 2d² and |G''| = 4.
    pub fn interval(length: f64) -> Self {
        let l = length;
        let q = 0.25 * l;
        GProfile {
            pieces: vec![
                Piece { x0: 0.0, x1: q, c0: 0.0, c1: 0.0, c2: 2.0 },
                Piece { x0: q, x1: 3.0 * q, c0: l * l / 8.0, c1: l, c2: -2.0 },
                Piece { x0: 3.0 * q, x1: l, c0: l * l / 8.0, c1: -l, c2: 2.0 },
            ],
            tail: None,
            compact: true,
        }
    }

    /// Half-line with exponent γ: x² on [0, 1], then C¹ quadratic pieces on
    /// geometric breakpoints whose slope chases β x^γ with |G''| ≤ 4, then a
    /// power tail. β is searched until x² ∧ x^γ ≤ G ≤ 2(x² ∧ x^γ) holds.
    pub fn half_line(gamma: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&gamma) {
            return Err(Error::InvalidDomain(format!("gamma must lie in [0, 2], got {gamma}")));
        }
        let first = Piece { x0: 0.0, x1: 1.0, c0: 0.0, c1: 0.0, c2: 1.0 };
        if gamma == 2.0 {
            return Ok(GProfile {
                pieces: vec![Piece { x1: f64::INFINITY, ..first }],
                tail: None,
                compact: false,
            });
        }
        for beta in [1.5, 1.4, 1.6, 1.3, 1.7, 1.2] {
            let g = Self::chase(gamma, beta, first);
            if g.check_band(gamma).is_ok() {
                return Ok(g);
            }
        }
        Err(Error::Unachievable(format!("no G profile found for gamma={gamma}")))
    }

    fn chase(gamma: f64, beta: f64, first: Piece) -> Self {
        const RATIO: f64 = 1.25;
        const X_MAX: f64 = 1e6;
        let mut pieces = vec![first];
        let (mut x, mut g, mut gp) = (1.0, 1.0, 2.0);
        while x < X_MAX {
            let x1 = x * RATIO;
            let h = x1 - x;
            let target = beta * gamma * x1.powf(gamma - 1.0);
            let c2 = (0.5 * (target - gp) / h).clamp(-2.0, 2.0);
            pieces.push(Piece { x0: x, x1, c0: g, c1: gp, c2 });
            g += h * (gp + c2 * h);
            gp += 2.0 * c2 * h;
            x = x1;
        }
        let tail = if gamma > 0.0 {
            let a = gp / (gamma * x.powf(gamma - 1.0));
            Tail { x0: x, a, b: g - a * x.powf(gamma), gamma }
        } else {
            Tail { x0: x, a: 0.0, b: g, gamma }
        };
        GProfile { pieces, tail: Some(tail), compact: false }
    }

    fn piece_at(&self, x: f64) -> Option<&Piece> {
        let i = self.pieces.partition_point(|p| p.x1 < x);
        self.pieces.get(i)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if let Some(p) = self.piece_at(x) {
            return p.eval(x);
        }
        match self.tail {
            Some(t) => t.a * x.powf(t.gamma) + t.b,
            None => 0.0,
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if let Some(p) = self.piece_at(x) {
            return p.slope(x);
        }
        match self.tail {
            Some(t) if t.gamma > 0.0 => t.a * t.gamma * x.powf(t.gamma - 1.0),
            _ => 0.0,
        }
    }

    /// G'' (one-sided from the right at breakpoints).
    pub fn second(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let i = self.pieces.partition_point(|p| p.x1 <= x);
        if let Some(p) = self.pieces.get(i) {
            return 2.0 * p.c2;
        }
        match self.tail {
            Some(t) => t.a * t.gamma * (t.gamma - 1.0) * x.powf(t.gamma - 2.0),
            None => 0.0,
        }
    }

    /// Sample points: every breakpoint, every midpoint, and a few points
    /// into the tail.
    pub fn checkpoints(&self) -> Vec<f64> {
        let mut xs = Vec::new();
        for p in &self.pieces {
            let x1 = if p.x1.is_finite() { p.x1 } else { p.x0 + 1e3 };
            xs.push(p.x0);
            xs.push(0.5 * (p.x0 + x1));
            xs.push(x1);
        }
        if let Some(t) = self.tail {
            for k in 1..=8 {
                xs.push(t.x0 * 10f64.powi(k));
            }
        }
        xs.retain(|&x| x > 0.0);
        xs
    }

    /// Check `lower ≤ G ≤ 2·lower` at every checkpoint, with `lower` the
    /// half-line envelope x² ∧ x^γ. Returns the worst ratio range.
    pub fn check_band(&self, gamma: f64) -> Result<(f64, f64)> {
        self.check_band_with(|x| (x * x).min(x.powf(gamma)))
    }

    pub fn check_band_with(&self, lower: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for x in self.checkpoints() {
            let m = lower(x);
            if m <= 0.0 {
                continue;
            }
            let r = self.eval(x) / m;
            lo = lo.min(r);
            hi = hi.max(r);
            if !(1.0 - 1e-12..=2.0 + 1e-12).contains(&r) {
                return Err(Error::Unachievable(format!("G/lower = {r} at x = {x}")));
            }
        }
        if let Some(t) = self.tail {
            // a X + b with X = x^γ increasing; need (a-1)X + b ≥ 0 and (2-a)X - b ≥ 0 for X ≥ X0
            let x0g = t.x0.powf(t.gamma);
            let ok = if t.gamma > 0.0 {
                (1.0..=2.0).contains(&t.a) && (t.a - 1.0) * x0g + t.b >= 0.0 && (2.0 - t.a) * x0g - t.b >= 0.0
            } else {
                (1.0..=2.0).contains(&t.b)
            };
            if !ok {
                return Err(Error::Unachievable(format!("tail {t:?} leaves the envelope band")));
            }
        }
        Ok((lo, hi))
    }

    /// Largest |G''| over pieces and tail.
    pub fn max_curvature(&self) -> f64 {
        let mut m = self.pieces.iter().map(|p| (2.0 * p.c2).abs()).fold(0.0, f64::max);
        if let Some(t) = self.tail {
            m = m.max((t.a * t.gamma * (t.gamma - 1.0) * t.x0.powf(t.gamma - 2.0)).abs());
        }
        m
    }
}
