//! Change of variables v = ζ'(y)⁻² u(t, ζ(y)) and the five ζ choices.

use serde::{Deserialize, Serialize};

use crate::domain::{CaseKind, DomainCase};
use crate::error::{Error, Result};
use crate::numerics::{integrate, jb, smooth_step};

/// Which closed form (or integral) defines ζ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaPath {
    /// ζ = (L/2)(tanh y + 1)
    Tanh,
    /// ζ = sinh y
    Sinh,
    /// ζ = ∫₀^y ⟨z⟩^p dz, p = γ/(2−γ)
    PowerIntegral,
    /// ζ = e^y
    Exp,
    /// ζ = ∫_{−∞}^y ψ e^z + (1−ψ)⟨z⟩^q dz
    BlendIntegral,
}

impl ZetaPath {
    pub fn for_case(case: &DomainCase) -> ZetaPath {
        match case.kind {
            CaseKind::BoundedInterval { .. } => ZetaPath::Tanh,
            CaseKind::WholeLine { gamma } if gamma == 2.0 => ZetaPath::Sinh,
            CaseKind::WholeLine { .. } => ZetaPath::PowerIntegral,
            CaseKind::HalfLine { gamma } if gamma == 2.0 => ZetaPath::Exp,
            CaseKind::HalfLine { .. } => ZetaPath::BlendIntegral,
        }
    }
}

/// ζ and its first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaDerivs {
    pub z: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

/// Cumulative table of an integral ζ with Hermite interpolation between
/// nodes. Exact ζ' is used for the Hermite slopes.
#[derive(Debug, Clone)]
struct IntegralTable {
    y0: f64,
    h: f64,
    values: Vec<f64>,
}

const TABLE_H: f64 = 1.0 / 256.0;

impl IntegralTable {
    fn build(g: &dyn Fn(f64) -> f64, y0: f64, value0: f64, y1: f64) -> Self {
        let n = ((y1 - y0) / TABLE_H).ceil().max(1.0) as usize;
        let mut values = Vec::with_capacity(n + 1);
        values.push(value0);
        let mut acc = value0;
        for i in 0..n {
            let a = y0 + i as f64 * TABLE_H;
            let b = a + TABLE_H;
            let cell = integrate(g, a, b, 1e-16 * (1.0 + acc.abs()));
            acc += cell;
            values.push(acc);
        }
        IntegralTable { y0, h: TABLE_H, values }
    }

    fn y_end(&self) -> f64 {
        self.y0 + (self.values.len() - 1) as f64 * self.h
    }

    fn eval(&self, g: &dyn Fn(f64) -> f64, y: f64) -> f64 {
        let n = self.values.len() - 1;
        if y >= self.y_end() {
            let ye = self.y_end();
            return self.values[n] + integrate(g, ye, y, 1e-16 * (1.0 + self.values[n].abs()));
        }
        let s = ((y - self.y0) / self.h).max(0.0);
        let i = (s.floor() as usize).min(n - 1);
        let ya = self.y0 + i as f64 * self.h;
        let t = (y - ya) / self.h;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (g(ya) * self.h, g(ya + self.h) * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * m1
    }
}

#[derive(Debug, Clone)]
enum Zeta {
    Tanh { length: f64 },
    Sinh,
    Power { p: f64, table: IntegralTable },
    Exp,
    Blend { q: f64, table: IntegralTable },
}

/// Blend weight ψ(z): 1 for z ≤ −1, 0 for z ≥ 1. Returns (ψ, ψ', ψ'').
pub fn blend_psi(z: f64) -> (f64, f64, f64) {
    let (s, s1, s2) = smooth_step(0.5 * (z + 1.0));
    (1.0 - s, -0.5 * s1, -0.25 * s2)
}

fn power_integrand(p: f64, z: f64) -> f64 {
    jb(z).powf(p)
}

/// Integrand of the half-line blend and its two derivatives.
fn blend_integrand(q: f64, z: f64) -> (f64, f64, f64) {
    if z <= -1.0 {
        let e = z.exp();
        return (e, e, e);
    }
    let b = jb(z);
    let w = b.powf(q);
    let w1 = q * z * b.powf(q - 2.0);
    let w2 = q * b.powf(q - 4.0) * ((q - 1.0) * z * z + 1.0);
    if z >= 1.0 {
        return (w, w1, w2);
    }
    let e = z.exp();
    // weight on the power branch is 1 - ψ; take it from the step directly so
    // a tiny weight is not lost to cancellation against a large w
    let (s, s1, s2) = smooth_step(0.5 * (z + 1.0));
    let (s1, s2) = (0.5 * s1, 0.25 * s2);
    let g = e + s * (w - e);
    let g1 = e + s1 * (w - e) + s * (w1 - e);
    let g2 = e + s2 * (w - e) + 2.0 * s1 * (w1 - e) + s * (w2 - e);
    (g, g1, g2)
}

/// The map ζ for one domain case, restricted to a computational box.
#[derive(Debug, Clone)]
pub struct Transform {
    pub case: DomainCase,
    pub path: ZetaPath,
    pub y_min: f64,
    pub y_max: f64,
    zeta: Zeta,
}

/// Default computational box for each case.
pub fn default_y_range(case: &DomainCase) -> (f64, f64) {
    match ZetaPath::for_case(case) {
        ZetaPath::Tanh => (-10.0, 10.0),
        ZetaPath::Sinh => (-10.0, 10.0),
        ZetaPath::PowerIntegral => {
            let y = power_reach(case.gamma().unwrap_or(0.0), 1e4).min(40.0);
            (-y, y)
        }
        ZetaPath::Exp => (-12.0, 10.0),
        ZetaPath::BlendIntegral => (-12.0, power_reach(case.gamma().unwrap_or(0.0), 1e4).min(40.0)),
    }
}

// Asymptotic y with ζ(y) ≈ x for the ⟨y⟩^p integrand: ζ ~ y^{p+1}/(p+1).
fn power_reach(gamma: f64, x: f64) -> f64 {
    let p1 = 2.0 / (2.0 - gamma);
    (x * p1).powf(1.0 / p1)
}

impl Transform {
    /// Build the transform for `case` with its canonical ζ.
    pub fn new(case: DomainCase, y_range: (f64, f64)) -> Result<Self> {
        Self::with_path(case, ZetaPath::for_case(&case), y_range)
    }

    pub fn with_default_range(case: DomainCase) -> Result<Self> {
        Self::new(case, default_y_range(&case))
    }

    /// Build with an explicit ζ path; rejects a path that does not belong to
    /// the case (e.g. the γ<2 integral with γ = 2).
    pub fn with_path(case: DomainCase, path: ZetaPath, y_range: (f64, f64)) -> Result<Self> {
        case.validate()?;
        let (y_min, y_max) = y_range;
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return Err(Error::InvalidRange { y_min, y_max });
        }
        let mismatch = |msg: &str| Err(Error::TransformPath(msg.to_string()));
        let span = y_min.abs().max(y_max.abs()) + 1.0;
        let zeta = match (path, case.kind) {
            (ZetaPath::Tanh, CaseKind::BoundedInterval { length }) => Zeta::Tanh { length },
            (ZetaPath::Sinh, CaseKind::WholeLine { gamma }) => {
                if gamma != 2.0 {
                    return mismatch("sinh transform requires gamma = 2");
                }
                Zeta::Sinh
            }
            (ZetaPath::PowerIntegral, CaseKind::WholeLine { gamma }) => {
                if gamma >= 2.0 {
                    return mismatch("power-integral transform requires gamma < 2");
                }
                let p = gamma / (2.0 - gamma);
                let table = IntegralTable::build(&|z| power_integrand(p, z), 0.0, 0.0, span);
                Zeta::Power { p, table }
            }
            (ZetaPath::Exp, CaseKind::HalfLine { gamma }) => {
                if gamma != 2.0 {
                    return mismatch("exponential transform requires gamma = 2");
                }
                Zeta::Exp
            }
            (ZetaPath::BlendIntegral, CaseKind::HalfLine { gamma }) => {
                if gamma >= 2.0 {
                    return mismatch("blend-integral transform requires gamma < 2");
                }
                let q = gamma / (2.0 - gamma);
                let table =
                    IntegralTable::build(&|z| blend_integrand(q, z).0, -1.0, (-1f64).exp(), y_max.max(-1.0) + 1.0);
                Zeta::Blend { q, table }
            }
            _ => return mismatch("transform path does not match the domain case"),
        };
        Ok(Transform { case, path, y_min, y_max, zeta })
    }

    pub fn derivs(&self, y: f64) -> ZetaDerivs {
        match &self.zeta {
            Zeta::Tanh { length } => {
                let z1 = self.zeta1(y);
                let th = y.tanh();
                ZetaDerivs {
                    z: length / (1.0 + (-2.0 * y).exp()),
                    z1,
                    z2: -2.0 * th * z1,
                    z3: (6.0 * th * th - 2.0) * z1,
                }
            }
            Zeta::Sinh => ZetaDerivs { z: y.sinh(), z1: y.cosh(), z2: y.sinh(), z3: y.cosh() },
            Zeta::Exp => {
                let e = y.exp();
                ZetaDerivs { z: e, z1: e, z2: e, z3: e }
            }
            Zeta::Power { p, .. } => {
                let b = jb(y);
                ZetaDerivs {
                    z: self.zeta(y),
                    z1: b.powf(*p),
                    z2: p * y * b.powf(p - 2.0),
                    z3: p * b.powf(p - 4.0) * ((p - 1.0) * y * y + 1.0),
                }
            }
            Zeta::Blend { q, .. } => {
                let (g, g1, g2) = blend_integrand(*q, y);
                ZetaDerivs { z: self.zeta(y), z1: g, z2: g1, z3: g2 }
            }
        }
    }

    pub fn zeta(&self, y: f64) -> f64 {
        match &self.zeta {
            Zeta::Tanh { length } => length / (1.0 + (-2.0 * y).exp()),
            Zeta::Sinh => y.sinh(),
            Zeta::Exp => y.exp(),
            Zeta::Power { p, table } => {
                let p = *p;
                let v = table.eval(&|z| power_integrand(p, z), y.abs());
                v.copysign(y)
            }
            Zeta::Blend { q, table } => {
                if y <= -1.0 {
                    y.exp()
                } else {
                    let q = *q;
                    table.eval(&|z| blend_integrand(q, z).0, y)
                }
            }
        }
    }

    pub fn zeta1(&self, y: f64) -> f64 {
        match &self.zeta {
            Zeta::Tanh { length } => {
                let e = (-2.0 * y.abs()).exp();
                2.0 * length * e / ((1.0 + e) * (1.0 + e))
            }
            Zeta::Sinh => y.cosh(),
            Zeta::Exp => y.exp(),
            Zeta::Power { p, .. } => power_integrand(*p, y),
            Zeta::Blend { q, .. } => blend_integrand(*q, y).0,
        }
    }

    /// (ζ''/ζ', ζ'''/ζ') in overflow-free form.
    pub fn ratios(&self, y: f64) -> (f64, f64) {
        match &self.zeta {
            Zeta::Tanh { .. } => {
                let th = y.tanh();
                (-2.0 * th, 6.0 * th * th - 2.0)
            }
            Zeta::Sinh => (y.tanh(), 1.0),
            Zeta::Exp => (1.0, 1.0),
            Zeta::Power { p, .. } => {
                let b2 = 1.0 + y * y;
                (p * y / b2, p * ((p - 1.0) * y * y + 1.0) / (b2 * b2))
            }
            Zeta::Blend { q, .. } => {
                let (g, g1, g2) = blend_integrand(*q, y);
                (g1 / g, g2 / g)
            }
        }
    }

    /// (d∘ζ)/ζ', the distance to ∂I measured in units of ζ'. Infinite on the
    /// whole line.
    pub fn dist_over_zeta1(&self, y: f64) -> f64 {
        match &self.zeta {
            Zeta::Tanh { .. } => 0.5 * (1.0 + (-2.0 * y.abs()).exp()),
            Zeta::Exp => 1.0,
            Zeta::Blend { .. } => {
                if y <= -1.0 {
                    1.0
                } else {
                    self.zeta(y) / self.zeta1(y)
                }
            }
            Zeta::Sinh | Zeta::Power { .. } => f64::INFINITY,
        }
    }

    /// ζ⁻¹(x) for x in the image of ζ.
    pub fn inverse(&self, x: f64) -> f64 {
        match &self.zeta {
            Zeta::Tanh { length } => 0.5 * (x / (length - x)).ln(),
            Zeta::Sinh => x.asinh(),
            Zeta::Exp => x.ln(),
            Zeta::Blend { .. } if x <= (-1f64).exp() => x.ln(),
            _ => {
                // bracket, then safeguarded Newton
                let mut lo = -1.0;
                let mut hi = 1.0;
                while self.zeta(lo) > x {
                    lo *= 2.0;
                }
                while self.zeta(hi) < x {
                    hi *= 2.0;
                }
                let mut y = 0.5 * (lo + hi);
                for _ in 0..200 {
                    let f = self.zeta(y) - x;
                    if f > 0.0 {
                        hi = y;
                    } else {
                        lo = y;
                    }
                    let mut next = y - f / self.zeta1(y);
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
                        return next;
                    }
                    y = next;
                }
                y
            }
        }
    }
}

/// Uniform grid in the transformed coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub y_min: f64,
    pub dy: f64,
    pub n: usize,
}

impl Grid {
    /// Grid covering `[y_min, y_max]` with spacing as close to `dy` as the
    /// span allows (the span is split into a whole number of cells).
    pub fn new(y_min: f64, y_max: f64, dy: f64) -> Result<Self> {
        if !(y_min < y_max) {
            return Err(Error::InvalidRange { y_min, y_max });
        }
        if !(dy > 0.0) {
            return Err(Error::InvalidConfig(format!("dy must be positive, got {dy}")));
        }
        let cells = ((y_max - y_min) / dy).round().max(4.0) as usize;
        Ok(Grid { y_min, dy: (y_max - y_min) / cells as f64, n: cells + 1 })
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y_min + i as f64 * self.dy
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.n - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.y(i)).collect()
    }
}

/// Per-node transform data on a grid, computed once.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub z1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
    pub d_over_z1: Vec<f64>,
}

impl Geometry {
    pub fn new(tr: &Transform, grid: Grid) -> Self {
        let mut g = Geometry {
            grid,
            x: Vec::with_capacity(grid.n),
            z1: Vec::with_capacity(grid.n),
            r2: Vec::with_capacity(grid.n),
            r3: Vec::with_capacity(grid.n),
            d_over_z1: Vec::with_capacity(grid.n),
        };
        for i in 0..grid.n {
            let y = grid.y(i);
            let (r2, r3) = tr.ratios(y);
            g.x.push(tr.zeta(y));
            g.z1.push(tr.zeta1(y));
            g.r2.push(r2);
            g.r3.push(r3);
            g.d_over_z1.push(tr.dist_over_zeta1(y));
        }
        g
    }

    pub fn len(&self) -> usize {
        self.grid.n
    }

    pub fn is_empty(&self) -> bool {
        self.grid.n == 0
    }
}

/// Time-stamped values of v on a uniform y-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub t: f64,
    pub grid: Grid,
    pub v: Vec<f64>,
}

/// Physical fields reconstructed on ζ(y-grid).
#[derive(Debug, Clone, PartialEq)]
pub struct Physical {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
}

/// v = (ζ')⁻² u∘ζ nodewise.
pub fn u_to_v(u: &[f64], geo: &Geometry, t: f64) -> Result<FieldPair> {
    if u.len() != geo.len() {
        return Err(Error::LengthMismatch { expected: geo.len(), got: u.len() });
    }
    let mut v = Vec::with_capacity(u.len());
    for (i, (&ui, &z1)) in u.iter().zip(&geo.z1).enumerate() {
        if ui < 0.0 || ui.is_nan() {
            return Err(Error::NegativeValue { index: i, value: ui });
        }
        v.push(ui / (z1 * z1));
    }
    Ok(FieldPair { t, grid: geo.grid, v })
}

/// Central first and second differences, second-order one-sided at the ends.
pub fn y_derivatives(v: &[f64], dy: f64) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let h2 = dy * dy;
    for i in 1..n - 1 {
        d1[i] = (v[i + 1] - v[i - 1]) / (2.0 * dy);
        d2[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
    }
    d1[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dy);
    d1[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dy);
    d2[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
    d2[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    (d1, d2)
}

/// u, ∂x u, ∂x² u on ζ(y-grid) from v via the change-of-variables identities.
pub fn v_to_u_derivatives(field: &FieldPair, geo: &Geometry) -> Result<Physical> {
    let n = field.v.len();
    if n != geo.len() {
        return Err(Error::LengthMismatch { expected: geo.len(), got: n });
    }
    if n < 5 {
        return Err(Error::InvalidInput(format!("need at least 5 nodes, got {n}")));
    }
    let (d1, d2) = y_derivatives(&field.v, field.grid.dy);
    let mut p = Physical { x: geo.x.clone(), u: vec![0.0; n], du: vec![0.0; n], d2u: vec![0.0; n] };
    for i in 0..n {
        let v = field.v[i];
        let z1 = geo.z1[i];
        p.u[i] = z1 * z1 * v;
        p.du[i] = z1 * (d1[i] + 2.0 * geo.r2[i] * v);
        p.d2u[i] = d2[i] + 3.0 * geo.r2[i] * d1[i] + 2.0 * geo.r3[i] * v;
    }
    Ok(p)
}

/// Inverse of `u_to_v` on the value level (no derivatives).
pub fn v_to_u(field: &FieldPair, geo: &Geometry) -> Vec<f64> {
    field.v.iter().zip(&geo.z1).map(|(v, z1)| z1 * z1 * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(kind: CaseKind) -> Transform {
        let c = DomainCase::new(kind, 1.0, 1.0).unwrap();
        Transform::with_default_range(c).unwrap()
    }

    #[test]
    fn interval_at_origin() {
        let t = tr(CaseKind::BoundedInterval { length: 2.0 });
        assert!((t.zeta(0.0) - 1.0).abs() < 1e-15);
        assert!((t.zeta1(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sinh_at_origin() {
        let t = tr(CaseKind::WholeLine { gamma: 2.0 });
        assert_eq!(t.zeta(0.0), 0.0);
        assert_eq!(t.zeta1(0.0), 1.0);
    }

    #[test]
    fn path_mismatch_rejected() {
        let c2 = DomainCase::line(2.0, 1.0, 1.0).unwrap();
        assert!(Transform::with_path(c2, ZetaPath::PowerIntegral, (-1.0, 1.0)).is_err());
        let c1 = DomainCase::line(1.0, 1.0, 1.0).unwrap();
        assert!(Transform::with_path(c1, ZetaPath::Sinh, (-1.0, 1.0)).is_err());
        let h1 = DomainCase::half_line(1.0, 1.0, 1.0).unwrap();
        assert!(Transform::with_path(h1, ZetaPath::Exp, (-1.0, 1.0)).is_err());
        let h2 = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        assert!(Transform::with_path(h2, ZetaPath::BlendIntegral, (-1.0, 1.0)).is_err());
        assert!(Transform::new(h2, (1.0, 1.0)).is_err());
        assert!(Transform::new(h2, (f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn power_line_gamma_one_closed_form() {
        // ∫₀^y ⟨z⟩ dz = (y⟨y⟩ + asinh y)/2
        let t = tr(CaseKind::WholeLine { gamma: 1.0 });
        for &y in &[-7.3, -1.0, 0.001, 0.5, 3.0, 12.25, 39.0] {
            let exact = 0.5 * (y * jb(y) + y.asinh());
            assert!((t.zeta(y) - exact).abs() < 1e-11 * (1.0 + exact.abs()), "{y}");
        }
    }

    #[test]
    fn power_line_gamma_zero_is_identity() {
        let t = tr(CaseKind::WholeLine { gamma: 0.0 });
        for &y in &[-3.0, 0.2, 5.5] {
            assert!((t.zeta(y) - y).abs() < 1e-13);
            assert_eq!(t.ratios(y), (0.0, 0.0));
        }
    }

    #[test]
    fn inverse_round_trips() {
        for kind in [
            CaseKind::BoundedInterval { length: 3.0 },
            CaseKind::WholeLine { gamma: 2.0 },
            CaseKind::WholeLine { gamma: 1.2 },
            CaseKind::HalfLine { gamma: 2.0 },
            CaseKind::HalfLine { gamma: 0.5 },
        ] {
            let t = tr(kind);
            for &y in &[-4.0, -1.0, -0.3, 0.0, 0.7, 2.5] {
                let back = t.inverse(t.zeta(y));
                assert!((back - y).abs() < 1e-9, "{kind:?} {y} {back}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in [
            CaseKind::BoundedInterval { length: 1.5 },
            CaseKind::WholeLine { gamma: 2.0 },
            CaseKind::WholeLine { gamma: 0.7 },
            CaseKind::HalfLine { gamma: 2.0 },
            CaseKind::HalfLine { gamma: 1.0 },
        ] {
            let t = tr(kind);
            let h = 1e-4;
            for &y in &[-2.0, -0.95, -0.4, 0.0, 0.35, 0.99, 1.7] {
                let d = t.derivs(y);
                let fd1 = (t.zeta(y + h) - t.zeta(y - h)) / (2.0 * h);
                let fd2 = (t.zeta1(y + h) - t.zeta1(y - h)) / (2.0 * h);
                let fd3 = (t.derivs(y + h).z2 - t.derivs(y - h).z2) / (2.0 * h);
                let s = 1.0 + d.z1.abs() + d.z2.abs() + d.z3.abs();
                assert!((d.z1 - fd1).abs() < 1e-7 * s, "{kind:?} z1 at {y}");
                assert!((d.z2 - fd2).abs() < 1e-6 * s, "{kind:?} z2 at {y}");
                assert!((d.z3 - fd3).abs() < 1e-5 * s, "{kind:?} z3 at {y}");
                let (r2, r3) = t.ratios(y);
                assert!((r2 - d.z2 / d.z1).abs() < 1e-12 * (1.0 + r2.abs()));
                assert!((r3 - d.z3 / d.z1).abs() < 1e-12 * (1.0 + r3.abs()));
            }
        }
    }

    #[test]
    fn field_conversions() {
        let c = DomainCase::half_line(2.0, 1.0, 1.0).unwrap();
        let t = Transform::new(c, (-3.0, 3.0)).unwrap();
        let geo = Geometry::new(&t, Grid::new(-3.0, 3.0, 0.25).unwrap());
        let u: Vec<f64> = geo.x.iter().map(|x| x * x).collect();
        let f = u_to_v(&u, &geo, 0.0).unwrap();
        assert!(f.v.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let p = v_to_u_derivatives(&f, &geo).unwrap();
        for i in 0..geo.len() {
            let x = geo.x[i];
            assert!((p.u[i] - x * x).abs() < 1e-12 * (1.0 + x * x));
            assert!((p.du[i] - 2.0 * x).abs() < 1e-12 * (1.0 + x));
            assert!((p.d2u[i] - 2.0).abs() < 1e-12);
        }
        let mut bad = u.clone();
        bad[3] = -1e-3;
        assert_eq!(u_to_v(&bad, &geo, 0.0).unwrap_err(), Error::NegativeValue { index: 3, value: -1e-3 });
        let z = u_to_v(&vec![0.0; geo.len()], &geo, 0.0).unwrap();
        let pz = v_to_u_derivatives(&z, &geo).unwrap();
        assert!(pz.u.iter().chain(&pz.du).chain(&pz.d2u).all(|&w| w == 0.0));
    }

    #[test]
    fn interval_d_squared_gives_unit_v_at_center() {
        let c = DomainCase::interval(2.0, 1.0, 1.0).unwrap();
        let t = Transform::new(c, (-1.0, 1.0)).unwrap();
        let geo = Geometry::new(&t, Grid::new(-1.0, 1.0, 0.25).unwrap());
        let u: Vec<f64> = geo.x.iter().map(|&x| c.dist(x).powi(2)).collect();
        let f = u_to_v(&u, &geo, 0.0).unwrap();
        assert!((f.v[4] - 1.0).abs() < 1e-15);
    }
}
