//! Small numerical kernels shared across the crate.

/// Thomas algorithm for a tridiagonal system.
///
/// `lower[i]` multiplies `x[i-1]`, `upper[i]` multiplies `x[i+1]`; `lower[0]`
/// and `upper[n-1]` are ignored. Returns `None` when a pivot vanishes.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 || lower.len() != n || upper.len() != n || rhs.len() != n {
        return None;
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// Pairwise (cascade) summation. Order of evaluation is fixed by the slice
/// layout, so results are reproducible across runs and thread counts.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid_uniform(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => {
            let mut w = f.to_vec();
            w[0] *= 0.5;
            w[n - 1] *= 0.5;
            h * pairwise_sum(&w)
        }
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature with bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol.max(1e-15 * v.abs()) || depth >= 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    if a > b {
        return -rec(&f, b, a, tol, 0);
    }
    rec(&f, a, b, tol, 0)
}

/// C∞ step `S` rising from 0 (s ≤ 0) to 1 (s ≥ 1), built as the
/// `exp(-1/s)` partition of unity. Returns `(S, S', S'')`.
pub fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    // S = 1 / (1 + e^phi), phi = 1/s - 1/(1-s)
    let r = 1.0 - s;
    let phi = 1.0 / s - 1.0 / r;
    let dphi = -1.0 / (s * s) - 1.0 / (r * r);
    let d2phi = 2.0 / (s * s * s) - 2.0 / (r * r * r);
    if phi.abs() > 700.0 {
        let v = if phi > 0.0 { 0.0 } else { 1.0 };
        return (v, 0.0, 0.0);
    }
    let st = 1.0 / (1.0 + phi.exp());
    let q = st * (1.0 - st);
    let d1 = -q * dphi;
    let d2 = -d1 * (1.0 - 2.0 * st) * dphi - q * d2phi;
    (st, d1, d2)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Second derivative of the parabola through three (possibly nonuniform)
/// points.
pub fn second_divided(x: [f64; 3], f: [f64; 3]) -> f64 {
    let d01 = (f[1] - f[0]) / (x[1] - x[0]);
    let d12 = (f[2] - f[1]) / (x[2] - x[1]);
    2.0 * (d12 - d01) / (x[2] - x[0])
}

/// Cubic Lagrange interpolation on a sorted (nonuniform) node set.
/// Falls back to linear near the ends; clamps outside the range.
pub fn lagrange_cubic(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 || x <= xs[0] {
        return fs[0];
    }
    if x >= xs[n - 1] {
        return fs[n - 1];
    }
    let i = match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => return fs[i],
        Err(i) => i - 1,
    };
    if n < 4 {
        let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        return fs[i] + t * (fs[i + 1] - fs[i]);
    }
    let j0 = i.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for a in j0..j0 + 4 {
        let mut w = 1.0;
        for b in j0..j0 + 4 {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += w * fs[a];
    }
    acc
}

/// Japanese bracket ⟨x⟩ = (1 + x²)^{1/2}.
#[inline]
pub fn jb(x: f64) -> f64 {
    x.hypot(1.0)
}
