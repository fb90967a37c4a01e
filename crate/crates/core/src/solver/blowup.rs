use serde::{Deserialize, Serialize};

/// Monitored quantities over the trusted nodes at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub v_max: f64,
    pub lip: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    VMax,
    Lip,
    D2,
}

impl Quantity {
    /// The power of the quantity that diverges like c/(T − t).
    fn riccati_scale(self, s: &MonitorSample) -> f64 {
        match self {
            Quantity::VMax => s.v_max,
            Quantity::Lip => s.lip * s.lip,
            Quantity::D2 => s.d2,
        }
    }

    fn raw(self, s: &MonitorSample) -> f64 {
        match self {
            Quantity::VMax => s.v_max,
            Quantity::Lip => s.lip,
            Quantity::D2 => s.d2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default)]
    pub lip_max: Option<f64>,
    #[serde(default)]
    pub d2_max: Option<f64>,
}

impl Thresholds {
    pub fn armed(&self) -> bool {
        self.v_max.is_some() || self.lip_max.is_some() || self.d2_max.is_some()
    }

    fn entries(&self) -> impl Iterator<Item = (Quantity, f64)> {
        [(Quantity::VMax, self.v_max), (Quantity::Lip, self.lip_max), (Quantity::D2, self.d2_max)]
            .into_iter()
            .filter_map(|(q, t)| t.map(|t| (q, t)))
    }

    /// The first armed quantity at or above its threshold.
    pub fn crossed(&self, s: &MonitorSample) -> Option<Quantity> {
        self.entries().find(|&(q, th)| !(q.raw(s) < th)).map(|(q, _)| q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub quantity: Quantity,
    /// First sample time at or above the threshold.
    pub t_cross: f64,
    /// Extrapolated divergence time.
    pub t_star: f64,
    /// Samples used by the fit.
    pub window: usize,
}

/// Least-squares fit of 1/q = (T − t)/c; returns T.
pub fn fit_reciprocal(t: &[f64], q: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(q).filter(|(_, q)| **q > 0.0).map(|(t, q)| (*t, 1.0 / q)).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - mt) * (y - my);
        sxx += (x - mt) * (x - mt);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    Some(mt - my / slope)
}

/// First threshold crossing in the stream, with T* extrapolated from the
/// samples in the last decade below the threshold.
pub fn detect_blowup(samples: &[MonitorSample], th: &Thresholds) -> Option<BlowupEstimate> {
    let (idx, quantity, level) = samples
        .iter()
        .enumerate()
        .find_map(|(i, s)| th.entries().find(|&(q, l)| !(q.raw(s) < l)).map(|(q, l)| (i, q, l)))?;
    let floor = match quantity {
        Quantity::Lip => (level / 10.0).powi(2),
        _ => level / 10.0,
    };
    let mut start = idx;
    while start > 0 && quantity.riccati_scale(&samples[start - 1]) >= floor {
        start -= 1;
    }
    if idx + 1 - start < 8 {
        start = (idx + 1).saturating_sub(8);
    }
    let win = &samples[start..=idx];
    let ts: Vec<f64> = win.iter().map(|s| s.t).collect();
    let qs: Vec<f64> = win.iter().map(|s| quantity.riccati_scale(s)).collect();
    let t_cross = samples[idx].t;
    let t_star = fit_reciprocal(&ts, &qs).filter(|t| t.is_finite() && *t >= t_cross).unwrap_or(t_cross);
    Some(BlowupEstimate { quantity, t_cross, t_star, window: win.len() })
}
