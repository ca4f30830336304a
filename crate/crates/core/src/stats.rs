//! Order statistics and normal tail probabilities.

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`, the inclusive-hinge rule). `sorted` must be ascending
/// and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v = sorted(values);
    (!v.is_empty()).then(|| quantile_sorted(&v, 0.5))
}

/// Five-number box summary with Tukey whiskers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    /// Smallest value not below `q1 - 1.5 iqr`.
    pub whisker_low: f64,
    /// Largest value not above `q3 + 1.5 iqr`.
    pub whisker_high: f64,
    pub count: usize,
}

impl BoxStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v = sorted(values);
        if v.is_empty() {
            return None;
        }
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let whisker_low = v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(q1);
        let whisker_high = v.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(q3);
        Some(Self {
            median: quantile_sorted(&v, 0.5),
            q1,
            q3,
            iqr,
            whisker_low,
            whisker_high,
            count: v.len(),
        })
    }
}

/// Two-sided tail probability `2 (1 - Φ(|z|))`, accurate far into the tail.
pub fn two_sided_normal_p(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}
