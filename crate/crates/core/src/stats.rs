//! Small descriptive-statistics helpers shared by the reports.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile (`q` in `[0, 1]`) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    match sorted.len() {
        0 => None,
        1 => Some(sorted[0]),
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
        }
    }
}

/// Location summary of a sample of scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

impl ScoreSummary {
    /// `None` for an empty sample. The sum runs in input order.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Some(ScoreSummary {
            count: values.len(),
            mean,
            min: sorted[0],
            p25: quantile_sorted(&sorted, 0.25)?,
            median: quantile_sorted(&sorted, 0.5)?,
            p75: quantile_sorted(&sorted, 0.75)?,
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Equal-width histogram over a closed interval; the last bin includes `upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lower: f64, upper: f64, bins: usize, values: &[f64]) -> Self {
        let bins = bins.max(1);
        let mut counts = alloc::vec![0usize; bins];
        let width = (upper - lower) / bins as f64;
        for &v in values {
            let idx = if v >= upper {
                bins - 1
            } else if v <= lower {
                0
            } else {
                (libm::floor((v - lower) / width) as usize).min(bins - 1)
            };
            counts[idx] += 1;
        }
        Histogram {
            lower,
            upper,
            counts,
        }
    }
}
