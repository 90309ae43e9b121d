//! Small descriptive-statistics helpers shared by the report builders.

use serde::{Deserialize, Serialize};

/// Percentile `q` in `[0, 100]` of an ascending-sorted slice, with linear
/// interpolation between closest ranks.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    percentile_sorted(&sorted(values), 50.0)
}

/// Boxplot data: 1st, 25th, 50th, 75th and 99th percentiles plus the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub p1: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p99: f64,
    pub mean: f64,
}

impl BoxSummary {
    pub fn of(values: &[f64]) -> Self {
        let s = sorted(values);
        Self {
            p1: percentile_sorted(&s, 1.0),
            p25: percentile_sorted(&s, 25.0),
            p50: percentile_sorted(&s, 50.0),
            p75: percentile_sorted(&s, 75.0),
            p99: percentile_sorted(&s, 99.0),
            mean: mean(values),
        }
    }

    pub fn spread(&self) -> f64 {
        self.p99 - self.p1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile_sorted(&v, 0.0), 1.0);
        assert_eq!(percentile_sorted(&v, 50.0), 3.0);
        assert_eq!(percentile_sorted(&v, 100.0), 5.0);
        assert_eq!(percentile_sorted(&v, 25.0), 2.0);
        assert!((percentile_sorted(&v, 99.0) - 4.96).abs() < 1e-12);
        assert_eq!(percentile_sorted(&[7.0], 3.0), 7.0);
    }

    #[test]
    fn box_summary_is_monotone() {
        let b = BoxSummary::of(&[5.0, -1.0, 3.0, 3.5, 10.0, 0.0]);
        assert!(b.p1 <= b.p25 && b.p25 <= b.p50 && b.p50 <= b.p75 && b.p75 <= b.p99);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
