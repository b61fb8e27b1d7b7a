//! Small statistics helpers for seed aggregation and ordering tests.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for `mean(a - b) > 0`.
    pub p_value: f64,
}

impl PairedTest {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// One-sided paired t-test of `a > b`. Pairs must line up (same seed).
pub fn paired_one_sided(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean_diff = mean(&diffs);
    let sd = sample_sd(&diffs);
    if n < 2 || sd == 0.0 {
        let p_value = if mean_diff > 0.0 { 0.0 } else if mean_diff < 0.0 { 1.0 } else { 0.5 };
        let t = if mean_diff == 0.0 { 0.0 } else { mean_diff.signum() * f64::INFINITY };
        return PairedTest { n, mean_diff, t, p_value };
    }
    let t = mean_diff / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    PairedTest { n, mean_diff, t, p_value: 1.0 - dist.cdf(t) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sd_of_two_points() {
        assert!((sample_sd(&[0.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sample_sd(&[5.0]), 0.0);
        assert_eq!(sample_sd(&[3.0, 3.0, 3.0]), 0.0);
    }

    #[test]
    fn paired_test_reference_value() {
        // diffs 1, 2, 3, 4: mean 2.5, sd 1.29099, t = 3.87298, df 3.
        // Upper tail of t(3) at 3.87298 is 0.0152331 (scipy.stats.t.sf).
        let r = paired_one_sided(&[2.0, 4.0, 6.0, 8.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!((r.t - 3.872_983_346).abs() < 1e-8);
        assert!((r.p_value - 0.015_233_146).abs() < 1e-7, "{}", r.p_value);
        assert!(r.significant(0.05));
    }

    #[test]
    fn degenerate_differences() {
        assert_eq!(paired_one_sided(&[2.0, 2.0], &[1.0, 1.0]).p_value, 0.0);
        assert_eq!(paired_one_sided(&[1.0, 1.0], &[2.0, 2.0]).p_value, 1.0);
    }
}
