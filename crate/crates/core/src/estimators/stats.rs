use std::collections::BTreeMap;

use serde::Serialize;

/// Welford accumulator for mean and unbiased variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance with `n − 1` denominator; zero below two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Realized per-draw terms grouped by level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LevelStats {
    pub count: u64,
    pub mean: f64,
    pub second_moment: f64,
}

/// Point estimate plus the per-draw statistics behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    /// Arithmetic mean of the per-draw terms.
    pub estimate: f64,
    pub n_draws: usize,
    /// Payoff-vector evaluations consumed.
    pub cost_used: u64,
    pub term_variance: f64,
    /// Keyed by the level of the draw; empty for the nested estimators.
    pub per_level: BTreeMap<u32, LevelStats>,
}

impl EstimateResult {
    pub fn standard_error(&self) -> f64 {
        (self.term_variance / self.n_draws as f64).sqrt()
    }

    /// Terms are `(level, value, cost)` in draw order.
    pub(crate) fn from_terms(terms: impl IntoIterator<Item = (Option<u32>, f64, u64)>) -> Self {
        let mut sum = 0.0;
        let mut n = 0usize;
        let mut cost = 0u64;
        let mut moments = RunningMoments::default();
        let mut sums: BTreeMap<u32, (u64, f64, f64)> = BTreeMap::new();
        for (level, value, c) in terms {
            sum += value;
            n += 1;
            cost = cost.saturating_add(c);
            moments.push(value);
            if let Some(l) = level {
                let e = sums.entry(l).or_default();
                e.0 += 1;
                e.1 += value;
                e.2 += value * value;
            }
        }
        let per_level = sums
            .into_iter()
            .map(|(l, (count, s1, s2))| {
                let k = count as f64;
                (
                    l,
                    LevelStats {
                        count,
                        mean: s1 / k,
                        second_moment: s2 / k,
                    },
                )
            })
            .collect();
        Self {
            estimate: sum / n as f64,
            n_draws: n,
            cost_used: cost,
            term_variance: moments.variance(),
            per_level,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 3.25];
        let mut m = RunningMoments::default();
        xs.iter().for_each(|&x| m.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean() - mean).abs() < 1e-14);
        assert!((m.variance() - var).abs() < 1e-12);
        assert_eq!(m.count(), 5);
    }

    #[test]
    fn result_from_terms() {
        let r = EstimateResult::from_terms([
            (Some(1), 2.0, 2),
            (Some(2), -1.0, 4),
            (Some(1), 4.0, 2),
        ]);
        assert_eq!(r.estimate, 5.0 / 3.0);
        assert_eq!(r.n_draws, 3);
        assert_eq!(r.cost_used, 8);
        assert_eq!(r.per_level[&1].count, 2);
        assert_eq!(r.per_level[&1].mean, 3.0);
        assert_eq!(r.per_level[&1].second_moment, 10.0);
        assert_eq!(r.per_level[&2].mean, -1.0);
    }
}
