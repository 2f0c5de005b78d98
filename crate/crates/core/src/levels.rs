//! Random level selection and budget allocation.
//!
//! A level-`l` correction consumes `b^l` payoff evaluations. Levels are drawn
//! from a probability mass function `p_L` with positive mass on every level;
//! the default is the geometric family `p_L(l) = (1 − r)·r^(l−1)`, whose tail
//! sums are `r^(j−1)`. With `r < 1/b` the expected cost of a draw,
//! `(1 − r)·b / (1 − r·b)`, is finite.
//!
//! When only a total budget `C` is given, the number of draws is the longest
//! prefix of an i.i.d. level sequence whose summed cost fits in `C`. A level
//! that does not fit ends the run; it is never redrawn.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// Distribution over levels `1, 2, …` used by the randomized estimators.
pub trait LevelLaw: Send + Sync {
    fn base(&self) -> u32;

    fn pmf(&self, level: u32) -> Result<f64>;

    /// `Σ_{k ≥ level} pmf(k)`.
    fn tail(&self, level: u32) -> Result<f64>;

    fn sample(&self, rng: &mut RngStream) -> u32;
}

/// `b^level`, saturating at `u64::MAX`.
pub fn level_cost(base: u32, level: u32) -> u64 {
    u64::from(base).checked_pow(level).unwrap_or(u64::MAX)
}

fn check_level(level: u32) -> Result<()> {
    if level < 1 {
        return Err(invalid("levels start at 1"));
    }
    Ok(())
}

/// Geometric level law `p_L(l) = (1 − r)·r^(l−1)` with sample growth `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDistribution {
    base: u32,
    ratio: f64,
}

impl LevelDistribution {
    /// Requires `b ≥ 2` and `0 < r < 1/b`.
    pub fn new(base: u32, ratio: f64) -> Result<Self> {
        if base < 2 {
            return Err(invalid(format!("base must be at least 2, got {base}")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid(format!("ratio must lie in (0, 1), got {ratio}")));
        }
        if ratio * f64::from(base) >= 1.0 {
            return Err(invalid(format!(
                "ratio {ratio} >= 1/{base}: expected cost per draw would be infinite"
            )));
        }
        Ok(Self { base, ratio })
    }

    /// `r = b^(−3/2)`, the choice for variance decay `b^(−2l)`.
    pub fn with_default_ratio(base: u32) -> Result<Self> {
        Self::new(base, default_ratio(base))
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Level for a uniform `u ∈ [0, 1)` by inverting the geometric CDF.
    pub fn level_from_uniform(&self, u: f64) -> u32 {
        let l = ((1.0 - u).ln() / self.ratio.ln()).ceil();
        if l < 1.0 {
            1
        } else if l >= f64::from(u32::MAX) {
            u32::MAX
        } else {
            l as u32
        }
    }

    /// `Σ_l pmf(l)·b^l = (1 − r)·b / (1 − r·b)`.
    pub fn expected_cost_per_draw(&self) -> f64 {
        let b = f64::from(self.base);
        (1.0 - self.ratio) * b / (1.0 - self.ratio * b)
    }
}

impl LevelLaw for LevelDistribution {
    fn base(&self) -> u32 {
        self.base
    }

    fn pmf(&self, level: u32) -> Result<f64> {
        check_level(level)?;
        Ok((1.0 - self.ratio) * self.ratio.powi(level as i32 - 1))
    }

    fn tail(&self, level: u32) -> Result<f64> {
        check_level(level)?;
        Ok(self.ratio.powi(level as i32 - 1))
    }

    fn sample(&self, rng: &mut RngStream) -> u32 {
        self.level_from_uniform(rng.next_f64())
    }
}

pub fn default_ratio(base: u32) -> f64 {
    f64::from(base).powf(-1.5)
}

/// Geometric ratio minimizing work-normalized variance when the squared
/// level corrections decay like `b^(−2ql)`: `r = b^(−(2q+1)/2)`.
pub fn optimal_ratio(base: u32, q: f64) -> Result<f64> {
    if base < 2 {
        return Err(invalid(format!("base must be at least 2, got {base}")));
    }
    if q.is_nan() || q <= 0.5 || q.is_infinite() {
        return Err(invalid(format!(
            "decay exponent q must exceed 1/2 for finite variance and cost, got {q}"
        )));
    }
    Ok(f64::from(base).powf(-(2.0 * q + 1.0) / 2.0))
}

/// Pilot estimates of `E[Δ_l²]`, the second moment of the unweighted level
/// correction, per level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalLevelProfile {
    pub second_moments: BTreeMap<u32, f64>,
    pub counts: BTreeMap<u32, u64>,
}

impl EmpiricalLevelProfile {
    pub fn insert(&mut self, level: u32, second_moment: f64, count: u64) {
        self.second_moments.insert(level, second_moment);
        self.counts.insert(level, count);
    }

    fn validate(&self) -> Result<()> {
        if self.second_moments.is_empty() {
            return Err(Error::DegenerateProfile("no profiled levels".into()));
        }
        for (&l, &m) in &self.second_moments {
            check_level(l)?;
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::DegenerateProfile(format!(
                    "second moment at level {l} is {m}"
                )));
            }
        }
        Ok(())
    }
}

/// Level law restricted to a finite set of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedLevelPmf {
    base: u32,
    levels: Vec<u32>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TruncatedLevelPmf {
    /// Normalizes non-negative `weights` over their levels.
    pub fn from_weights(base: u32, weights: &BTreeMap<u32, f64>) -> Result<Self> {
        if base < 2 {
            return Err(invalid(format!("base must be at least 2, got {base}")));
        }
        let total: f64 = weights.values().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateProfile("weights sum to zero".into()));
        }
        let levels: Vec<u32> = weights.keys().copied().collect();
        let probs: Vec<f64> = weights.values().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            base,
            levels,
            probs,
            cumulative,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.levels.iter().copied().zip(self.probs.iter().copied())
    }
}

impl LevelLaw for TruncatedLevelPmf {
    fn base(&self) -> u32 {
        self.base
    }

    fn pmf(&self, level: u32) -> Result<f64> {
        check_level(level)?;
        Ok(self
            .levels
            .binary_search(&level)
            .map(|i| self.probs[i])
            .unwrap_or(0.0))
    }

    fn tail(&self, level: u32) -> Result<f64> {
        check_level(level)?;
        Ok(self
            .iter()
            .filter(|&(l, _)| l >= level)
            .map(|(_, p)| p)
            .sum())
    }

    fn sample(&self, rng: &mut RngStream) -> u32 {
        let u = rng.next_f64() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.levels[i.min(self.levels.len() - 1)]
    }
}

/// Variance-optimal pmf `p(l) ∝ sqrt(E[Δ_l²] / b^l)`, normalized over the
/// profiled levels only. Mass beyond the deepest profiled level is dropped,
/// so estimators using it target the truncated telescoping sum.
pub fn optimal_pmf(profile: &EmpiricalLevelProfile, base: u32) -> Result<TruncatedLevelPmf> {
    profile.validate()?;
    let weights: BTreeMap<u32, f64> = profile
        .second_moments
        .iter()
        .map(|(&l, &m)| (l, (m / level_cost(base, l) as f64).sqrt()))
        .collect();
    if weights.values().all(|&w| w == 0.0) {
        return Err(Error::DegenerateProfile("all second moments are zero".into()));
    }
    TruncatedLevelPmf::from_weights(base, &weights)
}

/// Expected total cost for RMSE `epsilon` under the optimal pmf:
/// `ε^(−2)·(Σ_j sqrt(E[Δ_j²]·b^j))²`.
pub fn expected_cost_for_rmse(profile: &EmpiricalLevelProfile, base: u32, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    profile.validate()?;
    let s: f64 = profile
        .second_moments
        .iter()
        .map(|(&l, &m)| (m * f64::from(base).powf(f64::from(l))).sqrt())
        .sum();
    Ok(s * s / (epsilon * epsilon))
}

/// Outcome of the budget rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetDraws<T> {
    /// The accepted prefix; `items.len()` is the draw count `N`.
    pub items: Vec<T>,
    pub cost: u64,
    /// First draw that did not fit, with its cost.
    pub rejected: (T, u64),
}

impl<T> BudgetDraws<T> {
    pub fn n(&self) -> usize {
        self.items.len()
    }
}

/// Draws items until the next one would push the cumulative cost past
/// `budget`. Returns the longest fitting prefix, or
/// [`Error::BudgetExhausted`] if even the first item does not fit.
pub fn fill_budget<T>(budget: u64, mut next: impl FnMut() -> (T, u64)) -> Result<BudgetDraws<T>> {
    let mut items = Vec::new();
    let mut used = 0u64;
    loop {
        let (item, cost) = next();
        match used.checked_add(cost) {
            Some(total) if total <= budget => {
                used = total;
                items.push(item);
            }
            _ => {
                if items.is_empty() {
                    return Err(Error::BudgetExhausted {
                        budget,
                        first_cost: cost,
                    });
                }
                return Ok(BudgetDraws {
                    items,
                    cost: used,
                    rejected: (item, cost),
                });
            }
        }
    }
}

/// Level sequence for total budget `budget` with per-draw cost `b^l`.
pub fn draws_for_budget<L: LevelLaw + ?Sized>(
    law: &L,
    budget: u64,
    rng: &mut RngStream,
) -> Result<BudgetDraws<u32>> {
    let base = law.base();
    fill_budget(budget, || {
        let l = law.sample(rng);
        (l, level_cost(base, l))
    })
}
