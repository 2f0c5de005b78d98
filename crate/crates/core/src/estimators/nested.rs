//! Standard (biased) Monte Carlo estimators.
//!
//! Both subtract `max_d` of a pooled mean over `L` prior samples, which is
//! biased upward by Jensen's inequality. The EVPPI form additionally averages
//! the `M`-sample inner conditional means inside the maximum, which biases
//! its first term upward too.

use crate::error::{invalid, Result};
use crate::model::{argmax_first, DecisionModel, FactoredSampler, PriorSampler};
use crate::rng::RngStream;

use super::stats::EstimateResult;

const OUTER_STREAM: u64 = 1;
const POOLED_STREAM: u64 = 2;
const INNER_STREAM: u64 = 3;

/// `Q = max_d (1/N) Σ_n f_d(x_n)`: the maximum of per-decision means.
pub fn q_stat<S: AsRef<[f64]>>(model: &DecisionModel, samples: &[S]) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("q_stat needs at least one sample"));
    }
    let k = model.n_decisions();
    let mut sums = vec![0.0; k];
    let mut row = vec![0.0; k];
    for x in samples {
        model.payoff_into(x.as_ref(), &mut row)?;
        sums.iter_mut().zip(&row).for_each(|(s, v)| *s += v);
    }
    let n = samples.len() as f64;
    sums.iter_mut().for_each(|s| *s /= n);
    Ok(argmax_first(&sums).0)
}

/// Sample sizes for the nested estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestedSizes {
    /// `L`, prior samples behind the pooled second term.
    pub pooled: usize,
    /// `M`, conditional samples per outer draw (EVPPI only).
    pub inner: usize,
    /// `N`, outer draws.
    pub outer: usize,
}

/// Splits a budget `C = M·N` as `N = ⌊C^w⌋`, `M = ⌊C^(1−w)⌋` with
/// `w = 2γ/(1 + 2γ)`, which balances `N^(−1/2)` noise against an `M^(−γ)`
/// inner bias. Returns `(M, N)`, each at least 1.
pub fn nested_allocation(budget: u64, gamma: f64) -> Result<(usize, usize)> {
    if budget < 4 {
        return Err(invalid(format!("budget must be at least 4, got {budget}")));
    }
    if gamma.is_nan() || gamma <= 0.5 {
        return Err(invalid(format!(
            "gamma must exceed 1/2 for the allocation heuristic, got {gamma}"
        )));
    }
    let w = if gamma.is_infinite() {
        1.0
    } else {
        2.0 * gamma / (1.0 + 2.0 * gamma)
    };
    let c = budget as f64;
    let m = floor_pow(c, 1.0 - w).max(1);
    let n = floor_pow(c, w).max(1);
    Ok((m, n))
}

/// `⌊c^e⌋`, nudged so exact powers such as `4096^(1/3)` do not round down.
fn floor_pow(c: f64, e: f64) -> usize {
    let v = c.powf(e);
    let nearest = v.round();
    if (v - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        v.floor() as usize
    }
}

fn pooled_max<P: PriorSampler + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    pooled: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let k = model.n_decisions();
    let mut x = vec![0.0; model.dimension()];
    let mut row = vec![0.0; k];
    let mut sums = vec![0.0; k];
    for _ in 0..pooled {
        prior.draw(rng, &mut x);
        model.payoff_into(&x, &mut row)?;
        sums.iter_mut().zip(&row).for_each(|(s, v)| *s += v);
    }
    let l = pooled as f64;
    sums.iter_mut().for_each(|s| *s /= l);
    Ok(argmax_first(&sums).0)
}

/// `(1/N) Σ_n max_d f_d(x_n) − max_d (1/L) Σ_l f_d(x'_l)` with independent
/// streams for `x` and `x'`. Per-draw terms are `max_d f_d(x_n)` minus the
/// pooled maximum.
pub fn evpi_nested<P: PriorSampler + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    pooled: usize,
    outer: usize,
    rng: &RngStream,
) -> Result<EstimateResult> {
    if pooled < 1 || outer < 1 {
        return Err(invalid("L and N must be at least 1"));
    }
    if prior.dimension() != model.dimension() {
        return Err(invalid("prior and model dimensions differ"));
    }
    let second = pooled_max(model, prior, pooled, &mut rng.derive(POOLED_STREAM))?;
    let mut outer_rng = rng.derive(OUTER_STREAM);
    let mut x = vec![0.0; model.dimension()];
    let mut row = vec![0.0; model.n_decisions()];
    let mut terms = Vec::with_capacity(outer);
    for _ in 0..outer {
        prior.draw(&mut outer_rng, &mut x);
        model.payoff_into(&x, &mut row)?;
        terms.push((None, argmax_first(&row).0 - second, 1));
    }
    let mut result = EstimateResult::from_terms(terms);
    result.cost_used += pooled as u64;
    Ok(result)
}

/// Nested EVPPI estimator: outer draws `x1_n` from the marginal, `M`
/// conditional draws each, and the same pooled second term as
/// [`evpi_nested`]. Cost is `N·M + L`.
pub fn evppi_nested<F, P>(
    model: &DecisionModel,
    factored: &F,
    prior: &P,
    sizes: NestedSizes,
    rng: &RngStream,
) -> Result<EstimateResult>
where
    F: FactoredSampler + ?Sized,
    P: PriorSampler + ?Sized,
{
    let NestedSizes {
        pooled,
        inner,
        outer,
    } = sizes;
    if pooled < 1 || inner < 1 || outer < 1 {
        return Err(invalid("L, M and N must be at least 1"));
    }
    let split = factored.split();
    if prior.dimension() != model.dimension() || split.dimension() != model.dimension() {
        return Err(invalid("sampler and model dimensions differ"));
    }
    let second = pooled_max(model, prior, pooled, &mut rng.derive(POOLED_STREAM))?;
    let mut outer_rng = rng.derive(OUTER_STREAM);
    let mut inner_rng = rng.derive(INNER_STREAM);
    let k = model.n_decisions();
    let mut x1 = vec![0.0; split.first().len()];
    let mut x2 = vec![0.0; split.second().len()];
    let mut x = vec![0.0; model.dimension()];
    let mut row = vec![0.0; k];
    let mut sums = vec![0.0; k];
    let mut terms = Vec::with_capacity(outer);
    for _ in 0..outer {
        factored.draw_marginal(&mut outer_rng, &mut x1);
        sums.iter_mut().for_each(|s| *s = 0.0);
        for _ in 0..inner {
            factored.draw_conditional(&x1, &mut inner_rng, &mut x2);
            split.assemble(&x1, &x2, &mut x);
            model.payoff_into(&x, &mut row)?;
            sums.iter_mut().zip(&row).for_each(|(s, v)| *s += v);
        }
        let m = inner as f64;
        sums.iter_mut().for_each(|s| *s /= m);
        terms.push((None, argmax_first(&sums).0 - second, inner as u64));
    }
    let mut result = EstimateResult::from_terms(terms);
    result.cost_used += pooled as u64;
    Ok(result)
}
