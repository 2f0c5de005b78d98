//! Randomized multilevel estimators with a total budget.
//!
//! The level sequence is drawn serially from its own stream and cut by the
//! budget rule before any payoff is evaluated; draw `n` then uses a stream
//! derived from `n` alone. Draws are evaluated in parallel and reduced in
//! order, so the result does not depend on the number of workers.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::levels::{fill_budget, level_cost, EmpiricalLevelProfile, LevelLaw};
use crate::model::{DecisionModel, FactoredSampler, PriorSampler};
use crate::rng::RngStream;

use super::stats::{EstimateResult, RunningMoments};
use super::terms::{conditional_payoffs, corrections_from_payoffs, prior_payoffs, weighted_value, Variant};

const LEVEL_STREAM: u64 = 0;
const Y_STREAM: u64 = 0;
const MARGINAL_STREAM: u64 = 1;
const Z_STREAM: u64 = 2;

fn draw_stream(rng: &RngStream, n: usize) -> RngStream {
    rng.derive(n as u64 + 1)
}

fn y_value<P: PriorSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    law: &L,
    level: u32,
    variant: Variant,
    rng: &mut RngStream,
) -> Result<f64> {
    let payoffs = prior_payoffs(model, prior, law.base(), level, rng)?;
    let c = corrections_from_payoffs(&payoffs, model.n_decisions(), law.base(), level)?;
    weighted_value(&c, law, variant)
}

/// Unbiased EVPI estimator `(1/N) Σ_n Y_{l_n}`, with `N` set by the budget
/// rule at cost `b^l` per draw.
pub fn evpi_mlmc<P, L>(
    model: &DecisionModel,
    prior: &P,
    law: &L,
    budget: u64,
    variant: Variant,
    rng: &RngStream,
) -> Result<EstimateResult>
where
    P: PriorSampler + ?Sized,
    L: LevelLaw + ?Sized,
{
    let base = law.base();
    if budget < u64::from(base) {
        return Err(invalid(format!(
            "budget {budget} is below the cost of one level-1 draw ({base})"
        )));
    }
    let mut level_rng = rng.derive(LEVEL_STREAM);
    let draws = fill_budget(budget, || {
        let l = law.sample(&mut level_rng);
        (l, level_cost(base, l))
    })?;
    let terms = draws
        .items
        .par_iter()
        .enumerate()
        .with_min_len(16)
        .map(|(n, &l)| {
            let mut s = draw_stream(rng, n).derive(Y_STREAM);
            let v = y_value(model, prior, law, l, variant, &mut s)?;
            Ok((Some(l), v, level_cost(base, l)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateResult::from_terms(terms))
}

/// Choice of `Y` and `Z` forms and level sharing for [`evppi_mlmc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvppiConfig {
    pub y: Variant,
    pub z: Variant,
    /// One level per draw for both terms; otherwise independent levels.
    pub shared_level: bool,
}

impl Default for EvppiConfig {
    fn default() -> Self {
        Self {
            y: Variant::Coupled,
            z: Variant::Coupled,
            shared_level: true,
        }
    }
}

/// Unbiased EVPPI estimator `(1/N) Σ_n (Y_{l_n} − Z_{l'_n, x1_n})`.
///
/// Each draw pays for both terms, `b^l + b^l'`. With `shared_level`,
/// `l' = l`. The `Y` samples of draw `n` come from the same stream as in
/// [`evpi_mlmc`]. Per-level diagnostics are keyed by the `Y` level.
pub fn evppi_mlmc<F, P, L>(
    model: &DecisionModel,
    factored: &F,
    prior: &P,
    law: &L,
    budget: u64,
    config: EvppiConfig,
    rng: &RngStream,
) -> Result<EstimateResult>
where
    F: FactoredSampler + ?Sized,
    P: PriorSampler + ?Sized,
    L: LevelLaw + ?Sized,
{
    let base = law.base();
    if budget < 2 * u64::from(base) {
        return Err(invalid(format!(
            "budget {budget} is below the cost of one level-1 draw pair ({})",
            2 * base
        )));
    }
    let split = factored.split();
    let mut level_rng = rng.derive(LEVEL_STREAM);
    let draws = fill_budget(budget, || {
        let l = law.sample(&mut level_rng);
        let lz = if config.shared_level {
            l
        } else {
            law.sample(&mut level_rng)
        };
        ((l, lz), level_cost(base, l).saturating_add(level_cost(base, lz)))
    })?;
    let terms = draws
        .items
        .par_iter()
        .enumerate()
        .with_min_len(16)
        .map(|(n, &(ly, lz))| {
            let d = draw_stream(rng, n);
            let y = y_value(model, prior, law, ly, config.y, &mut d.derive(Y_STREAM))?;
            let mut x1 = vec![0.0; split.first().len()];
            factored.draw_marginal(&mut d.derive(MARGINAL_STREAM), &mut x1);
            let payoffs =
                conditional_payoffs(model, factored, &x1, base, lz, &mut d.derive(Z_STREAM))?;
            let c = corrections_from_payoffs(&payoffs, model.n_decisions(), base, lz)?;
            let z = weighted_value(&c, law, config.z)?;
            Ok((Some(ly), y - z, level_cost(base, ly) + level_cost(base, lz)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateResult::from_terms(terms))
}

/// Pilot estimates of `E[Δ_l²]` for the unweighted EVPI correction, using
/// `per_level` independent realizations at each level in `levels`.
pub fn pilot_profile<P: PriorSampler + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    base: u32,
    levels: RangeInclusive<u32>,
    per_level: usize,
    rng: &RngStream,
) -> Result<EmpiricalLevelProfile> {
    if per_level == 0 || levels.is_empty() || *levels.start() < 1 {
        return Err(invalid("pilot needs a non-empty level range starting at 1 and per_level > 0"));
    }
    let mut profile = EmpiricalLevelProfile::default();
    for l in levels {
        let level_rng = rng.derive(u64::from(l));
        let squares = (0..per_level)
            .into_par_iter()
            .map(|i| {
                let mut s = level_rng.derive(i as u64);
                let payoffs = prior_payoffs(model, prior, base, l, &mut s)?;
                let c = corrections_from_payoffs(&payoffs, model.n_decisions(), base, l)?;
                Ok(c[c.len() - 1].powi(2))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut m = RunningMoments::default();
        squares.iter().for_each(|&v| m.push(v));
        profile.insert(l, m.mean(), per_level as u64);
    }
    Ok(profile)
}

/// Default pilot: 1000 realizations at each of levels 1 to 6.
pub fn default_pilot_profile<P: PriorSampler + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    base: u32,
    rng: &RngStream,
) -> Result<EmpiricalLevelProfile> {
    pilot_profile(model, prior, base, 1..=6, 1000, rng)
}
