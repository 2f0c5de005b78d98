//! Level corrections `Y_l` (EVPI) and `Z_l` (EVPI − EVPPI).
//!
//! A level-`l` term evaluates the payoffs at `b^l` fresh samples once and
//! reuses them for every block average. Block means are built bottom-up: the
//! means of size `b^j` blocks are the averages of their `b` child blocks of
//! size `b^(j−1)`, blocks taken consecutively. The unweighted correction at
//! depth `j` is
//!
//! ```text
//! Δ_j = mean over parents μ of [ (1/b)·Σ_{children c} max_d m_c,d − max_d m_μ,d ]
//! ```
//!
//! which is the difference of the block-average `Q` statistics at sizes
//! `b^(j−1)` and `b^j`. The single-term value is `Δ_l / p_L(l)` and the
//! coupled-sum value is `Σ_{j≤l} Δ_j / tail(j)`.
//!
//! Each parent's bracket uses the same summation for the child maxima and the
//! parent means, so a model with one decision or constant payoffs produces
//! exactly zero, and every bracket is non-negative in floating point.

use crate::error::{invalid, Result};
use crate::levels::{level_cost, LevelLaw};
use crate::model::{argmax_first, DecisionModel, FactoredSampler, PriorSampler};
use crate::rng::RngStream;

/// Which randomized MLMC form to use for a level term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Single,
    Coupled,
}

/// One realized `Y` or `Z` term, weights included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelTerm {
    pub level: u32,
    pub value: f64,
    /// Payoff evaluations consumed, `b^level`.
    pub cost: u64,
}

/// Unweighted corrections `Δ_1, …, Δ_level` from a row-major payoff matrix
/// with `b^level` rows and `n_decisions` columns.
pub fn corrections_from_payoffs(
    payoffs: &[f64],
    n_decisions: usize,
    base: u32,
    level: u32,
) -> Result<Vec<f64>> {
    let rows = sample_count(base, level)?;
    if n_decisions == 0 || payoffs.len() != rows * n_decisions {
        return Err(invalid(format!(
            "payoff matrix has {} entries, expected {rows} x {n_decisions}",
            payoffs.len()
        )));
    }
    let k = n_decisions;
    let b = base as usize;
    let bf = f64::from(base);

    let mut means = payoffs.to_vec();
    let mut maxima: Vec<f64> = means.chunks_exact(k).map(|row| argmax_first(row).0).collect();
    let mut out = Vec::with_capacity(level as usize);
    for _ in 0..level {
        let n_parent = maxima.len() / b;
        let mut parent_means = vec![0.0; n_parent * k];
        let mut parent_maxima = Vec::with_capacity(n_parent);
        let mut total = 0.0;
        for (mu, pm) in parent_means.chunks_exact_mut(k).enumerate() {
            let mut sum_max = 0.0;
            for c in mu * b..(mu + 1) * b {
                for (p, v) in pm.iter_mut().zip(&means[c * k..(c + 1) * k]) {
                    *p += v;
                }
                sum_max += maxima[c];
            }
            pm.iter_mut().for_each(|p| *p /= bf);
            let parent_max = argmax_first(pm).0;
            total += sum_max / bf - parent_max;
            parent_maxima.push(parent_max);
        }
        out.push(total / n_parent as f64);
        means = parent_means;
        maxima = parent_maxima;
    }
    Ok(out)
}

/// Weighted term value from the corrections of one sample set.
pub fn weighted_value<L: LevelLaw + ?Sized>(
    corrections: &[f64],
    law: &L,
    variant: Variant,
) -> Result<f64> {
    let level = corrections.len() as u32;
    match variant {
        Variant::Single => Ok(corrections[corrections.len() - 1] / law.pmf(level)?),
        Variant::Coupled => {
            let mut v = 0.0;
            for (j, d) in (1..=level).zip(corrections) {
                v += d / law.tail(j)?;
            }
            Ok(v)
        }
    }
}

fn sample_count(base: u32, level: u32) -> Result<usize> {
    if level < 1 {
        return Err(invalid("levels start at 1"));
    }
    let n = level_cost(base, level);
    if n > (1u64 << 40) {
        return Err(invalid(format!("level {level} with base {base} is too deep to evaluate")));
    }
    Ok(n as usize)
}

/// `Y` term on caller-supplied samples (exactly `b^level` of them).
pub fn y_term_on_samples<S: AsRef<[f64]>, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    samples: &[S],
    level: u32,
    law: &L,
    variant: Variant,
) -> Result<LevelTerm> {
    let base = law.base();
    let n = sample_count(base, level)?;
    if samples.len() != n {
        return Err(invalid(format!(
            "level {level} needs {n} samples, got {}",
            samples.len()
        )));
    }
    let k = model.n_decisions();
    let mut payoffs = vec![0.0; n * k];
    for (row, x) in payoffs.chunks_exact_mut(k).zip(samples) {
        model.payoff_into(x.as_ref(), row)?;
    }
    finish(&payoffs, k, level, law, variant)
}

fn finish<L: LevelLaw + ?Sized>(
    payoffs: &[f64],
    k: usize,
    level: u32,
    law: &L,
    variant: Variant,
) -> Result<LevelTerm> {
    let corrections = corrections_from_payoffs(payoffs, k, law.base(), level)?;
    Ok(LevelTerm {
        level,
        value: weighted_value(&corrections, law, variant)?,
        cost: level_cost(law.base(), level),
    })
}

/// Payoff matrix at `b^level` fresh prior samples.
pub(crate) fn prior_payoffs<P: PriorSampler + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    base: u32,
    level: u32,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let n = sample_count(base, level)?;
    if prior.dimension() != model.dimension() {
        return Err(invalid("prior and model dimensions differ"));
    }
    let k = model.n_decisions();
    let mut x = vec![0.0; model.dimension()];
    let mut payoffs = vec![0.0; n * k];
    for row in payoffs.chunks_exact_mut(k) {
        prior.draw(rng, &mut x);
        model.payoff_into(&x, row)?;
    }
    Ok(payoffs)
}

/// Payoff matrix at `(x1, x2_m)` for `b^level` conditional draws `x2_m`.
pub(crate) fn conditional_payoffs<F: FactoredSampler + ?Sized>(
    model: &DecisionModel,
    factored: &F,
    x1: &[f64],
    base: u32,
    level: u32,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let n = sample_count(base, level)?;
    let split = factored.split();
    if split.dimension() != model.dimension() {
        return Err(invalid("factored sampler and model dimensions differ"));
    }
    if x1.len() != split.first().len() {
        return Err(invalid(format!(
            "x1 has length {}, split reveals {} coordinates",
            x1.len(),
            split.first().len()
        )));
    }
    let k = model.n_decisions();
    let mut x2 = vec![0.0; split.second().len()];
    let mut x = vec![0.0; model.dimension()];
    let mut payoffs = vec![0.0; n * k];
    for row in payoffs.chunks_exact_mut(k) {
        factored.draw_conditional(x1, rng, &mut x2);
        split.assemble(x1, &x2, &mut x);
        model.payoff_into(&x, row)?;
    }
    Ok(payoffs)
}

pub fn y_term<P: PriorSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    level: u32,
    law: &L,
    variant: Variant,
    rng: &mut RngStream,
) -> Result<LevelTerm> {
    let payoffs = prior_payoffs(model, prior, law.base(), level, rng)?;
    finish(&payoffs, model.n_decisions(), level, law, variant)
}

pub fn y_single<P: PriorSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    level: u32,
    law: &L,
    rng: &mut RngStream,
) -> Result<LevelTerm> {
    y_term(model, prior, level, law, Variant::Single, rng)
}

pub fn y_coupled<P: PriorSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    level: u32,
    law: &L,
    rng: &mut RngStream,
) -> Result<LevelTerm> {
    y_term(model, prior, level, law, Variant::Coupled, rng)
}

pub fn z_term<F: FactoredSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    factored: &F,
    x1: &[f64],
    level: u32,
    law: &L,
    variant: Variant,
    rng: &mut RngStream,
) -> Result<LevelTerm> {
    let payoffs = conditional_payoffs(model, factored, x1, law.base(), level, rng)?;
    finish(&payoffs, model.n_decisions(), level, law, variant)
}

pub fn z_single<F: FactoredSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    factored: &F,
    x1: &[f64],
    level: u32,
    law: &L,
    rng: &mut RngStream,
) -> Result<LevelTerm> {
    z_term(model, factored, x1, level, law, Variant::Single, rng)
}

pub fn z_coupled<F: FactoredSampler + ?Sized, L: LevelLaw + ?Sized>(
    model: &DecisionModel,
    factored: &F,
    x1: &[f64],
    level: u32,
    law: &L,
    rng: &mut RngStream,
) -> Result<LevelTerm> {
    z_term(model, factored, x1, level, law, Variant::Coupled, rng)
}

/// Unweighted top-level correction `Δ_level` on fresh prior samples.
pub fn y_correction<P: PriorSampler + ?Sized>(
    model: &DecisionModel,
    prior: &P,
    base: u32,
    level: u32,
    rng: &mut RngStream,
) -> Result<f64> {
    let payoffs = prior_payoffs(model, prior, base, level, rng)?;
    let c = corrections_from_payoffs(&payoffs, model.n_decisions(), base, level)?;
    Ok(c[c.len() - 1])
}
