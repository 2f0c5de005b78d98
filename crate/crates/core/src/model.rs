//! Decision problems under parameter uncertainty.
//!
//! A [`DecisionModel`] holds a finite, ordered list of decisions and a payoff
//! rule that evaluates every decision at one parameter vector. Payoffs are
//! assumed square-integrable under the prior; nothing here checks that.
//!
//! Uncertainty enters through samplers: [`PriorSampler`] draws the full
//! vector `x`, and [`FactoredSampler`] draws it in two stages, first the
//! revealed coordinates `x1` from their marginal and then the rest `x2`
//! from the conditional given `x1`. The coordinate partition is a [`Split`].

use std::collections::HashSet;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

type PayoffFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Finite decision set with a vector-valued payoff rule.
///
/// One call to [`DecisionModel::payoff_into`] is one cost unit, whatever the
/// number of decisions.
pub struct DecisionModel {
    decisions: Vec<String>,
    dimension: usize,
    payoff: Box<PayoffFn>,
}

/// Largest payoff at a point and the first decision attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPayoff {
    pub value: f64,
    pub decision: usize,
}

impl DecisionModel {
    /// `payoff(x, out)` must write `f_d(x)` into `out[d]` for every decision and
    /// must not keep state between calls.
    pub fn new<F>(decisions: Vec<String>, dimension: usize, payoff: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if decisions.is_empty() {
            return Err(invalid("decision list is empty"));
        }
        let mut seen = HashSet::new();
        for d in &decisions {
            if !seen.insert(d.as_str()) {
                return Err(invalid(format!("duplicate decision `{d}`")));
            }
        }
        if dimension == 0 {
            return Err(invalid("parameter dimension must be positive"));
        }
        Ok(Self {
            decisions,
            dimension,
            payoff: Box::new(payoff),
        })
    }

    /// Builds a model from one scalar payoff function per decision.
    pub fn from_functions(
        dimension: usize,
        functions: Vec<(String, ScalarPayoff)>,
    ) -> Result<Self> {
        let (names, fs): (Vec<_>, Vec<_>) = functions.into_iter().unzip();
        Self::new(names, dimension, move |x, out| {
            for (o, f) in out.iter_mut().zip(&fs) {
                *o = f(x);
            }
        })
    }

    pub fn decisions(&self) -> &[String] {
        &self.decisions
    }

    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Evaluates every decision at `x` into `out`.
    pub fn payoff_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(invalid(format!(
                "parameter vector has length {}, model dimension is {}",
                x.len(),
                self.dimension
            )));
        }
        if out.len() != self.decisions.len() {
            return Err(invalid(format!(
                "output buffer has length {}, model has {} decisions",
                out.len(),
                self.decisions.len()
            )));
        }
        (self.payoff)(x, out);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePayoff {
                decision: self.decisions[i].clone(),
                x: x.to_vec(),
            });
        }
        Ok(())
    }

    pub fn payoff_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.decisions.len()];
        self.payoff_into(x, &mut out)?;
        Ok(out)
    }

    pub fn max_payoff(&self, x: &[f64]) -> Result<MaxPayoff> {
        let v = self.payoff_vector(x)?;
        let (value, decision) = argmax_first(&v);
        Ok(MaxPayoff { value, decision })
    }
}

impl fmt::Debug for DecisionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecisionModel")
            .field("decisions", &self.decisions)
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

/// Maximum of a non-empty slice and the lowest index attaining it.
pub fn argmax_first(values: &[f64]) -> (f64, usize) {
    let mut best = (values[0], 0);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

/// Payoff of a single decision, for [`DecisionModel::from_functions`].
pub type ScalarPayoff = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Draws i.i.d. parameter vectors from the prior.
pub trait PriorSampler: Send + Sync {
    fn dimension(&self) -> usize;

    fn draw(&self, rng: &mut RngStream, x: &mut [f64]);
}

/// Partition of coordinates `0..dimension` into revealed (`first`) and
/// remaining (`second`) indices, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Split {
    dimension: usize,
    first: Vec<usize>,
    second: Vec<usize>,
}

impl Split {
    /// `first` holds zero-based coordinate indices.
    pub fn new(dimension: usize, first: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut first: Vec<usize> = first.into_iter().collect();
        let given = first.len();
        first.sort_unstable();
        first.dedup();
        if first.len() != given {
            return Err(invalid("subset contains duplicate indices"));
        }
        if let Some(&bad) = first.iter().find(|&&j| j >= dimension) {
            return Err(invalid(format!(
                "subset index {} out of range 1..={dimension}",
                bad + 1
            )));
        }
        let second = (0..dimension).filter(|j| first.binary_search(j).is_err()).collect();
        Ok(Self {
            dimension,
            first,
            second,
        })
    }

    /// Parses one-based indices, as used in config files and on the command line.
    pub fn from_one_based(dimension: usize, indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(invalid("subset indices are 1-based; got 0"));
        }
        Self::new(dimension, indices.iter().map(|j| j - 1))
    }

    pub fn full(dimension: usize) -> Self {
        Self {
            dimension,
            first: (0..dimension).collect(),
            second: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn first(&self) -> &[usize] {
        &self.first
    }

    pub fn second(&self) -> &[usize] {
        &self.second
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.first.iter().map(|j| j + 1).collect()
    }

    /// Scatters `x1` and `x2` into their coordinates of `out`.
    pub fn assemble(&self, x1: &[f64], x2: &[f64], out: &mut [f64]) {
        for (&j, &v) in self.first.iter().zip(x1) {
            out[j] = v;
        }
        for (&j, &v) in self.second.iter().zip(x2) {
            out[j] = v;
        }
    }
}

/// Two-stage sampler: marginal of the revealed coordinates, then the
/// conditional of the remaining ones.
pub trait FactoredSampler: Send + Sync {
    fn split(&self) -> &Split;

    /// Writes `split().first().len()` values.
    fn draw_marginal(&self, rng: &mut RngStream, x1: &mut [f64]);

    /// Writes `split().second().len()` values drawn given `x1`.
    fn draw_conditional(&self, x1: &[f64], rng: &mut RngStream, x2: &mut [f64]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(w0: f64) -> DecisionModel {
        DecisionModel::new(vec!["d1".into(), "d2".into()], 5, move |x, out| {
            out[0] = w0 + x.iter().sum::<f64>();
            out[1] = 0.0;
        })
        .unwrap()
    }

    #[test]
    fn payoff_vector_examples() {
        let m = linear(0.0);
        assert_eq!(m.payoff_vector(&[0.0; 5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.payoff_vector(&[1.0; 5]).unwrap(), vec![5.0, 0.0]);
        let m2 = linear(2.0);
        assert_eq!(
            m2.payoff_vector(&[-1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn max_payoff_examples() {
        let m = linear(0.0);
        assert_eq!(
            m.max_payoff(&[1.0; 5]).unwrap(),
            MaxPayoff { value: 5.0, decision: 0 }
        );
        assert_eq!(
            m.max_payoff(&[-1.0; 5]).unwrap(),
            MaxPayoff { value: 0.0, decision: 1 }
        );
        // tie goes to the lowest index
        assert_eq!(
            m.max_payoff(&[0.0; 5]).unwrap(),
            MaxPayoff { value: 0.0, decision: 0 }
        );
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(DecisionModel::new(vec![], 1, |_, _| {}).is_err());
        assert!(DecisionModel::new(vec!["a".into(), "a".into()], 1, |_, _| {}).is_err());
        assert!(DecisionModel::new(vec!["a".into()], 0, |_, _| {}).is_err());
    }

    #[test]
    fn non_finite_payoff_names_decision() {
        let m = DecisionModel::new(vec!["ok".into(), "bad".into()], 1, |x, out| {
            out[0] = x[0];
            out[1] = 1.0 / x[0];
        })
        .unwrap();
        match m.payoff_vector(&[0.0]) {
            Err(Error::NonFinitePayoff { decision, x }) => {
                assert_eq!(decision, "bad");
                assert_eq!(x, vec![0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(m.payoff_vector(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn split_validation_and_assembly() {
        let s = Split::from_one_based(5, &[4, 2]).unwrap();
        assert_eq!(s.first(), &[1, 3]);
        assert_eq!(s.second(), &[0, 2, 4]);
        assert_eq!(s.one_based(), vec![2, 4]);
        let mut out = [0.0; 5];
        s.assemble(&[20.0, 40.0], &[10.0, 30.0, 50.0], &mut out);
        assert_eq!(out, [10.0, 20.0, 30.0, 40.0, 50.0]);

        assert!(Split::from_one_based(5, &[0]).is_err());
        assert!(Split::from_one_based(5, &[6]).is_err());
        assert!(Split::from_one_based(5, &[1, 1]).is_err());
        let empty = Split::new(3, []).unwrap();
        assert!(empty.first().is_empty());
        assert_eq!(empty.second(), &[0, 1, 2]);
        assert_eq!(Split::full(3).second().len(), 0);
    }

    proptest::proptest! {
        #[test]
        fn max_dominates_and_ties_pick_first(v in proptest::collection::vec(-3i32..3, 1..6)) {
            let vals: Vec<f64> = v.iter().map(|&a| a as f64).collect();
            let (m, i) = argmax_first(&vals);
            for &x in &vals {
                proptest::prop_assert!(m >= x);
            }
            proptest::prop_assert_eq!(vals[i], m);
            proptest::prop_assert!(vals[..i].iter().all(|&x| x < m));
        }
    }
}
