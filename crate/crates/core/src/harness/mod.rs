//! Replicated convergence studies on the Gaussian toy model.
//!
//! Every replication gets its own stream keyed by `(seed, budget,
//! replication)`, so results do not depend on execution order or worker
//! count. Replications run on the current rayon pool.

mod csv;
mod summary;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{analytic_evpi, analytic_evppi, make_toy_model, GaussianLinearModel, ToyModel};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    evpi_mlmc, evpi_nested, evppi_mlmc, evppi_nested, nested_allocation, EstimateResult,
    EvppiConfig, NestedSizes, Variant,
};
use crate::levels::LevelDistribution;
use crate::model::Split;
use crate::rng::RngStream;

pub use self::csv::{write_estimate_csv, write_report_csv, CSV_HEADER};
pub use self::summary::{fit_slope, quantile_sorted, summarize, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EstimatorKind {
    EvpiNested,
    EvpiSingle,
    EvpiCoupled,
    EvppiNested,
    EvppiSingle,
    EvppiCoupled,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::EvpiNested,
        EstimatorKind::EvpiSingle,
        EstimatorKind::EvpiCoupled,
        EstimatorKind::EvppiNested,
        EstimatorKind::EvppiSingle,
        EstimatorKind::EvppiCoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::EvpiNested => "evpi-nested",
            EstimatorKind::EvpiSingle => "evpi-single",
            EstimatorKind::EvpiCoupled => "evpi-coupled",
            EstimatorKind::EvppiNested => "evppi-nested",
            EstimatorKind::EvppiSingle => "evppi-single",
            EstimatorKind::EvppiCoupled => "evppi-coupled",
        }
    }

    pub fn is_evppi(self) -> bool {
        matches!(
            self,
            EstimatorKind::EvppiNested | EstimatorKind::EvppiSingle | EstimatorKind::EvppiCoupled
        )
    }

    pub fn is_nested(self) -> bool {
        matches!(self, EstimatorKind::EvpiNested | EstimatorKind::EvppiNested)
    }

    /// How `cost_used` is counted, for the CSV metadata.
    pub fn cost_note(self) -> &'static str {
        match self {
            EstimatorKind::EvpiNested => "L=N=C; cost_used=N+L",
            EstimatorKind::EvppiNested => {
                "L=C; M=floor(C^(1-w)); N=floor(C^w); w=2gamma/(1+2gamma); cost_used=N*M+L"
            }
            EstimatorKind::EvpiSingle | EstimatorKind::EvpiCoupled => {
                "budget rule on b^l per draw; cost_used<=C"
            }
            EstimatorKind::EvppiSingle | EstimatorKind::EvppiCoupled => {
                "shared level; budget rule on b^l (Y) + b^l (Z) per draw; cost_used<=C"
            }
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown estimator `{s}`")))
    }
}

/// Level-law and nested-allocation parameters shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorSettings {
    pub base: u32,
    pub ratio: f64,
    pub gamma: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            base: 2,
            ratio: 2f64.powf(-1.5),
            gamma: 1.0,
        }
    }
}

/// Runs one estimator at one budget on a toy model.
pub fn run_estimator(
    kind: EstimatorKind,
    toy: &ToyModel,
    budget: u64,
    settings: &EstimatorSettings,
    rng: &RngStream,
) -> Result<EstimateResult> {
    let law = LevelDistribution::new(settings.base, settings.ratio)?;
    let pooled = usize::try_from(budget).map_err(|_| invalid("budget too large"))?;
    match kind {
        EstimatorKind::EvpiNested => evpi_nested(&toy.model, &toy.prior, pooled, pooled, rng),
        EstimatorKind::EvppiNested => {
            let (inner, outer) = nested_allocation(budget, settings.gamma)?;
            let sizes = NestedSizes {
                pooled,
                inner,
                outer,
            };
            evppi_nested(&toy.model, &toy.factored, &toy.prior, sizes, rng)
        }
        EstimatorKind::EvpiSingle => {
            evpi_mlmc(&toy.model, &toy.prior, &law, budget, Variant::Single, rng)
        }
        EstimatorKind::EvpiCoupled => {
            evpi_mlmc(&toy.model, &toy.prior, &law, budget, Variant::Coupled, rng)
        }
        EstimatorKind::EvppiSingle | EstimatorKind::EvppiCoupled => {
            let v = if kind == EstimatorKind::EvppiSingle {
                Variant::Single
            } else {
                Variant::Coupled
            };
            let config = EvppiConfig {
                y: v,
                z: v,
                shared_level: true,
            };
            evppi_mlmc(&toy.model, &toy.factored, &toy.prior, &law, budget, config, rng)
        }
    }
}

/// Stream for one replication; independent of execution order.
pub fn replication_stream(seed: u64, budget: u64, replication: usize) -> RngStream {
    RngStream::new(seed, budget).derive(replication as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub estimator: EstimatorKind,
    pub budgets: Vec<u64>,
    pub replications: usize,
    pub model: GaussianLinearModel,
    /// Revealed coordinates; ignored by the EVPI estimators.
    pub subset: Split,
    pub settings: EstimatorSettings,
    pub seed: u64,
}

/// Budgets `2^8, 2^10, …, 2^16`.
pub fn default_budgets() -> Vec<u64> {
    (8..=16).step_by(2).map(|m| 1u64 << m).collect()
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() {
            return Err(invalid("no budgets given"));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("budgets must be strictly increasing"));
        }
        if self.replications < 1 {
            return Err(invalid("need at least one replication"));
        }
        if self.subset.dimension() != self.model.dimension() {
            return Err(invalid("subset dimension does not match the model"));
        }
        LevelDistribution::new(self.settings.base, self.settings.ratio)?;
        if self.estimator == EstimatorKind::EvppiNested && (self.settings.gamma.is_nan() || self.settings.gamma <= 0.5) {
            return Err(invalid("gamma must exceed 1/2"));
        }
        Ok(())
    }

    /// Analytic EVPI or EVPPI that the estimator targets.
    pub fn truth(&self) -> f64 {
        if self.estimator.is_evppi() {
            analytic_evppi(&self.model, &self.subset)
        } else {
            analytic_evpi(&self.model)
        }
    }
}

/// One replication; `result` is `None` when the budget rule could not fit a
/// single draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub budget: u64,
    pub replication: usize,
    pub result: Option<EstimateResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSummary {
    pub budget: u64,
    pub missing: usize,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub plan: ExperimentPlan,
    pub truth: f64,
    pub records: Vec<ReplicationRecord>,
    pub per_budget: Vec<BudgetSummary>,
    /// `None` with fewer than two usable budgets.
    pub slope: Option<f64>,
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let truth = plan.truth();
    let toy = make_toy_model(&plan.model, &plan.subset)?;
    let mut records = Vec::new();
    let mut per_budget = Vec::new();
    for &budget in &plan.budgets {
        let outcomes: Vec<Result<EstimateResult>> = (0..plan.replications)
            .into_par_iter()
            .map(|rep| {
                let rng = replication_stream(plan.seed, budget, rep);
                run_estimator(plan.estimator, &toy, budget, &plan.settings, &rng)
            })
            .collect();
        let mut estimates = Vec::with_capacity(outcomes.len());
        let mut exhausted = None;
        for (rep, outcome) in outcomes.into_iter().enumerate() {
            let result = match outcome {
                Ok(r) => {
                    estimates.push(r.estimate);
                    Some(r)
                }
                Err(e @ Error::BudgetExhausted { .. }) => {
                    log::debug!("budget {budget} replication {rep}: {e}");
                    exhausted.get_or_insert(e);
                    None
                }
                Err(e) => return Err(e),
            };
            records.push(ReplicationRecord {
                budget,
                replication: rep,
                result,
            });
        }
        if estimates.is_empty() {
            return Err(exhausted.unwrap_or_else(|| invalid("no replications")));
        }
        per_budget.push(BudgetSummary {
            budget,
            missing: plan.replications - estimates.len(),
            summary: summarize(&estimates, truth)?,
        });
    }
    let points: Vec<(f64, f64)> = per_budget
        .iter()
        .map(|b| (b.budget as f64, b.summary.rmse))
        .collect();
    let slope = if points.len() >= 2 {
        fit_slope(&points).ok()
    } else {
        None
    };
    Ok(ConvergenceReport {
        plan: plan.clone(),
        truth,
        records,
        per_budget,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(kind: EstimatorKind, budgets: Vec<u64>, reps: usize) -> ExperimentPlan {
        ExperimentPlan {
            estimator: kind,
            budgets,
            replications: reps,
            model: GaussianLinearModel::standard(5),
            subset: Split::from_one_based(5, &[1, 2]).unwrap(),
            settings: EstimatorSettings::default(),
            seed: 7,
        }
    }

    #[test]
    fn names_roundtrip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("evpi".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn single_replication_single_budget() {
        let report = run_plan(&plan(EstimatorKind::EvpiCoupled, vec![1024], 1)).unwrap();
        let est = report.records[0].result.as_ref().unwrap().estimate;
        let s = &report.per_budget[0].summary;
        assert_eq!([s.min, s.q1, s.median, s.q3, s.max], [est; 5]);
        assert!(report.slope.is_none());
    }

    #[test]
    fn plan_validation() {
        assert!(plan(EstimatorKind::EvpiNested, vec![256, 256], 1).validate().is_err());
        assert!(plan(EstimatorKind::EvpiNested, vec![], 1).validate().is_err());
        assert!(plan(EstimatorKind::EvpiNested, vec![256], 0).validate().is_err());
        let mut p = plan(EstimatorKind::EvppiNested, vec![256], 1);
        p.settings.gamma = 0.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn replication_order_does_not_matter() {
        let p = plan(EstimatorKind::EvppiSingle, vec![256], 8);
        let report = run_plan(&p).unwrap();
        let toy = make_toy_model(&p.model, &p.subset).unwrap();
        for rep in (0..8).rev() {
            let rng = replication_stream(p.seed, 256, rep);
            let direct = run_estimator(p.estimator, &toy, 256, &p.settings, &rng);
            assert_eq!(direct.ok(), report.records[rep].result);
        }
    }

    #[test]
    fn exhausted_budget_is_reported() {
        // at C = b only level-1 draws fit, so some seeds fail their only replication
        let mut seen_fail = false;
        let mut seen_ok = false;
        for seed in 0..64 {
            let mut p = plan(EstimatorKind::EvpiCoupled, vec![2], 1);
            p.seed = seed;
            match run_plan(&p) {
                Err(Error::BudgetExhausted { budget: 2, .. }) => seen_fail = true,
                Ok(r) => {
                    assert_eq!(r.records[0].result.as_ref().unwrap().cost_used, 2);
                    seen_ok = true;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(seen_fail && seen_ok);
        let q = plan(EstimatorKind::EvppiCoupled, vec![3], 3);
        assert!(matches!(run_plan(&q), Err(Error::InvalidArgument(_))));
    }
}
