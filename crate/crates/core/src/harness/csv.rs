//! Plot-ready CSV output.
//!
//! Layout: `#META,key,value` lines, the column header, one row per
//! replication (`NA` estimate for replications whose budget could not fit a
//! draw), then per budget a `#SUMMARY` line
//! (`budget,min,q1,median,q3,max,mean,rmse`) and a `#BOX` line
//! (`budget,whisker_low,whisker_high,n_outliers,outliers…`), and finally
//! `#SLOPE,<value>` (`NA` with fewer than two budgets). Floats use Rust's
//! shortest round-trip formatting.

use std::io::{self, Write};

use crate::estimators::EstimateResult;

use super::{ConvergenceReport, EstimatorKind};

pub const CSV_HEADER: &str = "estimator,budget,replication,estimate,truth,cost_used,n_draws";

fn row(
    out: &mut impl Write,
    kind: EstimatorKind,
    budget: u64,
    rep: usize,
    truth: f64,
    result: Option<&EstimateResult>,
) -> io::Result<()> {
    match result {
        Some(r) => writeln!(
            out,
            "{kind},{budget},{rep},{},{truth},{},{}",
            r.estimate, r.cost_used, r.n_draws
        ),
        None => writeln!(out, "{kind},{budget},{rep},NA,{truth},0,0"),
    }
}

pub fn write_report_csv(report: &ConvergenceReport, out: &mut impl Write) -> io::Result<()> {
    let plan = &report.plan;
    let kind = plan.estimator;
    writeln!(out, "#META,estimator,{kind}")?;
    if kind.is_evppi() {
        let u: Vec<String> = plan.subset.one_based().iter().map(|j| j.to_string()).collect();
        writeln!(out, "#META,subset,{}", u.join(";"))?;
    }
    writeln!(out, "#META,b,{}", plan.settings.base)?;
    writeln!(out, "#META,r,{}", plan.settings.ratio)?;
    writeln!(out, "#META,gamma,{}", plan.settings.gamma)?;
    writeln!(out, "#META,seed,{}", plan.seed)?;
    writeln!(out, "#META,replications,{}", plan.replications)?;
    writeln!(out, "#META,cost_accounting,{}", kind.cost_note())?;
    writeln!(out, "#META,quantiles,linear interpolation (type 7); whiskers at 1.5 IQR")?;
    writeln!(out, "{CSV_HEADER}")?;
    for rec in &report.records {
        row(out, kind, rec.budget, rec.replication, report.truth, rec.result.as_ref())?;
    }
    for b in &report.per_budget {
        let s = &b.summary;
        writeln!(
            out,
            "#SUMMARY,{},{},{},{},{},{},{},{}",
            b.budget, s.min, s.q1, s.median, s.q3, s.max, s.mean, s.rmse
        )?;
        write!(
            out,
            "#BOX,{},{},{},{}",
            b.budget,
            s.whisker_low,
            s.whisker_high,
            s.outliers.len()
        )?;
        for o in &s.outliers {
            write!(out, ",{o}")?;
        }
        writeln!(out)?;
    }
    match report.slope {
        Some(v) => writeln!(out, "#SLOPE,{v}"),
        None => writeln!(out, "#SLOPE,NA"),
    }
}

/// Single-run output: header, one row, and `#LEVEL,level,count,mean,second_moment`
/// diagnostics.
pub fn write_estimate_csv(
    kind: EstimatorKind,
    budget: u64,
    truth: f64,
    result: &EstimateResult,
    out: &mut impl Write,
) -> io::Result<()> {
    writeln!(out, "#META,cost_accounting,{}", kind.cost_note())?;
    writeln!(out, "{CSV_HEADER}")?;
    row(out, kind, budget, 0, truth, Some(result))?;
    writeln!(out, "#TERM_VARIANCE,{}", result.term_variance)?;
    for (l, s) in &result.per_level {
        writeln!(out, "#LEVEL,{l},{},{},{}", s.count, s.mean, s.second_moment)?;
    }
    Ok(())
}
