use serde::Serialize;

use crate::error::{invalid, Result};

/// Boxplot and accuracy statistics for one budget.
///
/// Quantiles use linear interpolation between order statistics (the "type 7"
/// rule: position `p·(n − 1)` in the sorted sample). Whiskers extend to the
/// most extreme observations within 1.5 IQR of the quartiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Root mean squared deviation from the reference value.
    pub rmse: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(estimates: &[f64], truth: f64) -> Result<Summary> {
    if estimates.is_empty() {
        return Err(invalid("cannot summarize an empty list"));
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = || sorted.iter().copied().filter(|&v| v >= fence_lo && v <= fence_hi);
    Ok(Summary {
        count: sorted.len(),
        min: sorted[0],
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: sorted[sorted.len() - 1],
        mean: estimates.iter().sum::<f64>() / n,
        rmse: (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n).sqrt(),
        whisker_low: inside().next().unwrap_or(q1),
        whisker_high: inside().next_back().unwrap_or(q3),
        outliers: sorted
            .iter()
            .copied()
            .filter(|&v| v < fence_lo || v > fence_hi)
            .collect(),
    })
}

/// Exponent `ρ` of `RMSE ≈ c·C^(−ρ)`, by least squares on `(ln C, ln RMSE)`.
/// Points with non-positive or non-finite RMSE are skipped with a warning.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(c, e)| {
            let ok = c > 0.0 && e > 0.0 && e.is_finite();
            if !ok {
                log::warn!("fit_slope: skipping point (budget {c}, rmse {e})");
            }
            ok
        })
        .map(|&(c, e)| (c.ln(), e.ln()))
        .collect();
    if usable.len() < 2 {
        return Err(invalid(format!(
            "slope fit needs at least 2 usable points, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs at least two distinct budgets"));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(-sxy / sxx)
}
