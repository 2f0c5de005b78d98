//! Gaussian linear toy model with a closed-form EVPPI.
//!
//! Two decisions: `d1` pays `w0 + Σ w_j x_j`, `d2` pays nothing. The prior is
//! an independent Gaussian per coordinate, so the conditional law of the
//! unrevealed coordinates does not depend on the revealed ones. With
//! `mu_all = w0 + Σ w_j mu_j` and `sigma_u² = Σ_{j∈u} (w_j sigma_j)²` the
//! EVPPI on `X_u` is
//!
//! ```text
//! [1 − Φ(−mu_all/sigma_u)]·mu_all + φ(−mu_all/sigma_u)·sigma_u − max(mu_all, 0)
//! ```
//!
//! and the EVPI is the case `u = {1, …, s}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionModel, FactoredSampler, PriorSampler, Split};
use crate::rng::RngStream;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile for `p` in `(0, 1)`.
///
/// Acklam's rational approximation followed by one Halley step against
/// [`std_normal_cdf`]. The upper half is mapped onto the lower half by
/// symmetry so the refinement never differences two numbers close to one.
pub fn std_normal_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -std_normal_inv(1.0 - p);
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let x = if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = std_normal_cdf(x) - p;
    let u = e / std_normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Parameters of the toy model: `s = w.len()` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLinearModel {
    pub w0: f64,
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianLinearModel {
    pub fn new(w0: f64, w: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let s = w.len();
        if s == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if mu.len() != s || sigma.len() != s {
            return Err(Error::Config(format!(
                "w, mu and sigma must all have length {s} (got {}, {}, {})",
                w.len(),
                mu.len(),
                sigma.len()
            )));
        }
        if !w0.is_finite() {
            return Err(Error::Config("w0 must be finite".into()));
        }
        if let Some(j) = w.iter().position(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::Config(format!("w[{}] must be finite and nonzero", j + 1)));
        }
        if let Some(j) = mu.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("mu[{}] must be finite", j + 1)));
        }
        if let Some(j) = sigma.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("sigma[{}] must be positive", j + 1)));
        }
        Ok(Self { w0, w, mu, sigma })
    }

    /// `s` coordinates with unit weights, zero means and unit deviations.
    pub fn standard(s: usize) -> Self {
        Self {
            w0: 0.0,
            w: vec![1.0; s],
            mu: vec![0.0; s],
            sigma: vec![1.0; s],
        }
    }

    pub fn dimension(&self) -> usize {
        self.w.len()
    }

    pub fn solution(&self, subset: &Split) -> AnalyticSolution {
        let mu_all = self.w0 + self.w.iter().zip(&self.mu).map(|(w, m)| w * m).sum::<f64>();
        let sigma_u = subset
            .first()
            .iter()
            .map(|&j| (self.w[j] * self.sigma[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        AnalyticSolution { mu_all, sigma_u }
    }
}

/// Raw model config as read from JSON. `subset` uses 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub s: usize,
    pub w0: f64,
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub subset: Option<Vec<usize>>,
}

impl ToyConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.model()?;
        if let Some(u) = &cfg.subset {
            Split::from_one_based(cfg.s, u).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<GaussianLinearModel> {
        if self.w.len() != self.s {
            return Err(Error::Config(format!(
                "s = {} but w has {} entries",
                self.s,
                self.w.len()
            )));
        }
        GaussianLinearModel::new(self.w0, self.w.clone(), self.mu.clone(), self.sigma.clone())
    }

    pub fn split(&self) -> Result<Option<Split>> {
        self.subset
            .as_ref()
            .map(|u| Split::from_one_based(self.s, u))
            .transpose()
    }
}

/// Location and spread of the revealed part of `d1`'s payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution {
    pub mu_all: f64,
    pub sigma_u: f64,
}

impl AnalyticSolution {
    pub fn evppi(&self) -> f64 {
        if self.sigma_u == 0.0 {
            return 0.0;
        }
        // Same closed form, regrouped so that the subtraction of max(mu_all, 0)
        // happens analytically: sigma·[φ(t) − |t|Φ(−|t|)], t = mu_all/sigma.
        let t = (self.mu_all / self.sigma_u).abs();
        (self.sigma_u * (std_normal_pdf(t) - t * std_normal_cdf(-t))).max(0.0)
    }
}

pub fn analytic_evppi(config: &GaussianLinearModel, subset: &Split) -> f64 {
    config.solution(subset).evppi()
}

pub fn analytic_evpi(config: &GaussianLinearModel) -> f64 {
    analytic_evppi(config, &Split::full(config.dimension()))
}

/// Independent Gaussian prior; coordinates drawn by inversion, in index order.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl PriorSampler for GaussianPrior {
    fn dimension(&self) -> usize {
        self.mu.len()
    }

    fn draw(&self, rng: &mut RngStream, x: &mut [f64]) {
        for ((xi, m), s) in x.iter_mut().zip(&self.mu).zip(&self.sigma) {
            *xi = m + s * std_normal_inv(rng.next_open01());
        }
    }
}

/// Factored view of [`GaussianPrior`]; the conditional ignores `x1`.
#[derive(Debug, Clone)]
pub struct GaussianFactored {
    split: Split,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl GaussianFactored {
    fn fill(&self, idx: &[usize], rng: &mut RngStream, out: &mut [f64]) {
        for (o, &j) in out.iter_mut().zip(idx) {
            *o = self.mu[j] + self.sigma[j] * std_normal_inv(rng.next_open01());
        }
    }
}

impl FactoredSampler for GaussianFactored {
    fn split(&self) -> &Split {
        &self.split
    }

    fn draw_marginal(&self, rng: &mut RngStream, x1: &mut [f64]) {
        self.fill(self.split.first(), rng, x1);
    }

    fn draw_conditional(&self, _x1: &[f64], rng: &mut RngStream, x2: &mut [f64]) {
        self.fill(self.split.second(), rng, x2);
    }
}

/// Everything the estimators need for one toy configuration.
#[derive(Debug)]
pub struct ToyModel {
    pub model: DecisionModel,
    pub prior: GaussianPrior,
    pub factored: GaussianFactored,
}

pub fn make_toy_model(config: &GaussianLinearModel, subset: &Split) -> Result<ToyModel> {
    if subset.dimension() != config.dimension() {
        return Err(crate::error::invalid(format!(
            "subset is over {} coordinates, model has {}",
            subset.dimension(),
            config.dimension()
        )));
    }
    let w0 = config.w0;
    let w = config.w.clone();
    let model = DecisionModel::new(vec!["d1".into(), "d2".into()], w.len(), move |x, out| {
        out[0] = w0 + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        out[1] = 0.0;
    })?;
    Ok(ToyModel {
        model,
        prior: GaussianPrior {
            mu: config.mu.clone(),
            sigma: config.sigma.clone(),
        },
        factored: GaussianFactored {
            split: subset.clone(),
            mu: config.mu.clone(),
            sigma: config.sigma.clone(),
        },
    })
}
