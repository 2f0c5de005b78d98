//! EVPI and EVPPI estimators: nested Monte Carlo and the unbiased
//! single-term and coupled-sum multilevel forms.

mod mlmc;
mod nested;
mod stats;
mod terms;

pub use mlmc::{default_pilot_profile, evpi_mlmc, evppi_mlmc, pilot_profile, EvppiConfig};
pub use nested::{evpi_nested, evppi_nested, nested_allocation, q_stat, NestedSizes};
pub use stats::{EstimateResult, LevelStats, RunningMoments};
pub use terms::{
    corrections_from_payoffs, weighted_value, y_correction, y_coupled, y_single, y_term,
    y_term_on_samples, z_coupled, z_single, z_term, LevelTerm, Variant,
};
