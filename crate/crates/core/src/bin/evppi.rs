//! Command-line front end: single estimates and replicated studies.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evppi_core::analytic::{analytic_evpi, analytic_evppi, make_toy_model, GaussianLinearModel, ToyConfig};
use evppi_core::harness::{
    default_budgets, replication_stream, run_estimator, run_plan, write_estimate_csv,
    write_report_csv, EstimatorKind, EstimatorSettings, ExperimentPlan,
};
use evppi_core::{Error, Split};

#[derive(Parser)]
#[command(name = "evppi", version, about = "EVPI/EVPPI estimation with nested and unbiased MLMC estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator once.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        budget: u64,
    },
    /// Replicated runs over a budget grid, with summaries and a fitted slope.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing [default: 256,1024,4096,16384,65536]
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u64>>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Worker threads; 0 uses all cores. Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Args)]
struct Common {
    /// evpi-nested, evpi-single, evpi-coupled, evppi-nested, evppi-single or evppi-coupled
    #[arg(long)]
    estimator: EstimatorKind,
    /// Toy-model JSON; defaults to s = 5 with unit weights, zero means, unit deviations.
    #[arg(long)]
    model: Option<PathBuf>,
    /// 1-based indices of the revealed coordinates (EVPPI only).
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long = "b", default_value_t = 2)]
    base: u32,
    /// Geometric level ratio [default: b^(-3/2)]
    #[arg(long = "r")]
    ratio: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Resolved {
    model: GaussianLinearModel,
    subset: Split,
    settings: EstimatorSettings,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, Error> {
        let (model, file_subset) = match &self.model {
            Some(path) => {
                let cfg = ToyConfig::from_path(path)?;
                (cfg.model()?, cfg.split()?)
            }
            None => (GaussianLinearModel::standard(5), None),
        };
        let s = model.dimension();
        let subset = match (&self.subset, file_subset) {
            (Some(u), _) => Split::from_one_based(s, u)?,
            (None, Some(u)) => u,
            (None, None) if self.estimator.is_evppi() => {
                return Err(Error::InvalidArgument(
                    "EVPPI estimators need --subset or a `subset` key in the model file".into(),
                ))
            }
            (None, None) => Split::full(s),
        };
        let ratio = self
            .ratio
            .unwrap_or_else(|| evppi_core::levels::default_ratio(self.base));
        Ok(Resolved {
            model,
            subset,
            settings: EstimatorSettings {
                base: self.base,
                ratio,
                gamma: self.gamma,
            },
        })
    }

    fn writer(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Estimate { common, budget } => {
            let r = common.resolve()?;
            evppi_core::levels::LevelDistribution::new(r.settings.base, r.settings.ratio)?;
            let toy = make_toy_model(&r.model, &r.subset)?;
            let truth = if common.estimator.is_evppi() {
                analytic_evppi(&r.model, &r.subset)
            } else {
                analytic_evpi(&r.model)
            };
            let rng = replication_stream(common.seed, budget, 0);
            let result = run_estimator(common.estimator, &toy, budget, &r.settings, &rng)?;
            let mut out = common.writer()?;
            write_estimate_csv(common.estimator, budget, truth, &result, &mut out)?;
            out.flush()?;
        }
        Command::Study {
            common,
            budgets,
            reps,
            workers,
        } => {
            let r = common.resolve()?;
            let plan = ExperimentPlan {
                estimator: common.estimator,
                budgets: budgets.unwrap_or_else(default_budgets),
                replications: reps,
                model: r.model,
                subset: r.subset,
                settings: r.settings,
                seed: common.seed,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let report = pool.install(|| run_plan(&plan))?;
            let mut out = common.writer()?;
            write_report_csv(&report, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::BudgetExhausted { .. } => 3,
                Error::NonFinitePayoff { .. } => 1,
                _ => 2,
            })
        }
    }
}
