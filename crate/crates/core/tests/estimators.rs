use std::sync::atomic::{AtomicUsize, Ordering};

use evppi_core::analytic::{analytic_evpi, analytic_evppi, make_toy_model, GaussianLinearModel, ToyModel};
use evppi_core::estimators::{
    corrections_from_payoffs, evpi_mlmc, evpi_nested, evppi_mlmc, evppi_nested, nested_allocation,
    q_stat, y_coupled, y_single, y_term, y_term_on_samples, z_coupled, z_single, z_term,
    NestedSizes,
};
use evppi_core::harness::replication_stream;
use evppi_core::{
    DecisionModel, EvppiConfig, FactoredSampler, LevelDistribution, LevelLaw, PriorSampler,
    RngStream, Split, Variant,
};

fn toy(subset: &[usize]) -> ToyModel {
    let cfg = GaussianLinearModel::standard(5);
    make_toy_model(&cfg, &Split::from_one_based(5, subset).unwrap()).unwrap()
}

fn law() -> LevelDistribution {
    LevelDistribution::new(2, 2f64.powf(-1.5)).unwrap()
}

fn single_decision() -> DecisionModel {
    DecisionModel::new(vec!["a".into()], 5, |x, out| {
        out[0] = x.iter().map(|v| v.exp()).sum::<f64>() - 3.7
    })
    .unwrap()
}

fn constant_payoffs() -> DecisionModel {
    DecisionModel::new(vec!["a".into(), "b".into(), "c".into()], 5, |_, out| {
        out.copy_from_slice(&[0.3, -1.1, 0.3]);
    })
    .unwrap()
}

#[test]
fn degenerate_models_give_exact_zeros() {
    let t = toy(&[1, 3]);
    let d = law();
    for model in [single_decision(), constant_payoffs()] {
        for seed in 0..100u64 {
            let base = RngStream::new(seed, 7);
            for l in 1..=6 {
                for v in [Variant::Single, Variant::Coupled] {
                    let y = y_term(&model, &t.prior, l, &d, v, &mut base.derive(l.into())).unwrap();
                    assert_eq!(y.value, 0.0);
                    let z = z_term(&model, &t.factored, &[0.4, -2.0], l, &d, v, &mut base.derive(l.into()))
                        .unwrap();
                    assert_eq!(z.value, 0.0);
                }
            }
            let e = evpi_mlmc(&model, &t.prior, &d, 512, Variant::Single, &base).unwrap();
            assert_eq!(e.estimate, 0.0);
            let p = evppi_mlmc(&model, &t.factored, &t.prior, &d, 512, EvppiConfig::default(), &base)
                .unwrap();
            assert_eq!(p.estimate, 0.0);
        }
    }
}

#[test]
fn y_terms_are_never_negative() {
    let t = toy(&[]);
    let d = law();
    for seed in 0..10_000u64 {
        let mut rng = RngStream::new(seed, 1);
        let l = d.sample(&mut rng);
        let s = y_single(&t.model, &t.prior, l.min(8), &d, &mut rng.clone()).unwrap();
        let c = y_coupled(&t.model, &t.prior, l.min(8), &d, &mut rng).unwrap();
        assert!(s.value >= 0.0 && c.value >= 0.0, "seed {seed}");
    }
}

#[test]
fn level_one_single_and_coupled_agree() {
    let t = toy(&[2, 5]);
    let d = law();
    let p = d.pmf(1).unwrap();
    for seed in 0..1000u64 {
        let rng = RngStream::new(seed, 3);
        let s = y_single(&t.model, &t.prior, 1, &d, &mut rng.clone()).unwrap();
        let c = y_coupled(&t.model, &t.prior, 1, &d, &mut rng.clone()).unwrap();
        assert_eq!(s.value, c.value / p);
        assert!((s.value * p - c.value).abs() <= f64::EPSILON * c.value.abs());
        let x1 = [0.3, -0.8];
        let zs = z_single(&t.model, &t.factored, &x1, 1, &d, &mut rng.clone()).unwrap();
        let zc = z_coupled(&t.model, &t.factored, &x1, 1, &d, &mut rng.clone()).unwrap();
        assert_eq!(zs.value, zc.value / p);
    }
}

// block-average Q over consecutive blocks of size n
fn mean_q(model: &DecisionModel, samples: &[Vec<f64>], n: usize) -> f64 {
    let blocks: Vec<f64> = samples.chunks(n).map(|b| q_stat(model, b).unwrap()).collect();
    blocks.iter().sum::<f64>() / blocks.len() as f64
}

#[test]
fn level_terms_match_block_q_oracle() {
    let t = toy(&[]);
    let d = law();
    let r = d.ratio();
    for seed in 0..200u64 {
        let mut rng = RngStream::new(seed, 11);
        for l in 1..=4u32 {
            let n = 1usize << l;
            let samples: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut x = vec![0.0; 5];
                    t.prior.draw(&mut rng, &mut x);
                    x
                })
                .collect();
            let deltas: Vec<f64> = (1..=l as usize)
                .map(|j| mean_q(&t.model, &samples, 1 << (j - 1)) - mean_q(&t.model, &samples, 1 << j))
                .collect();
            let coupled: f64 = deltas.iter().enumerate().map(|(j, v)| v / r.powi(j as i32)).sum();
            let single = deltas[l as usize - 1] / ((1.0 - r) * r.powi(l as i32 - 1));
            let yc = y_term_on_samples(&t.model, &samples, l, &d, Variant::Coupled).unwrap();
            let ys = y_term_on_samples(&t.model, &samples, l, &d, Variant::Single).unwrap();
            let tol = 1e-12 * (1.0 + coupled.abs() + single.abs());
            assert!((yc.value - coupled).abs() < tol, "coupled l={l}: {} vs {coupled}", yc.value);
            assert!((ys.value - single).abs() < tol, "single l={l}: {} vs {single}", ys.value);
        }
    }
}

#[test]
fn three_way_blocks() {
    // b = 3, one explicit level-2 correction
    let m = DecisionModel::new(vec!["x".into(), "zero".into()], 1, |x, out| {
        out[0] = x[0];
        out[1] = 0.0;
    })
    .unwrap();
    let xs = [1.0, -2.0, 4.0, -1.0, -1.0, 0.5, 3.0, -6.0, 2.0];
    let payoffs: Vec<f64> = xs.iter().flat_map(|&v| [v, 0.0]).collect();
    let c = corrections_from_payoffs(&payoffs, 2, 3, 2).unwrap();
    let samples: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
    let q1 = mean_q(&m, &samples, 1);
    let q3 = mean_q(&m, &samples, 3);
    let q9 = mean_q(&m, &samples, 9);
    assert!((c[0] - (q1 - q3)).abs() < 1e-14);
    assert!((c[1] - (q3 - q9)).abs() < 1e-14);
}

struct Counting<'a, P> {
    inner: &'a P,
    calls: AtomicUsize,
}

impl<P: PriorSampler> PriorSampler for Counting<'_, P> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn draw(&self, rng: &mut RngStream, x: &mut [f64]) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.draw(rng, x);
    }
}

#[test]
fn sample_consumption_matches_cost() {
    let t = toy(&[]);
    let d = law();
    let counting = Counting {
        inner: &t.prior,
        calls: AtomicUsize::new(0),
    };
    for l in 1..=7 {
        counting.calls.store(0, Ordering::Relaxed);
        let y = y_coupled(&t.model, &counting, l, &d, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(counting.calls.load(Ordering::Relaxed) as u64, y.cost);
        assert_eq!(y.cost, 1u64 << l);
    }
    counting.calls.store(0, Ordering::Relaxed);
    let e = evpi_mlmc(&t.model, &counting, &d, 5000, Variant::Single, &RngStream::new(1, 1)).unwrap();
    assert_eq!(counting.calls.load(Ordering::Relaxed) as u64, e.cost_used);
    assert!(e.cost_used <= 5000);
    let total: u64 = e.per_level.iter().map(|(l, s)| s.count << l).sum();
    assert_eq!(total, e.cost_used);
}

#[test]
fn factored_draws_reproduce_prior_moments() {
    let cfg = GaussianLinearModel::new(
        0.5,
        vec![1.0, 2.0, -1.0],
        vec![1.0, -2.0, 0.0],
        vec![0.5, 1.5, 3.0],
    )
    .unwrap();
    let split = Split::from_one_based(3, &[3, 1]).unwrap();
    let t = make_toy_model(&cfg, &split).unwrap();
    let mut rng = RngStream::new(4, 4);
    let n = 100_000;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let (mut x1, mut x2, mut x) = (vec![0.0; 2], vec![0.0; 1], vec![0.0; 3]);
    for _ in 0..n {
        t.factored.draw_marginal(&mut rng, &mut x1);
        t.factored.draw_conditional(&x1, &mut rng, &mut x2);
        t.factored.split().assemble(&x1, &x2, &mut x);
        for j in 0..3 {
            sum[j] += x[j];
            sq[j] += x[j] * x[j];
        }
    }
    for j in 0..3 {
        let mean = sum[j] / n as f64;
        let var = sq[j] / n as f64 - mean * mean;
        let s = cfg.sigma[j];
        assert!((mean - cfg.mu[j]).abs() < 4.0 * s / (n as f64).sqrt(), "coord {j} mean {mean}");
        assert!((var / (s * s) - 1.0).abs() < 0.02, "coord {j} var {var}");
    }
}

fn replicated(reps: usize, run: impl Fn(&RngStream) -> f64 + Sync) -> (f64, f64) {
    use rayon::prelude::*;
    let v: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| run(&replication_stream(0, 1 << 16, i)))
        .collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn nested_estimators_near_truth_at_large_budget() {
    let c = 1usize << 16;
    let t = toy(&[]);
    let (mean, _) = replicated(100, |rng| {
        let e = evpi_nested(&t.model, &t.prior, c, c, rng).unwrap();
        assert_eq!(e.cost_used, 2 * c as u64);
        e.estimate
    });
    assert!((mean - 0.892).abs() < 0.01, "{mean}");

    let t = toy(&[1, 2]);
    let (inner, outer) = nested_allocation(c as u64, 1.0).unwrap();
    let sizes = NestedSizes {
        pooled: c,
        inner,
        outer,
    };
    let (mean, _) = replicated(100, |rng| {
        let e = evppi_nested(&t.model, &t.factored, &t.prior, sizes, rng).unwrap();
        assert_eq!(e.cost_used, (inner * outer + c) as u64);
        e.estimate
    });
    assert!((mean - 0.564).abs() < 0.02, "{mean}");
}

#[test]
fn coupled_estimators_unbiased_at_large_budget() {
    let cfg = GaussianLinearModel::standard(5);
    let d = law();
    let t = toy(&[]);
    let (mean, se) = replicated(100, |rng| {
        evpi_mlmc(&t.model, &t.prior, &d, 1 << 16, Variant::Coupled, rng)
            .unwrap()
            .estimate
    });
    let truth = analytic_evpi(&cfg);
    assert!((mean - truth).abs() < 3.0 * se, "{mean} ± {se}");

    let t = toy(&[1, 2]);
    let (mean, se) = replicated(100, |rng| {
        evppi_mlmc(&t.model, &t.factored, &t.prior, &d, 1 << 16, EvppiConfig::default(), rng)
            .unwrap()
            .estimate
    });
    let truth = analytic_evppi(&cfg, &Split::from_one_based(5, &[1, 2]).unwrap());
    assert!((mean - truth).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn revealing_everything_reduces_to_evpi() {
    let cfg = GaussianLinearModel::standard(5);
    assert_eq!(analytic_evppi(&cfg, &Split::full(5)), analytic_evpi(&cfg));
    let t = toy(&[1, 2, 3, 4, 5]);
    let d = law();
    for seed in 0..20u64 {
        let rng = RngStream::new(seed, 9);
        let evppi = evppi_mlmc(&t.model, &t.factored, &t.prior, &d, 8192, EvppiConfig::default(), &rng)
            .unwrap();
        let evpi = evpi_mlmc(&t.model, &t.prior, &d, 4096, Variant::Coupled, &rng).unwrap();
        assert_eq!(evppi.estimate, evpi.estimate);
        assert_eq!(evppi.n_draws, evpi.n_draws);
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let t = toy(&[1, 2]);
    let d = law();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let rng = RngStream::new(42, 0);
                let config = EvppiConfig {
                    y: Variant::Single,
                    z: Variant::Coupled,
                    shared_level: false,
                };
                let a = evppi_mlmc(&t.model, &t.factored, &t.prior, &d, 1 << 14, config, &rng).unwrap();
                let b = evpi_mlmc(&t.model, &t.prior, &d, 1 << 14, Variant::Coupled, &rng).unwrap();
                (a, b)
            })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn independent_levels_cost_both_terms() {
    let t = toy(&[4]);
    let d = law();
    let config = EvppiConfig {
        y: Variant::Coupled,
        z: Variant::Single,
        shared_level: false,
    };
    let e = evppi_mlmc(&t.model, &t.factored, &t.prior, &d, 3000, config, &RngStream::new(8, 8)).unwrap();
    assert!(e.cost_used <= 3000 && e.cost_used >= 4 * e.n_draws as u64);
    assert!(evppi_mlmc(&t.model, &t.factored, &t.prior, &d, 3, config, &RngStream::new(8, 8)).is_err());
}

#[test]
fn non_finite_payoff_names_the_decision() {
    let t = toy(&[]);
    let bad = DecisionModel::new(vec!["ok".into(), "broken".into()], 5, |x, out| {
        out[0] = 0.0;
        out[1] = if x[0] > 1.5 { f64::NAN } else { x[0] };
    })
    .unwrap();
    let err = evpi_mlmc(&bad, &t.prior, &law(), 1 << 14, Variant::Single, &RngStream::new(0, 0))
        .unwrap_err()
        .to_string();
    assert!(err.contains("broken"), "{err}");
}
