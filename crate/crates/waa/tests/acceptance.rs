//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Everything is seeded and deterministic; tolerances are
//! pinned in code.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use waa::config::{
    EnvironmentSpec, LossKind, Mode, OutputConfig, PoolConfig, PriorRule, RandomizedConfig,
    RemovalConfig, RunConfig, Spaces,
};
use waa::domain::{CompactBall, History, Point};
use waa::engine::{mean_comparison_check, ExpertPool, WaaState};
use waa::environment::build_environment;
use waa::experts::{enumerate_first, Family, FamilyConfig, Predictor, SpaceDims};
use waa::loss::{LossFunction, LossOn};
use waa::randomized::DiscreteMeasure;
use waa::removal::{build_clipping, clip_measure, clip_point, MetaPredictor, RemovalState};
use waa::runner::{run, verify_suite, RunSummary};
use waa::trace::render_trace;
use waa::CHECK_TOL;

fn pt(cs: &[f64]) -> Point {
    Point::new(cs.to_vec()).unwrap()
}

fn default_families() -> Vec<FamilyConfig> {
    vec![
        FamilyConfig {
            family: Family::Constant,
            coeff_range: (-1.0, 1.0),
            max_level: None,
            memory_range: (0, 0),
            centroid_count: 2,
        },
        FamilyConfig {
            family: Family::Linear,
            coeff_range: (-1.0, 1.0),
            max_level: None,
            memory_range: (0, 1),
            centroid_count: 2,
        },
    ]
}

fn matrix_environments(seed: u64) -> Vec<(&'static str, EnvironmentSpec)> {
    vec![
        (
            "iid",
            EnvironmentSpec::IidGaussian {
                mean: vec![0.5],
                sd: 0.25,
                seed,
            },
        ),
        (
            "ar1",
            EnvironmentSpec::Ar1 {
                a: 0.5,
                c: 0.0,
                sd: 0.3,
                seed,
            },
        ),
        (
            "drifting",
            EnvironmentSpec::DriftingSine {
                amplitude: 0.8,
                period: 500.0,
                sd: 0.1,
                seed,
            },
        ),
        (
            "adversarial",
            EnvironmentSpec::AdversarialWorstcase {
                center: vec![0.5],
                radius: 0.5,
                seed,
            },
        ),
    ]
}

struct MatrixOutcome {
    results: Vec<(String, RunSummary)>,
    elapsed_secs: f64,
}

/// The shared criterion-1 matrix: {2 losses} x {4 environments} x
/// {pool sizes 2, 8, 32} x {5 seeds}, horizon 10^4, deterministic mode.
fn matrix() -> &'static MatrixOutcome {
    static MATRIX: OnceLock<MatrixOutcome> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let start = Instant::now();
        let mut results = Vec::new();
        for loss in [LossKind::SquaredNorm, LossKind::AbsoluteNorm] {
            for seed in 1..=5u64 {
                for (env_name, environment) in matrix_environments(seed) {
                    for k_max in [2usize, 8, 32] {
                        let config = RunConfig {
                            spaces: Spaces { d_x: 1, d_y: 1 },
                            loss,
                            mode: Mode::Deterministic,
                            pool: PoolConfig {
                                k_max,
                                priors: PriorRule::Dyadic,
                                families: default_families(),
                            },
                            environment: environment.clone(),
                            horizon: 10_000,
                            rng_seed: seed,
                            removal: None,
                            randomized: None,
                            output: OutputConfig::default(),
                            mutation_beta: None,
                        };
                        let ctx = format!(
                            "{:?}/{env_name}/k{}/seed{}",
                            loss, k_max, seed
                        );
                        let out = run(&config).expect("matrix run");
                        results.push((ctx, out.summary));
                    }
                }
            }
        }
        MatrixOutcome {
            results,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_1_regret_bound_on_matrix() {
    let m = matrix();
    for (ctx, s) in &m.results {
        assert!(
            !s.failed_checks.iter().any(|f| f == "lemma5"),
            "criterion 1 FAIL at {ctx}: regret bound violated"
        );
        assert!(
            s.lemma5_min_margin >= -CHECK_TOL,
            "criterion 1 FAIL at {ctx}: margin {}",
            s.lemma5_min_margin
        );
    }
    assert!(
        m.elapsed_secs < 60.0,
        "criterion 1 FAIL: matrix took {:.1}s, budget is 60s",
        m.elapsed_secs
    );
    println!(
        "acceptance 1 (regret bound over {} matrix runs, {:.1}s): PASS",
        m.results.len(),
        m.elapsed_secs
    );
}

#[test]
fn criterion_2_weight_update_inequality_on_matrix() {
    let m = matrix();
    for (ctx, s) in &m.results {
        assert!(
            !s.failed_checks.iter().any(|f| f == "lemma9"),
            "criterion 2 FAIL at {ctx}"
        );
        assert!(
            s.max_lemma9_violation <= CHECK_TOL,
            "criterion 2 FAIL at {ctx}: violation {}",
            s.max_lemma9_violation
        );
    }
    println!(
        "acceptance 2 (per-round weight-update inequality, {} runs): PASS",
        m.results.len()
    );
}

#[test]
fn criterion_3_mean_comparison_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for i in 0..10_000 {
        let k = rng.gen_range(1..=64);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let l: Vec<f64> = (0..k).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let n = rng.gen_range(1..=1_000_000);
        let mc = mean_comparison_check(&q, &l, n).unwrap();
        assert!(
            mc.holds,
            "criterion 3 FAIL at triple {i}: lhs {} rhs {} n {n}",
            mc.lhs, mc.rhs
        );
    }
    println!("acceptance 3 (generalized-mean comparison, 10000 triples): PASS");
}

#[test]
fn criterion_4_countable_convexity_on_matrix() {
    let m = matrix();
    for (ctx, s) in &m.results {
        assert!(
            !s.failed_checks.iter().any(|f| f == "countable_convexity"),
            "criterion 4 FAIL at {ctx}"
        );
    }
    println!(
        "acceptance 4 (countable convexity, {} runs): PASS",
        m.results.len()
    );
}

#[test]
fn criterion_5_universality_trend_on_ar1() {
    // pool deep enough to contain the matched strategy: prediction
    // 0.5 * x_n where the ar1 signal is the previous observation
    let dims = SpaceDims {
        d_x: 1,
        d_y: 1,
        d_gamma: 1,
    };
    let enum_config = waa::experts::EnumConfig {
        dims,
        families: default_families(),
    };
    let k_max = 24;
    let strategies = enumerate_first(&enum_config, k_max).unwrap();
    assert!(
        strategies.iter().any(|s| s.family == Family::Linear
            && s.memory_depth == 0
            && s.params == vec![0.0, 0.5]),
        "the matched expert must be enumerated"
    );
    let experts: Vec<std::sync::Arc<dyn Predictor<Point>>> = strategies
        .into_iter()
        .map(|s| std::sync::Arc::new(s) as std::sync::Arc<dyn Predictor<Point>>)
        .collect();
    // uniform priors and noise scale 1.5 let the weights concentrate on the
    // matched expert well before the first checkpoint, so the checkpoints
    // ride the O(1/sqrt(N)) learning curve instead of the early blend
    let pool = ExpertPool::with_uniform_priors(experts).unwrap();
    let loss = LossFunction::SquaredNorm;
    let mut engine = WaaState::new(pool, loss.clone());
    let mut env = build_environment(
        &EnvironmentSpec::Ar1 {
            a: 0.5,
            c: 0.0,
            sd: 1.5,
            seed: 12,
        },
        1,
        1,
    )
    .unwrap();

    let mut loss_bound = 0.0f64;
    let mut checkpoints = Vec::new();
    for n in 1..=10_000usize {
        let x = env.next_signal();
        let (pred, _) = engine.begin_round(x).unwrap();
        let y = env
            .next_observation(&|c| loss.loss_of(&pred, c))
            .unwrap();
        let report = engine.end_round(y).unwrap();
        for l in &report.expert_losses {
            loss_bound = loss_bound.max(l.abs());
        }
        if n == 100 || n == 1000 || n == 10_000 {
            let best = engine.best_expert();
            let best_loss = engine.cumulative_losses()[best];
            let avg_regret = (engine.own_cumulative_loss() - best_loss) / n as f64;
            let q_best = engine.pool().priors()[best];
            let bound = (loss_bound * loss_bound * loss_bound.exp() + (1.0 / q_best).ln())
                / (n as f64).sqrt();
            checkpoints.push((n, avg_regret, bound));
        }
    }
    for (n, avg, bound) in &checkpoints {
        assert!(
            avg <= bound,
            "criterion 5 FAIL at N={n}: avg regret {avg} above {bound}"
        );
    }
    assert!(
        checkpoints[0].1 > checkpoints[1].1 && checkpoints[1].1 > checkpoints[2].1,
        "criterion 5 FAIL: regret not decreasing: {checkpoints:?}"
    );
    println!(
        "acceptance 5 (universality trend, avg regret {:.4} -> {:.4} -> {:.4}): PASS",
        checkpoints[0].1, checkpoints[1].1, checkpoints[2].1
    );
}

#[test]
fn criterion_6_clipping_dominance() {
    let dims = SpaceDims {
        d_x: 1,
        d_y: 1,
        d_gamma: 1,
    };
    let enum_config = waa::experts::EnumConfig {
        dims,
        families: default_families(),
    };
    let strategies = enumerate_first(&enum_config, 50).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for loss in [LossFunction::SquaredNorm, LossFunction::AbsoluteNorm] {
        let b = CompactBall::euclidean(pt(&[0.25]), 1.0).unwrap();
        let spec = build_clipping(&loss, &b, &pt(&[0.0])).unwrap();
        for i in 0..1000 {
            // random (strategy, history, observation in B) triple
            let s = &strategies[rng.gen_range(0..strategies.len())];
            let mut h = History::start(pt(&[rng.gen_range(-30.0..30.0)]));
            for _ in 0..rng.gen_range(0..4) {
                h = h
                    .extended(
                        pt(&[rng.gen_range(-30.0..30.0)]),
                        pt(&[rng.gen_range(-30.0..30.0)]),
                    )
                    .unwrap();
            }
            let y = pt(&[0.25 + rng.gen_range(-1.0..1.0)]);
            let g = s.predict(&h);
            let clipped = clip_point(&spec, &g);
            let lhs = loss.eval(&clipped, &y).unwrap();
            let rhs = loss.eval(&g, &y).unwrap();
            assert!(
                lhs <= rhs + 1e-9,
                "criterion 6 FAIL ({} triple {i}): {lhs} > {rhs}",
                loss.kind_name()
            );
            // randomized analogue
            let mu = DiscreteMeasure::new(vec![
                (g.clone(), 0.5),
                (pt(&[rng.gen_range(-30.0..30.0)]), 0.5),
            ])
            .unwrap();
            let cm = clip_measure(&spec, &mu);
            let lhs = waa::randomized::expected_loss(&loss, &cm, &y).unwrap();
            let rhs = waa::randomized::expected_loss(&loss, &mu, &y).unwrap();
            assert!(
                lhs <= rhs + 1e-9,
                "criterion 6 FAIL ({} measure {i}): {lhs} > {rhs}",
                loss.kind_name()
            );
        }
    }
    println!("acceptance 6 (clipping dominance, 2x2000 sampled triples): PASS");
}

#[test]
fn criterion_7_removal_game_behavior() {
    // escaping environment: restart count must equal the closed-form stage
    // arithmetic
    let config = RunConfig {
        spaces: Spaces { d_x: 1, d_y: 1 },
        loss: LossKind::SquaredNorm,
        mode: Mode::Removal,
        pool: PoolConfig {
            k_max: 2,
            priors: PriorRule::Dyadic,
            families: default_families(),
        },
        environment: EnvironmentSpec::Escaping {
            base: 1.0,
            growth: 3.0,
            seed: 0,
        },
        horizon: 12,
        rng_seed: 0,
        removal: Some(RemovalConfig {
            r0: 2.0,
            replay_activation: false,
        }),
        randomized: None,
        output: OutputConfig::default(),
        mutation_beta: None,
    };
    let out = run(&config).expect("escaping run");
    let mut stage = 1u32;
    let mut oracle_escapes = 0u32;
    for i in 0..12u32 {
        let y = 3f64.powi(i as i32);
        if y > 2.0 * 2f64.powi(stage as i32) {
            oracle_escapes += 1;
            let mut j = stage + 1;
            while 2.0 * 2f64.powi(j as i32) < y {
                j += 1;
            }
            stage = j;
        }
    }
    assert_eq!(
        out.summary.restart_count, oracle_escapes,
        "criterion 7 FAIL: restarts {} vs oracle {oracle_escapes}",
        out.summary.restart_count
    );

    // bounded environment (|y| <= 50, r0 = 2): final stage within 5
    // restarts, and the regret bound holds for the clipped pool on the
    // rounds after the final restart
    let dims = SpaceDims {
        d_x: 1,
        d_y: 1,
        d_gamma: 1,
    };
    let enum_config = waa::experts::EnumConfig {
        dims,
        families: default_families(),
    };
    let strategies = enumerate_first(&enum_config, 4).unwrap();
    let base: Vec<std::sync::Arc<dyn Predictor<Point>>> = strategies
        .into_iter()
        .map(|s| std::sync::Arc::new(s) as std::sync::Arc<dyn Predictor<Point>>)
        .collect();
    let loss = LossFunction::SquaredNorm;
    let mut meta = MetaPredictor::new(
        base,
        vec![0.5, 0.25, 0.125, 0.125],
        loss.clone(),
        RemovalState::new(2.0, 1, 1).unwrap(),
        pt(&[0.0]),
        false,
    )
    .unwrap();
    let mut env = build_environment(
        &EnvironmentSpec::DriftingSine {
            amplitude: 45.0,
            period: 300.0,
            sd: 0.5,
            seed: 3,
        },
        1,
        1,
    )
    .unwrap();
    let mut max_abs_y = 0.0f64;
    let mut segment_loss_bound = 0.0f64;
    for _ in 0..4000 {
        let x = env.next_signal();
        let (pred, _) = meta.begin_round(x).unwrap();
        let y = env
            .next_observation(&|c| loss.loss_of(&pred, c))
            .unwrap();
        max_abs_y = max_abs_y.max(y.coords()[0].abs());
        let r = meta.end_round(y).unwrap();
        if r.restarted {
            segment_loss_bound = 0.0;
        } else {
            for l in &r.report.expert_losses {
                segment_loss_bound = segment_loss_bound.max(l.abs());
            }
        }
    }
    assert!(max_abs_y <= 50.0, "environment exceeded the stated bound");
    assert!(
        meta.escape_count() <= 5,
        "criterion 7 FAIL: {} restarts to cover a bound of 50",
        meta.escape_count()
    );
    assert!(meta.escape_count() > 0, "test should exercise restarts");
    let inner = meta.inner();
    assert!(inner.round() > 0, "final stage must have rounds");
    for k in 0..inner.pool().len() {
        let c = inner.lemma5_bound(k, segment_loss_bound).unwrap();
        assert!(
            c.holds,
            "criterion 7 FAIL: post-restart regret bound broken for expert {k}: {c:?}"
        );
    }
    println!(
        "acceptance 7 (removal game: {} oracle restarts; bounded run {} restarts): PASS",
        oracle_escapes,
        meta.escape_count()
    );
}

#[test]
fn criterion_8_lil_concentration() {
    let mut within = 0;
    let mut stats = Vec::new();
    for seed in 1..=20u64 {
        let config = RunConfig {
            spaces: Spaces { d_x: 1, d_y: 1 },
            loss: LossKind::SquaredNorm,
            mode: Mode::Randomized,
            pool: PoolConfig {
                k_max: 2,
                priors: PriorRule::Uniform,
                families: vec![FamilyConfig {
                    family: Family::Constant,
                    coeff_range: (0.0, 1.0),
                    max_level: None,
                    memory_range: (0, 0),
                    centroid_count: 2,
                }],
            },
            environment: EnvironmentSpec::AdversarialWorstcase {
                center: vec![0.5],
                radius: 0.5,
                seed,
            },
            horizon: 100_000,
            rng_seed: seed,
            removal: None,
            randomized: Some(RandomizedConfig {
                lil_loss_bound: Some(1.0),
            }),
            output: OutputConfig::default(),
            mutation_beta: None,
        };
        let out = run(&config).expect("randomized run");
        assert!(
            !out.summary.failed_checks.iter().any(|f| f == "lil_increment"),
            "increment bound violated at seed {seed}"
        );
        let stat = out.summary.lil_statistic.expect("monitor enabled");
        stats.push(stat);
        if stat <= 1.2 {
            within += 1;
        }
    }
    assert!(
        within >= 19,
        "criterion 8 FAIL: only {within}/20 seeds within 1.2: {stats:?}"
    );
    let max = stats.iter().cloned().fold(0.0f64, f64::max);
    println!("acceptance 8 (LIL statistic <= 1.2 for {within}/20 seeds, max {max:.3}): PASS");
}

#[test]
fn criterion_9_reproducibility() {
    for (mode, env) in [
        (
            Mode::Deterministic,
            EnvironmentSpec::Ar1 {
                a: 0.5,
                c: 0.0,
                sd: 0.3,
                seed: 9,
            },
        ),
        (
            Mode::Randomized,
            EnvironmentSpec::IidGaussian {
                mean: vec![0.5],
                sd: 0.1,
                seed: 9,
            },
        ),
        (
            Mode::Removal,
            EnvironmentSpec::DriftingSine {
                amplitude: 20.0,
                period: 100.0,
                sd: 0.5,
                seed: 9,
            },
        ),
    ] {
        let config = RunConfig {
            spaces: Spaces { d_x: 1, d_y: 1 },
            loss: LossKind::SquaredNorm,
            mode,
            pool: PoolConfig {
                k_max: 6,
                priors: PriorRule::Dyadic,
                families: default_families(),
            },
            environment: env,
            horizon: 2_000,
            rng_seed: 31,
            removal: Some(RemovalConfig {
                r0: 2.0,
                replay_activation: false,
            }),
            randomized: Some(RandomizedConfig {
                lil_loss_bound: None,
            }),
            output: OutputConfig::default(),
            mutation_beta: None,
        };
        let a = run(&config).expect("first run");
        let b = run(&config).expect("second run");
        let csv_a = render_trace(&a.trace);
        let csv_b = render_trace(&b.trace);
        assert_eq!(
            csv_a.as_bytes(),
            csv_b.as_bytes(),
            "criterion 9 FAIL: traces differ in mode {mode:?}"
        );
    }
    println!("acceptance 9 (byte-identical traces across reruns, 3 modes): PASS");
}

#[test]
fn criterion_10_mutation_sensitivity() {
    let base = RunConfig {
        spaces: Spaces { d_x: 1, d_y: 1 },
        loss: LossKind::SquaredNorm,
        mode: Mode::Deterministic,
        pool: PoolConfig {
            k_max: 2,
            priors: PriorRule::Dyadic,
            families: default_families(),
        },
        environment: EnvironmentSpec::IidGaussian {
            mean: vec![0.5],
            sd: 0.25,
            seed: 1,
        },
        horizon: 100,
        rng_seed: 1,
        removal: None,
        randomized: None,
        output: OutputConfig::default(),
        mutation_beta: None,
    };

    let clean = verify_suite(&base).expect("battery");
    assert!(
        clean.passed,
        "criterion 10 FAIL: clean battery must pass: {:?}",
        clean
            .properties
            .iter()
            .filter(|p| !p.pass)
            .collect::<Vec<_>>()
    );

    let mut mutated_config = base;
    mutated_config.mutation_beta = Some(0.5);
    let mutated = verify_suite(&mutated_config).expect("mutated battery");
    let lemma5 = mutated
        .properties
        .iter()
        .find(|p| p.name == "lemma5")
        .expect("lemma5 property present");
    assert!(
        !lemma5.pass,
        "criterion 10 FAIL: frozen beta_n = 0.5 must break the regret bound somewhere in the matrix"
    );
    println!(
        "acceptance 10 (mutation sensitivity: frozen beta caught at {}): PASS",
        lemma5.details
    );
}
