//! Experiment runner: drives one configured game end to end, collects the
//! per-round trace, audits every inequality the aggregator is supposed to
//! satisfy, and aggregates a verification battery over a fixed matrix of
//! environments, losses, pools, and modes.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Mode, PriorRule, RunConfig};
use crate::domain::Point;
use crate::engine::{
    mean_comparison_check, ConvexCombine, ExpertPool, RoundReport, RoundStart, WaaState,
};
use crate::environment::{build_environment, Environment};
use crate::experts::{enumerate_first, Predictor};
use crate::loss::{LossFunction, LossOn};
use crate::randomized::{Dirac, DiscreteMeasure, LilMonitor, LIL_MIN_ROUNDS};
use crate::removal::{build_clipping, clip_measure, clip_point, Clippable, MetaPredictor, RemovalState};
use crate::trace::TraceRow;
use crate::{Result, CHECK_TOL};

const NORMALIZATION_TOL: f64 = 1e-12;

/// End-of-run record; serialized as the summary JSON.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub rounds: usize,
    pub experts: usize,
    pub loss_kind: String,
    /// Largest `|l_n^(k)|` observed across experts and rounds; the `L` used
    /// by the regret-bound checks.
    pub loss_bound_observed: f64,
    /// Total loss of the announced predictions over the whole run.
    pub own_cumulative_loss: f64,
    /// Best expert of the final (stage) engine and its cumulative loss there.
    pub best_expert: usize,
    pub best_expert_loss: f64,
    pub avg_regret_vs_best: f64,
    /// Max over rounds of `lemma9_lhs - lemma9_rhs`; expected nonpositive up
    /// to tolerance.
    pub max_lemma9_violation: f64,
    /// Min over experts of `bound - excess` at the horizon.
    pub lemma5_min_margin: f64,
    pub restart_count: u32,
    pub lil_statistic: Option<f64>,
    pub checks_passed: bool,
    pub failed_checks: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<TraceRow>,
}

/// One game protocol driver: the plain engine or the removal meta-strategy.
trait RoundDriver<P: ConvexCombine>
where
    LossFunction: LossOn<P>,
{
    fn begin(&mut self, signal: Point) -> Result<(P, RoundStart)>;
    /// Returns the round report plus (stage now in force, restarted flag).
    fn end(&mut self, observation: Point) -> Result<(RoundReport<P>, u32, bool)>;
    fn engine(&self) -> &WaaState<P>;
    fn restart_count(&self) -> u32;
}

impl<P: ConvexCombine> RoundDriver<P> for WaaState<P>
where
    LossFunction: LossOn<P>,
{
    fn begin(&mut self, signal: Point) -> Result<(P, RoundStart)> {
        self.begin_round(signal)
    }

    fn end(&mut self, observation: Point) -> Result<(RoundReport<P>, u32, bool)> {
        Ok((self.end_round(observation)?, 1, false))
    }

    fn engine(&self) -> &WaaState<P> {
        self
    }

    fn restart_count(&self) -> u32 {
        0
    }
}

impl<P: Clippable> RoundDriver<P> for MetaPredictor<P>
where
    LossFunction: LossOn<P>,
{
    fn begin(&mut self, signal: Point) -> Result<(P, RoundStart)> {
        self.begin_round(signal)
    }

    fn end(&mut self, observation: Point) -> Result<(RoundReport<P>, u32, bool)> {
        let r = self.end_round(observation)?;
        Ok((r.report, r.stage, r.restarted))
    }

    fn engine(&self) -> &WaaState<P> {
        self.inner()
    }

    fn restart_count(&self) -> u32 {
        self.escape_count()
    }
}

struct DriveStats {
    rows: Vec<TraceRow>,
    global_own: f64,
    loss_bound: f64,
    worst_normalization: f64,
    worst_convexity: f64,
    worst_lemma9: f64,
    worst_lemma5: f64,
    failures: Vec<String>,
}

fn note_failure(failures: &mut Vec<String>, name: &str) {
    if !failures.iter().any(|f| f == name) {
        failures.push(name.to_string());
    }
}

fn drive<P, D, F>(
    driver: &mut D,
    env: &mut dyn Environment,
    horizon: usize,
    loss: &LossFunction,
    convex: bool,
    mut per_round: F,
) -> Result<DriveStats>
where
    P: ConvexCombine,
    D: RoundDriver<P>,
    LossFunction: LossOn<P>,
    F: FnMut(&P, &Point, &RoundReport<P>) -> Result<Option<&'static str>>,
{
    let mut stats = DriveStats {
        rows: Vec::with_capacity(horizon),
        global_own: 0.0,
        loss_bound: 0.0,
        worst_normalization: 0.0,
        worst_convexity: f64::NEG_INFINITY,
        worst_lemma9: f64::NEG_INFINITY,
        worst_lemma5: f64::NEG_INFINITY,
        failures: Vec::new(),
    };
    for n in 1..=horizon {
        let signal = env.next_signal();
        let (prediction, start) = driver.begin(signal)?;

        let norm_gap = (start.weights.iter().sum::<f64>() - 1.0).abs();
        stats.worst_normalization = stats.worst_normalization.max(norm_gap);
        if norm_gap > NORMALIZATION_TOL {
            note_failure(&mut stats.failures, "normalization");
        }

        let observation =
            env.next_observation(&|candidate| loss.loss_of(&prediction, candidate))?;
        let (report, stage, restarted) = driver.end(observation.clone())?;

        if let Some(fail) = per_round(&report.prediction, &observation, &report)? {
            note_failure(&mut stats.failures, fail);
        }

        for l in &report.expert_losses {
            stats.loss_bound = stats.loss_bound.max(l.abs());
        }
        stats.global_own += report.own_loss;

        if convex {
            // absolute-plus-relative: the exact-real inequality drowns in
            // weight rounding once losses reach ~1e3
            let gap = report.own_loss - report.mixture_loss;
            stats.worst_convexity = stats.worst_convexity.max(gap);
            if gap > CHECK_TOL * report.mixture_loss.abs().max(1.0) {
                note_failure(&mut stats.failures, "countable_convexity");
            }
        }

        let l9 = report.lemma9_lhs - report.lemma9_rhs;
        stats.worst_lemma9 = stats.worst_lemma9.max(l9);
        if l9 > CHECK_TOL * report.lemma9_rhs.abs().max(1.0) {
            note_failure(&mut stats.failures, "lemma9");
        }

        let engine = driver.engine();
        let best = engine.best_expert();
        let best_loss = engine.cumulative_losses()[best];
        let l5 = engine.lemma5_bound(best, stats.loss_bound)?;
        stats.worst_lemma5 = stats
            .worst_lemma5
            .max(l5.excess - l5.bound - CHECK_TOL * l5.bound.max(1.0));
        if !l5.holds {
            note_failure(&mut stats.failures, "lemma5");
        }

        stats.rows.push(TraceRow {
            n,
            beta: start.beta,
            own_loss: report.own_loss,
            cum_own_loss: stats.global_own,
            best_expert_loss: best_loss,
            lemma9_lhs: report.lemma9_lhs,
            lemma9_rhs: report.lemma9_rhs,
            lemma5_excess_best: l5.excess,
            lemma5_bound_best: l5.bound,
            stage,
            restart: restarted,
        });
    }

    // horizon check over every expert of the final engine
    let engine = driver.engine();
    for k in 0..engine.pool().len() {
        let l5 = engine.lemma5_bound(k, stats.loss_bound)?;
        stats.worst_lemma5 = stats
            .worst_lemma5
            .max(l5.excess - l5.bound - CHECK_TOL * l5.bound.max(1.0));
        if !l5.holds {
            note_failure(&mut stats.failures, "lemma5");
        }
    }
    Ok(stats)
}

fn raw_priors(rule: PriorRule, k: usize) -> Vec<f64> {
    match rule {
        PriorRule::Dyadic => (0..k).map(|i| 0.5f64.powi(i as i32 + 1)).collect(),
        PriorRule::Uniform => vec![1.0; k],
    }
}

fn summarize<P, D>(
    config: &RunConfig,
    driver: &D,
    stats: DriveStats,
    lil_statistic: Option<f64>,
) -> RunOutput
where
    P: ConvexCombine,
    D: RoundDriver<P>,
    LossFunction: LossOn<P>,
{
    let engine = driver.engine();
    let inner_rounds = engine.round();
    let best = engine.best_expert();
    let best_loss = engine.cumulative_losses()[best];
    let avg_regret = if inner_rounds > 0 {
        (engine.own_cumulative_loss() - best_loss) / inner_rounds as f64
    } else {
        0.0
    };
    let lemma5_min_margin = (0..engine.pool().len())
        .map(|k| {
            let c = engine.lemma5_bound(k, stats.loss_bound).expect("valid index");
            c.bound - c.excess
        })
        .fold(f64::INFINITY, f64::min);
    let mut failures = stats.failures;
    failures.sort();
    let summary = RunSummary {
        mode: config.mode,
        rounds: stats.rows.len(),
        experts: engine.pool().len(),
        loss_kind: config.loss_fn().kind_name().to_string(),
        loss_bound_observed: stats.loss_bound,
        own_cumulative_loss: stats.global_own,
        best_expert: best,
        best_expert_loss: best_loss,
        avg_regret_vs_best: avg_regret,
        max_lemma9_violation: stats.worst_lemma9,
        lemma5_min_margin,
        restart_count: driver.restart_count(),
        lil_statistic,
        checks_passed: failures.is_empty(),
        failed_checks: failures,
    };
    RunOutput {
        summary,
        trace: stats.rows,
    }
}

/// Execute one configured run and return its summary plus per-round trace.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let loss = config.loss_fn();
    let strategies = enumerate_first(&config.enum_config(), config.pool.k_max)?;
    let priors = raw_priors(config.pool.priors, config.pool.k_max);
    let mut env = build_environment(&config.environment, config.spaces.d_x, config.spaces.d_y)?;
    let convex = loss.convex_in_prediction();
    let no_extras =
        |_: &Point, _: &Point, _: &RoundReport<Point>| -> Result<Option<&'static str>> { Ok(None) };

    match config.mode {
        Mode::Deterministic => {
            let experts: Vec<Arc<dyn Predictor<Point>>> = strategies
                .into_iter()
                .map(|s| Arc::new(s) as Arc<dyn Predictor<Point>>)
                .collect();
            let pool = ExpertPool::new(experts, priors)?;
            let mut engine = WaaState::new(pool, loss.clone());
            if let Some(b) = config.mutation_beta {
                engine = engine.with_beta_override(b);
            }
            let stats = drive(
                &mut engine,
                env.as_mut(),
                config.horizon,
                &loss,
                convex,
                no_extras,
            )?;
            Ok(summarize(config, &engine, stats, None))
        }
        Mode::Removal => {
            let experts: Vec<Arc<dyn Predictor<Point>>> = strategies
                .into_iter()
                .map(|s| Arc::new(s) as Arc<dyn Predictor<Point>>)
                .collect();
            let rc = config.removal_config();
            let mut meta = MetaPredictor::with_beta_override(
                experts,
                priors,
                loss.clone(),
                RemovalState::new(rc.r0, config.spaces.d_x, config.spaces.d_y)?,
                Point::zero(config.d_gamma()),
                rc.replay_activation,
                config.mutation_beta,
            )?;
            let stats = drive(
                &mut meta,
                env.as_mut(),
                config.horizon,
                &loss,
                convex,
                no_extras,
            )?;
            Ok(summarize(config, &meta, stats, None))
        }
        Mode::Randomized => {
            let experts: Vec<Arc<dyn Predictor<DiscreteMeasure>>> = strategies
                .into_iter()
                .map(|s| Arc::new(Dirac(s)) as Arc<dyn Predictor<DiscreteMeasure>>)
                .collect();
            let pool = ExpertPool::new(experts, priors)?;
            let mut engine = WaaState::new(pool, loss.clone());
            if let Some(b) = config.mutation_beta {
                engine = engine.with_beta_override(b);
            }
            let mut sampler = Sampler::new(config, &loss)?;
            let stats = drive(
                &mut engine,
                env.as_mut(),
                config.horizon,
                &loss,
                true,
                |p, y, r| sampler.observe(p, y, r.own_loss),
            )?;
            let lil = sampler.statistic();
            Ok(summarize(config, &engine, stats, lil))
        }
        Mode::RemovalRandomized => {
            let experts: Vec<Arc<dyn Predictor<DiscreteMeasure>>> = strategies
                .into_iter()
                .map(|s| Arc::new(Dirac(s)) as Arc<dyn Predictor<DiscreteMeasure>>)
                .collect();
            let rc = config.removal_config();
            let mut meta = MetaPredictor::with_beta_override(
                experts,
                priors,
                loss.clone(),
                RemovalState::new(rc.r0, config.spaces.d_x, config.spaces.d_y)?,
                Point::zero(config.d_gamma()),
                rc.replay_activation,
                config.mutation_beta,
            )?;
            let mut sampler = Sampler::new(config, &loss)?;
            let stats = drive(
                &mut meta,
                env.as_mut(),
                config.horizon,
                &loss,
                true,
                |p, y, r| sampler.observe(p, y, r.own_loss),
            )?;
            let lil = sampler.statistic();
            Ok(summarize(config, &meta, stats, lil))
        }
    }
}

/// Samples the aggregator's randomized prediction each round and feeds the
/// law-of-the-iterated-logarithm monitor.
struct Sampler {
    rng: ChaCha8Rng,
    monitor: Option<LilMonitor>,
    loss: LossFunction,
}

impl Sampler {
    fn new(config: &RunConfig, loss: &LossFunction) -> Result<Self> {
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let monitor = config
            .randomized_config()
            .lil_loss_bound
            .map(LilMonitor::new)
            .transpose()?;
        Ok(Sampler {
            rng,
            monitor,
            loss: loss.clone(),
        })
    }

    fn observe(
        &mut self,
        prediction: &DiscreteMeasure,
        observation: &Point,
        expected: f64,
    ) -> Result<Option<&'static str>> {
        let g = prediction.sample(&mut self.rng);
        let realized = self.loss.eval(&g, observation)?;
        if let Some(m) = &mut self.monitor {
            if m.record(realized, expected).is_err() {
                return Ok(Some("lil_increment"));
            }
        }
        Ok(None)
    }

    fn statistic(&self) -> Option<f64> {
        self.monitor
            .as_ref()
            .filter(|m| m.rounds() >= LIL_MIN_ROUNDS)
            .and_then(|m| m.statistic().ok())
    }
}

/// One property line of the verification battery.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub name: String,
    pub pass: bool,
    /// Worst margin observed; positive means violated by that much.
    pub worst_margin: f64,
    pub details: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub properties: Vec<PropertyReport>,
    pub passed: bool,
}

struct PropertyAggregate {
    worst: f64,
    pass: bool,
    details: String,
}

impl PropertyAggregate {
    fn new() -> Self {
        PropertyAggregate {
            worst: f64::NEG_INFINITY,
            pass: true,
            details: String::new(),
        }
    }

    fn update(&mut self, margin: f64, failed: bool, context: &str) {
        if margin > self.worst {
            self.worst = margin;
            self.details = context.to_string();
        }
        if failed {
            self.pass = false;
            if !self.details.contains("FAILED") {
                self.details = format!("FAILED at {context}");
            }
        }
    }

    fn into_report(self, name: &str) -> PropertyReport {
        PropertyReport {
            name: name.to_string(),
            pass: self.pass,
            worst_margin: if self.worst == f64::NEG_INFINITY {
                0.0
            } else {
                self.worst
            },
            details: self.details,
        }
    }
}

fn matrix_configs(mutation_beta: Option<f64>) -> Vec<RunConfig> {
    use crate::config::*;
    use crate::experts::{Family, FamilyConfig};

    let default_families = vec![
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
    ];
    let unit_constants = vec![FamilyConfig {
        family: Family::Constant,
        coeff_range: (0.0, 1.0),
        max_level: None,
        memory_range: (0, 0),
        centroid_count: 2,
    }];
    let environments = |seed: u64| {
        vec![
            EnvironmentSpec::IidGaussian {
                mean: vec![0.5],
                sd: 0.25,
                seed,
            },
            EnvironmentSpec::Ar1 {
                a: 0.5,
                c: 0.0,
                sd: 0.3,
                seed,
            },
            EnvironmentSpec::DriftingSine {
                amplitude: 0.8,
                period: 200.0,
                sd: 0.1,
                seed,
            },
            EnvironmentSpec::AdversarialWorstcase {
                center: vec![0.5],
                radius: 0.5,
                seed,
            },
        ]
    };

    let mut configs = Vec::new();
    for loss in [LossKind::SquaredNorm, LossKind::AbsoluteNorm] {
        for seed in [1u64, 2] {
            for environment in environments(seed) {
                for k_max in [2usize, 8] {
                    configs.push(RunConfig {
                        spaces: Spaces { d_x: 1, d_y: 1 },
                        loss,
                        mode: Mode::Deterministic,
                        pool: PoolConfig {
                            k_max,
                            priors: PriorRule::Dyadic,
                            families: default_families.clone(),
                        },
                        environment: environment.clone(),
                        horizon: 2000,
                        rng_seed: seed,
                        removal: None,
                        randomized: None,
                        output: OutputConfig::default(),
                        mutation_beta,
                    });
                }
            }
        }
    }
    // randomized cells; the adversarial one is the canary for a broken
    // learning-rate schedule
    for seed in [1u64, 2] {
        configs.push(RunConfig {
            spaces: Spaces { d_x: 1, d_y: 1 },
            loss: LossKind::SquaredNorm,
            mode: Mode::Randomized,
            pool: PoolConfig {
                k_max: 2,
                priors: PriorRule::Uniform,
                families: unit_constants.clone(),
            },
            environment: EnvironmentSpec::AdversarialWorstcase {
                center: vec![0.5],
                radius: 0.5,
                seed,
            },
            horizon: 10_000,
            rng_seed: seed,
            removal: None,
            randomized: Some(RandomizedConfig {
                lil_loss_bound: Some(1.0),
            }),
            output: OutputConfig::default(),
            mutation_beta,
        });
    }
    configs.push(RunConfig {
        spaces: Spaces { d_x: 1, d_y: 1 },
        loss: LossKind::SquaredNorm,
        mode: Mode::Randomized,
        pool: PoolConfig {
            k_max: 4,
            priors: PriorRule::Uniform,
            families: unit_constants.clone(),
        },
        environment: EnvironmentSpec::IidGaussian {
            mean: vec![0.5],
            sd: 0.1,
            seed: 5,
        },
        horizon: 5000,
        rng_seed: 5,
        removal: None,
        randomized: Some(RandomizedConfig {
            lil_loss_bound: Some(1.5),
        }),
        output: OutputConfig::default(),
        mutation_beta,
    });
    // removal cells: one escaping, one bounded
    configs.push(RunConfig {
        spaces: Spaces { d_x: 1, d_y: 1 },
        loss: LossKind::SquaredNorm,
        mode: Mode::Removal,
        pool: PoolConfig {
            k_max: 2,
            priors: PriorRule::Dyadic,
            families: default_families.clone(),
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
        mutation_beta,
    });
    configs.push(RunConfig {
        spaces: Spaces { d_x: 1, d_y: 1 },
        loss: LossKind::SquaredNorm,
        mode: Mode::Removal,
        pool: PoolConfig {
            k_max: 4,
            priors: PriorRule::Dyadic,
            families: default_families.clone(),
        },
        environment: EnvironmentSpec::DriftingSine {
            amplitude: 45.0,
            period: 300.0,
            sd: 0.5,
            seed: 3,
        },
        horizon: 2000,
        rng_seed: 3,
        removal: Some(RemovalConfig {
            r0: 2.0,
            replay_activation: false,
        }),
        randomized: None,
        output: OutputConfig::default(),
        mutation_beta,
    });
    configs.push(RunConfig {
        spaces: Spaces { d_x: 1, d_y: 1 },
        loss: LossKind::AbsoluteNorm,
        mode: Mode::RemovalRandomized,
        pool: PoolConfig {
            k_max: 3,
            priors: PriorRule::Dyadic,
            families: default_families,
        },
        environment: EnvironmentSpec::DriftingSine {
            amplitude: 10.0,
            period: 100.0,
            sd: 0.25,
            seed: 7,
        },
        horizon: 1000,
        rng_seed: 7,
        removal: Some(RemovalConfig {
            r0: 2.0,
            replay_activation: false,
        }),
        randomized: Some(RandomizedConfig {
            lil_loss_bound: None,
        }),
        output: OutputConfig::default(),
        mutation_beta,
    });
    configs
}

fn run_context(config: &RunConfig) -> String {
    format!(
        "{} {} {} k={} seed={}",
        config.mode.name(),
        config.loss_fn().kind_name(),
        config.environment.kind_name(),
        config.pool.k_max,
        config.rng_seed,
    )
}

/// Run the full invariant battery over the fixed matrix: normalization,
/// countable convexity, the per-round weight-update inequality, the regret
/// bound, the generalized-mean comparison, clip dominance, and the LIL
/// statistic. Failures are reported, never thrown. The config contributes
/// only its `mutation_beta` (the battery's matrix is fixed).
pub fn verify_suite(config: &RunConfig) -> Result<VerifyReport> {
    let mut normalization = PropertyAggregate::new();
    let mut convexity = PropertyAggregate::new();
    let mut lemma9 = PropertyAggregate::new();
    let mut lemma5 = PropertyAggregate::new();
    let mut mean_cmp = PropertyAggregate::new();
    let mut clip = PropertyAggregate::new();
    let mut lil = PropertyAggregate::new();

    for cell in matrix_configs(config.mutation_beta) {
        let ctx = run_context(&cell);
        let out = run(&cell)?;
        let s = &out.summary;
        normalization.update(
            0.0,
            s.failed_checks.iter().any(|f| f == "normalization"),
            &ctx,
        );
        convexity.update(
            0.0,
            s.failed_checks.iter().any(|f| f == "countable_convexity"),
            &ctx,
        );
        lemma9.update(
            s.max_lemma9_violation,
            s.failed_checks.iter().any(|f| f == "lemma9"),
            &ctx,
        );
        lemma5.update(
            -s.lemma5_min_margin,
            s.failed_checks.iter().any(|f| f == "lemma5"),
            &ctx,
        );
        if let Some(stat) = s.lil_statistic {
            lil.update(stat - 1.2, stat > 1.2, &ctx);
        }
        if s.failed_checks.iter().any(|f| f == "lil_increment") {
            lil.update(1.0, true, &ctx);
        }
    }

    // generalized-mean comparison sweep
    {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for i in 0..1000 {
            let k = rng.gen_range(1..=64);
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-3..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let q: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let l: Vec<f64> = (0..k).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let n = rng.gen_range(1..=1_000_000);
            let mc = mean_comparison_check(&q, &l, n)?;
            mean_cmp.update(mc.lhs - mc.rhs - 1e-9, !mc.holds, &format!("triple {i}"));
        }
    }

    // clip dominance sweep, deterministic and measure-valued
    {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4096);
        for loss in [LossFunction::SquaredNorm, LossFunction::AbsoluteNorm] {
            let b = crate::domain::CompactBall::euclidean(Point::new(vec![0.25])?, 1.0)?;
            let spec = build_clipping(&loss, &b, &Point::zero(1))?;
            for i in 0..1000 {
                let g = Point::new(vec![rng.gen_range(-50.0..50.0)])?;
                let y = Point::new(vec![rng.gen_range(-0.75..1.25)])?;
                let clipped = clip_point(&spec, &g);
                let margin =
                    loss.eval(&clipped, &y)? - loss.eval(&g, &y)? - CHECK_TOL;
                clip.update(
                    margin,
                    margin > 0.0,
                    &format!("{} point {i}", loss.kind_name()),
                );
                let mu = DiscreteMeasure::new(vec![
                    (g.clone(), 0.5),
                    (Point::new(vec![rng.gen_range(-5.0..5.0)])?, 0.5),
                ])?;
                let cm = clip_measure(&spec, &mu);
                let margin = crate::randomized::expected_loss(&loss, &cm, &y)?
                    - crate::randomized::expected_loss(&loss, &mu, &y)?
                    - CHECK_TOL;
                clip.update(
                    margin,
                    margin > 0.0,
                    &format!("{} measure {i}", loss.kind_name()),
                );
            }
        }
    }

    let properties = vec![
        normalization.into_report("normalization"),
        convexity.into_report("countable_convexity"),
        lemma9.into_report("lemma9"),
        lemma5.into_report("lemma5"),
        mean_cmp.into_report("mean_comparison"),
        clip.into_report("clip_dominance"),
        lil.into_report("lil"),
    ];
    let passed = properties.iter().all(|p| p.pass);
    Ok(VerifyReport { properties, passed })
}
