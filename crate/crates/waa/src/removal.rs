//! Unbounded domains via the game of removal: a doubling compact exhaustion
//! (the Remover's winning strategy over a sigma-compact space), clipping of
//! strategies into loss-dominating compacts, and the restart meta-strategy
//! built on both.
//!
//! Clipping works for any loss that is large at infinity. Given an
//! observation ball `B` and a base point `gamma_0`, two nested sublevel balls
//! `C1` (radius `r1`) inside `C2` (radius `r2`) are chosen so that any
//! prediction outside `C1` already loses more against `B` than `gamma_0`
//! does. A strategy is clipped by the continuous ramp
//!
//! ```text
//! f1(g) = rho(g, outside C2) / (rho(g, C1) + rho(g, outside C2))
//! ```
//!
//! onto `f1 * g + (1 - f1) * gamma_0`; for convex losses the clipped
//! prediction never does worse on `B`. The same ramp acts as the density
//! splitting a measure between itself and a point mass at `gamma_0`, so the
//! deterministic and randomized clippings share one code path.

use std::sync::Arc;

use crate::domain::{CompactBall, History, Norm, Point, Transcript};
use crate::engine::{ConvexCombine, ExpertPool, RoundReport, RoundStart, WaaState};
use crate::experts::{replay_cumulative_loss, Predictor};
use crate::loss::{LossFunction, LossOn};
use crate::randomized::DiscreteMeasure;
use crate::{Error, Result};

/// Remover's side of the game of removal: the current stage of the fixed
/// exhaustion by max-norm balls of radius `r0 * 2^stage` over both the signal
/// and observation spaces, and how often the Evader has escaped so far.
#[derive(Debug, Clone)]
pub struct RemovalState {
    stage: u32,
    r0: f64,
    d_x: usize,
    d_y: usize,
    escape_count: u32,
}

impl RemovalState {
    pub fn new(r0: f64, d_x: usize, d_y: usize) -> Result<Self> {
        if !r0.is_finite() || r0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "exhaustion base radius must be positive".into(),
            ));
        }
        Ok(RemovalState {
            stage: 1,
            r0,
            d_x,
            d_y,
            escape_count: 0,
        })
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    pub fn escape_count(&self) -> u32 {
        self.escape_count
    }

    fn radius(&self, stage: u32) -> f64 {
        self.r0 * 2f64.powi(stage as i32)
    }

    /// Current signal-space compact `A_k`.
    pub fn signal_ball(&self) -> CompactBall {
        CompactBall::new(Point::zero(self.d_x), self.radius(self.stage), Norm::Max)
            .expect("finite radius")
    }

    /// Current observation-space compact `B_k`.
    pub fn observation_ball(&self) -> CompactBall {
        CompactBall::new(Point::zero(self.d_y), self.radius(self.stage), Norm::Max)
            .expect("finite radius")
    }

    pub fn contains(&self, signal: &Point, observation: &Point) -> bool {
        self.signal_ball().contains(signal) && self.observation_ball().contains(observation)
    }

    /// Answer an escape: advance to the smallest stage `j > k` whose compact
    /// contains the escape point. Calling this with a contained point is a
    /// protocol violation.
    pub fn remover_next(&mut self, escape: (&Point, &Point)) -> Result<u32> {
        if self.contains(escape.0, escape.1) {
            return Err(Error::InvalidArgument(
                "remover_next called with a point inside the current compact".into(),
            ));
        }
        let reach = escape
            .0
            .max_distance(&Point::zero(self.d_x))
            .max(escape.1.max_distance(&Point::zero(self.d_y)));
        let mut j = self.stage + 1;
        while self.radius(j) < reach {
            j += 1;
        }
        self.stage = j;
        self.escape_count += 1;
        Ok(j)
    }
}

/// The objects behind one clipping: base point, nested sublevel balls, and
/// the two loss levels that make the dominance argument work.
#[derive(Debug, Clone)]
pub struct ClippingSpec {
    gamma0: Point,
    c1: CompactBall,
    c2: CompactBall,
    m1: f64,
    m2: f64,
}

impl ClippingSpec {
    pub fn new(
        gamma0: Point,
        c1: CompactBall,
        c2: CompactBall,
        m1: f64,
        m2: f64,
    ) -> Result<Self> {
        if c1.norm() != Norm::Euclidean || c2.norm() != Norm::Euclidean {
            return Err(Error::InvalidArgument("clipping balls must be Euclidean".into()));
        }
        if c1.center() != c2.center() {
            return Err(Error::InvalidArgument(
                "clipping balls must share a center".into(),
            ));
        }
        if c1.radius() >= c2.radius() {
            return Err(Error::InvalidArgument(
                "inner ball must lie in the interior of the outer ball".into(),
            ));
        }
        if !c1.contains(&gamma0) {
            return Err(Error::InvalidArgument(
                "base point must lie in the inner ball".into(),
            ));
        }
        if m1.is_nan() || m2.is_nan() || m1 > m2 {
            return Err(Error::InvalidArgument("loss levels out of order".into()));
        }
        Ok(ClippingSpec {
            gamma0,
            c1,
            c2,
            m1,
            m2,
        })
    }

    pub fn gamma0(&self) -> &Point {
        &self.gamma0
    }

    pub fn c1(&self) -> &CompactBall {
        &self.c1
    }

    pub fn c2(&self) -> &CompactBall {
        &self.c2
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// The ramp `f1` as a function of distance to the shared center: 1 on
    /// `C1`, 0 outside `C2`, the distance ratio in between. Lipschitz with
    /// constant `1 / (r2 - r1)`.
    pub fn coefficient(&self, distance: f64) -> f64 {
        let r1 = self.c1.radius();
        let r2 = self.c2.radius();
        if distance <= r1 {
            1.0
        } else if distance >= r2 {
            0.0
        } else {
            let to_c1 = distance - r1;
            let to_outside = r2 - distance;
            to_outside / (to_c1 + to_outside)
        }
    }

    /// `f1` at a point.
    pub fn bump(&self, gamma: &Point) -> f64 {
        self.coefficient(self.c1.center().euclidean_distance(gamma))
    }
}

/// Build the clipping chain for a loss that is large at infinity:
/// `M1` bounds the base point's loss on `B`; `C1` is a sublevel compact at
/// level `M1 + 1` (grown to contain the base point); `M2` bounds the loss on
/// `C1 x B`; `C2` is a sublevel compact at level `M2 + 1` (grown to keep `C1`
/// strictly inside).
pub fn build_clipping(
    loss: &LossFunction,
    obs_region: &CompactBall,
    gamma0: &Point,
) -> Result<ClippingSpec> {
    let gamma0_ball = CompactBall::euclidean(gamma0.clone(), 0.0)?;
    let m1 = loss.bound_on(&gamma0_ball, obs_region)?;
    let c1 = loss
        .sublevel_compact(obs_region, m1 + 1.0)?
        .with_radius_at_least(obs_region.center().euclidean_distance(gamma0));
    let m2 = loss.bound_on(&c1, obs_region)?;
    let mut c2 = loss.sublevel_compact(obs_region, m2 + 1.0)?;
    if c2.radius() <= c1.radius() {
        c2 = c2.with_radius_at_least(c1.radius() + 1.0);
    }
    ClippingSpec::new(gamma0.clone(), c1, c2, m1, m2)
}

/// Clip a single prediction: identity on `C1`, the base point outside `C2`,
/// the ramp combination in between. Always lands in `C2`.
pub fn clip_point(spec: &ClippingSpec, g: &Point) -> Point {
    let a = spec.bump(g);
    if a == 1.0 {
        g.clone()
    } else if a == 0.0 {
        spec.gamma0().clone()
    } else {
        let coords = g
            .coords()
            .iter()
            .zip(spec.gamma0().coords())
            .map(|(gi, g0)| a * gi + (1.0 - a) * g0)
            .collect();
        Point::new(coords).expect("finite combination")
    }
}

/// Clip a measure: each atom keeps mass `m * f1` in place and sends
/// `m * (1 - f1)` to the point mass at the base point. Dominates the
/// original in expected loss against observations in `B`.
pub fn clip_measure(spec: &ClippingSpec, mu: &DiscreteMeasure) -> DiscreteMeasure {
    let mut atoms = Vec::with_capacity(mu.atoms().len() + 1);
    let mut moved = 0.0;
    for (p, m) in mu.atoms() {
        let f = spec.bump(p);
        if f > 0.0 {
            atoms.push((p.clone(), m * f));
        }
        moved += m * (1.0 - f);
    }
    if moved > 0.0 {
        atoms.push((spec.gamma0().clone(), moved));
    }
    DiscreteMeasure::new(atoms).expect("clipping preserves total mass")
}

/// Prediction types that know how to wrap a strategy in its clipped version.
pub trait Clippable: ConvexCombine + 'static {
    fn clip_predictor(
        spec: ClippingSpec,
        inner: Arc<dyn Predictor<Self>>,
    ) -> Arc<dyn Predictor<Self>>;
}

struct ClippedPoint {
    inner: Arc<dyn Predictor<Point>>,
    spec: ClippingSpec,
}

impl Predictor<Point> for ClippedPoint {
    fn predict(&self, h: &History) -> Point {
        clip_point(&self.spec, &self.inner.predict(h))
    }
}

impl Clippable for Point {
    fn clip_predictor(
        spec: ClippingSpec,
        inner: Arc<dyn Predictor<Self>>,
    ) -> Arc<dyn Predictor<Self>> {
        Arc::new(ClippedPoint { inner, spec })
    }
}

struct ClippedMeasure {
    inner: Arc<dyn Predictor<DiscreteMeasure>>,
    spec: ClippingSpec,
}

impl Predictor<DiscreteMeasure> for ClippedMeasure {
    fn predict(&self, h: &History) -> DiscreteMeasure {
        clip_measure(&self.spec, &self.inner.predict(h))
    }
}

impl Clippable for DiscreteMeasure {
    fn clip_predictor(
        spec: ClippingSpec,
        inner: Arc<dyn Predictor<Self>>,
    ) -> Arc<dyn Predictor<Self>> {
        Arc::new(ClippedMeasure { inner, spec })
    }
}

/// One completed round of the meta-strategy.
#[derive(Debug, Clone)]
pub struct MetaRound<P> {
    pub report: RoundReport<P>,
    /// Stage in force after this round (advanced if the round escaped).
    pub stage: u32,
    pub restarted: bool,
}

/// The restart meta-strategy: an inner aggregator over the pool clipped to
/// the current stage's compact, restarted from scratch whenever Reality
/// escapes the stage.
///
/// While Reality stays inside `A_k x B_k` this is exactly the plain
/// aggregator on the clipped pool. On an escaping observation the Remover
/// advances the exhaustion, the pool is re-clipped against the new
/// observation compact, and a fresh inner aggregator takes over from the next
/// round. The full transcript is retained, so clipped experts can optionally
/// be warm-started by exact replay.
pub struct MetaPredictor<P: Clippable> {
    base: Vec<Arc<dyn Predictor<P>>>,
    raw_priors: Vec<f64>,
    loss: LossFunction,
    removal: RemovalState,
    gamma0: Point,
    replay_activation: bool,
    beta_override: Option<f64>,
    spec: ClippingSpec,
    inner: WaaState<P>,
    full_transcript: Transcript,
    restart_rounds: Vec<usize>,
    pending_signal: Option<Point>,
}

impl<P: Clippable> MetaPredictor<P>
where
    LossFunction: LossOn<P>,
{
    pub fn new(
        base: Vec<Arc<dyn Predictor<P>>>,
        raw_priors: Vec<f64>,
        loss: LossFunction,
        removal: RemovalState,
        gamma0: Point,
        replay_activation: bool,
    ) -> Result<Self> {
        Self::with_beta_override(
            base,
            raw_priors,
            loss,
            removal,
            gamma0,
            replay_activation,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_beta_override(
        base: Vec<Arc<dyn Predictor<P>>>,
        raw_priors: Vec<f64>,
        loss: LossFunction,
        removal: RemovalState,
        gamma0: Point,
        replay_activation: bool,
        beta_override: Option<f64>,
    ) -> Result<Self> {
        let spec = build_clipping(
            &loss,
            &removal.observation_ball().euclidean_enclosure(),
            &gamma0,
        )?;
        let pool = clipped_pool(&base, &raw_priors, &spec)?;
        let mut inner = WaaState::new(pool, loss.clone());
        if let Some(b) = beta_override {
            inner = inner.with_beta_override(b);
        }
        Ok(MetaPredictor {
            base,
            raw_priors,
            loss,
            removal,
            gamma0,
            replay_activation,
            beta_override,
            spec,
            inner,
            full_transcript: Transcript::new(),
            restart_rounds: Vec::new(),
            pending_signal: None,
        })
    }

    pub fn stage(&self) -> u32 {
        self.removal.stage()
    }

    pub fn escape_count(&self) -> u32 {
        self.removal.escape_count()
    }

    /// Global round indices (1-based) on which a restart was triggered.
    pub fn restart_rounds(&self) -> &[usize] {
        &self.restart_rounds
    }

    /// The inner aggregator of the current stage.
    pub fn inner(&self) -> &WaaState<P> {
        &self.inner
    }

    pub fn clipping_spec(&self) -> &ClippingSpec {
        &self.spec
    }

    pub fn full_transcript(&self) -> &Transcript {
        &self.full_transcript
    }

    pub fn rounds(&self) -> usize {
        self.full_transcript.len()
    }

    pub fn begin_round(&mut self, signal: Point) -> Result<(P, RoundStart)> {
        if self.pending_signal.is_some() {
            return Err(Error::InvalidState(
                "begin_round called before the previous round completed".into(),
            ));
        }
        let out = self.inner.begin_round(signal.clone())?;
        self.pending_signal = Some(signal);
        Ok(out)
    }

    pub fn end_round(&mut self, observation: Point) -> Result<MetaRound<P>> {
        let signal = self
            .pending_signal
            .take()
            .ok_or_else(|| Error::InvalidState("end_round without begin_round".into()))?;
        let report = match self.inner.end_round(observation.clone()) {
            Ok(r) => r,
            Err(e) => {
                self.pending_signal = Some(signal);
                return Err(e);
            }
        };
        self.full_transcript.push(signal.clone(), observation.clone());
        let restarted = !self.removal.contains(&signal, &observation);
        if restarted {
            self.removal.remover_next((&signal, &observation))?;
            self.rebuild_inner()?;
            self.restart_rounds.push(self.full_transcript.len());
        }
        Ok(MetaRound {
            report,
            stage: self.removal.stage(),
            restarted,
        })
    }

    fn rebuild_inner(&mut self) -> Result<()> {
        self.spec = build_clipping(
            &self.loss,
            &self.removal.observation_ball().euclidean_enclosure(),
            &self.gamma0,
        )?;
        let pool = clipped_pool(&self.base, &self.raw_priors, &self.spec)?;
        let mut inner = if self.replay_activation {
            let initial = pool_replay(&pool, &self.full_transcript, &self.loss)?;
            WaaState::with_initial_losses(pool, self.loss.clone(), initial)?
        } else {
            WaaState::new(pool, self.loss.clone())
        };
        if let Some(b) = self.beta_override {
            inner = inner.with_beta_override(b);
        }
        self.inner = inner;
        Ok(())
    }
}

fn clipped_pool<P: Clippable>(
    base: &[Arc<dyn Predictor<P>>],
    raw_priors: &[f64],
    spec: &ClippingSpec,
) -> Result<ExpertPool<P>> {
    let experts = base
        .iter()
        .map(|e| P::clip_predictor(spec.clone(), e.clone()))
        .collect();
    ExpertPool::new(experts, raw_priors.to_vec())
}

fn pool_replay<P: Clippable>(
    pool: &ExpertPool<P>,
    transcript: &Transcript,
    loss: &LossFunction,
) -> Result<Vec<f64>>
where
    LossFunction: LossOn<P>,
{
    (0..pool.len())
        .map(|k| replay_cumulative_loss(pool.expert(k).as_ref(), transcript, loss))
        .collect()
}
