//! The aggregating engine: exponential weighting over an expert pool with the
//! time-decaying learning rate `beta_n = exp(-1/sqrt(n))` (the Weak
//! Aggregating Algorithm of Kalnishkan and Vyugin), plus runtime checks for
//! the inequalities its regret guarantee rests on.
//!
//! On round `n` the engine forms weights `w_n^(k) = q_k * beta_n^(L_{n-1}^(k))`
//! over cumulative expert losses, normalizes them to `p_n^(k)`, and predicts
//! the convex combination `sum_k p_n^(k) D_k(sigma_n)`. Everything is computed
//! in the log domain with max-shift normalization, so loss scales far beyond
//! `exp`'s range stay exact to ordinary rounding.
//!
//! The engine is generic over the prediction type: plain points give the
//! deterministic game, finite-support measures (with expected loss) give the
//! randomized game. Both share this one implementation.

use std::sync::Arc;

use crate::domain::{History, Point, Transcript};
use crate::experts::{replay_cumulative_loss, Predictor};
use crate::loss::{LossFunction, LossOn};
use crate::{Error, Result, CHECK_TOL};

/// Prediction types closed under finite convex combinations.
pub trait ConvexCombine: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    /// `sum_k weights[k] * items[k]`, accumulated in ascending index order.
    fn convex_combine(weights: &[f64], items: &[Self]) -> Self;
}

impl ConvexCombine for Point {
    fn convex_combine(weights: &[f64], items: &[Self]) -> Self {
        let dim = items.first().map_or(0, Point::dim);
        let mut acc = vec![0.0; dim];
        for (w, p) in weights.iter().zip(items) {
            for (a, c) in acc.iter_mut().zip(p.coords()) {
                *a += w * c;
            }
        }
        Point::new(acc).expect("convex combination of finite points")
    }
}

/// `ln(sum_i exp(x_i))` with max-shift; `-inf` for an empty slice.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// An ordered pool of experts with positive prior weights summing to one.
///
/// Raw priors are kept so the pool can renormalize exactly when an expert is
/// activated later; the default prior rule is `q_k` proportional to `2^-k`.
pub struct ExpertPool<P> {
    experts: Vec<Arc<dyn Predictor<P>>>,
    raw_priors: Vec<f64>,
    priors: Vec<f64>,
    log_priors: Vec<f64>,
}

impl<P> ExpertPool<P> {
    pub fn new(experts: Vec<Arc<dyn Predictor<P>>>, raw_priors: Vec<f64>) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::InvalidArgument("expert pool is empty".into()));
        }
        if experts.len() != raw_priors.len() {
            return Err(Error::InvalidArgument(
                "one prior per expert required".into(),
            ));
        }
        if raw_priors.iter().any(|q| !q.is_finite() || *q <= 0.0) {
            return Err(Error::InvalidArgument(
                "priors must be positive and finite".into(),
            ));
        }
        let mut pool = ExpertPool {
            experts,
            raw_priors,
            priors: Vec::new(),
            log_priors: Vec::new(),
        };
        pool.renormalize();
        Ok(pool)
    }

    /// `q_k` proportional to `2^-k` (tail-renormalized).
    pub fn with_dyadic_priors(experts: Vec<Arc<dyn Predictor<P>>>) -> Result<Self> {
        let n = experts.len();
        if n > 1000 {
            return Err(Error::InvalidArgument(
                "dyadic priors underflow beyond 1000 experts".into(),
            ));
        }
        let raw = (0..n).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
        ExpertPool::new(experts, raw)
    }

    pub fn with_uniform_priors(experts: Vec<Arc<dyn Predictor<P>>>) -> Result<Self> {
        let n = experts.len();
        ExpertPool::new(experts, vec![1.0; n])
    }

    fn renormalize(&mut self) {
        let total: f64 = self.raw_priors.iter().sum();
        self.priors = self.raw_priors.iter().map(|q| q / total).collect();
        self.log_priors = self.priors.iter().map(|q| q.ln()).collect();
        debug_assert!((self.priors.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn expert(&self, k: usize) -> &Arc<dyn Predictor<P>> {
        &self.experts[k]
    }

    fn push(&mut self, expert: Arc<dyn Predictor<P>>, raw_prior: f64) -> Result<()> {
        if !raw_prior.is_finite() || raw_prior <= 0.0 {
            return Err(Error::InvalidArgument(
                "priors must be positive and finite".into(),
            ));
        }
        self.experts.push(expert);
        self.raw_priors.push(raw_prior);
        self.renormalize();
        Ok(())
    }
}

/// The weight side of a round, available before the observation: the partial
/// round report.
#[derive(Debug, Clone)]
pub struct RoundStart {
    pub n: usize,
    pub beta: f64,
    /// Normalized weights `p_n^(k)`; positive, summing to one.
    pub weights: Vec<f64>,
}

/// Everything the engine knows once a round completes.
#[derive(Debug, Clone)]
pub struct RoundReport<P> {
    pub n: usize,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub prediction: P,
    pub expert_losses: Vec<f64>,
    pub own_loss: f64,
    pub cum_own_loss: f64,
    /// Weight-mixture of expert losses `sum_k p_n^(k) l_n^(k)`; with a convex
    /// loss the own loss never exceeds it (countable convexity).
    pub mixture_loss: f64,
    pub lemma9_lhs: f64,
    pub lemma9_rhs: f64,
}

/// Result of the regret-bound check for one expert.
#[derive(Debug, Clone, Copy)]
pub struct Lemma5Check {
    pub excess: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Result of the generalized-mean comparison underlying the weight-update
/// induction.
#[derive(Debug, Clone, Copy)]
pub struct MeanComparison {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

struct PendingRound<P> {
    n: usize,
    beta: f64,
    ln_beta: f64,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    expert_predictions: Vec<P>,
    prediction: P,
}

/// One live game of the aggregator. Single-writer: `begin_round` and
/// `end_round` must alternate from one execution context; everything else is
/// read-only.
pub struct WaaState<P: ConvexCombine> {
    pool: ExpertPool<P>,
    loss: LossFunction,
    /// Frozen learning rate for mutation testing; `None` is the real
    /// schedule.
    beta_override: Option<f64>,
    round: usize,
    cumulative_losses: Vec<f64>,
    own_cumulative: f64,
    transcript: Transcript,
    history: Option<History>,
    pending_observation: Option<Point>,
    pending: Option<PendingRound<P>>,
    sum_mixture_loss: f64,
    sum_log_mean: f64,
}

impl<P: ConvexCombine> WaaState<P>
where
    LossFunction: LossOn<P>,
{
    pub fn new(pool: ExpertPool<P>, loss: LossFunction) -> Self {
        let k = pool.len();
        WaaState {
            pool,
            loss,
            beta_override: None,
            round: 0,
            cumulative_losses: vec![0.0; k],
            own_cumulative: 0.0,
            transcript: Transcript::new(),
            history: None,
            pending_observation: None,
            pending: None,
            sum_mixture_loss: 0.0,
            sum_log_mean: 0.0,
        }
    }

    /// Warm start with precomputed cumulative losses (replay activation
    /// across a restart). The per-round inequality audit is only meaningful
    /// on cold starts.
    pub fn with_initial_losses(
        pool: ExpertPool<P>,
        loss: LossFunction,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if initial.len() != pool.len() {
            return Err(Error::InvalidArgument(
                "one initial loss per expert required".into(),
            ));
        }
        let mut s = WaaState::new(pool, loss);
        s.cumulative_losses = initial;
        Ok(s)
    }

    /// Freeze `beta_n` at a constant. Only the mutation harness uses this; it
    /// deliberately breaks the anytime regret guarantee.
    pub fn with_beta_override(mut self, beta: f64) -> Self {
        self.beta_override = Some(beta);
        self
    }

    fn beta_params(&self, n: usize) -> (f64, f64) {
        match self.beta_override {
            Some(b) => (b, b.ln()),
            None => {
                let ln_beta = -1.0 / (n as f64).sqrt();
                (ln_beta.exp(), ln_beta)
            }
        }
    }

    /// Completed rounds `N`.
    pub fn round(&self) -> usize {
        self.round
    }

    /// `L_{N}^(k)` for every expert.
    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative_losses
    }

    /// `L_N`.
    pub fn own_cumulative_loss(&self) -> f64 {
        self.own_cumulative
    }

    pub fn pool(&self) -> &ExpertPool<P> {
        &self.pool
    }

    pub fn loss(&self) -> &LossFunction {
        &self.loss
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Index of the expert with the smallest cumulative loss (lowest index on
    /// ties).
    pub fn best_expert(&self) -> usize {
        let mut best = 0;
        for (k, l) in self.cumulative_losses.iter().enumerate() {
            if *l < self.cumulative_losses[best] {
                best = k;
            }
        }
        best
    }

    /// Start round `n`: compute weights from cumulative losses and announce
    /// the aggregated prediction for the given signal.
    pub fn begin_round(&mut self, signal: Point) -> Result<(P, RoundStart)> {
        if self.pending.is_some() {
            return Err(Error::InvalidState(
                "begin_round called before the previous round completed".into(),
            ));
        }
        if self.pool.is_empty() {
            return Err(Error::InvalidState("expert pool is empty".into()));
        }
        let n = self.round + 1;
        match (&mut self.history, self.pending_observation.take()) {
            (None, _) => self.history = Some(History::start(signal)),
            (Some(h), Some(obs)) => h.advance(obs, signal),
            (Some(_), None) => {
                return Err(Error::InvalidState(
                    "history exists without a pending observation".into(),
                ))
            }
        }
        let history = self.history.as_ref().expect("just set");

        let (beta, ln_beta) = self.beta_params(n);
        let log_w: Vec<f64> = self
            .pool
            .log_priors
            .iter()
            .zip(&self.cumulative_losses)
            .map(|(lq, l)| lq + l * ln_beta)
            .collect();
        let shift = log_sum_exp(&log_w);
        let log_p: Vec<f64> = log_w.iter().map(|w| w - shift).collect();
        // explicit renormalization: exp(log_w - shift) alone drifts from unit
        // mass by ~|log_w| * eps once cumulative losses are large
        let mut p: Vec<f64> = log_p.iter().map(|w| w.exp()).collect();
        let total: f64 = p.iter().sum();
        for v in &mut p {
            *v /= total;
        }

        let expert_predictions: Vec<P> = self
            .pool
            .experts
            .iter()
            .map(|e| e.predict(history))
            .collect();
        let prediction = P::convex_combine(&p, &expert_predictions);

        let start = RoundStart {
            n,
            beta,
            weights: p.clone(),
        };
        self.pending = Some(PendingRound {
            n,
            beta,
            ln_beta,
            weights: p,
            log_weights: log_p,
            expert_predictions,
            prediction: prediction.clone(),
        });
        Ok((prediction, start))
    }

    /// Finish the round with Reality's observation: account losses, extend
    /// the transcript, and report the round including both sides of the
    /// weight-update inequality.
    pub fn end_round(&mut self, observation: Point) -> Result<RoundReport<P>> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidState("end_round without begin_round".into()))?;
        let history = self.history.as_ref().expect("begin_round set history");

        let mut expert_losses = Vec::with_capacity(self.pool.len());
        for pred in &pending.expert_predictions {
            match self.loss.loss_of(pred, &observation) {
                Ok(l) => expert_losses.push(l),
                Err(e) => {
                    // leave the state as if end_round had not been called
                    self.pending = Some(pending);
                    return Err(e);
                }
            }
        }
        let own_loss = match self.loss.loss_of(&pending.prediction, &observation) {
            Ok(l) => l,
            Err(e) => {
                self.pending = Some(pending);
                return Err(e);
            }
        };

        let mixture_loss: f64 = pending
            .weights
            .iter()
            .zip(&expert_losses)
            .map(|(p, l)| p * l)
            .sum();
        // log_{beta_n} of the beta-weighted generalized mean of this round's
        // expert losses, in the log domain
        let terms: Vec<f64> = pending
            .log_weights
            .iter()
            .zip(&expert_losses)
            .map(|(lp, l)| lp + l * pending.ln_beta)
            .collect();
        let log_mean = log_sum_exp(&terms) / pending.ln_beta;

        self.sum_mixture_loss += mixture_loss;
        self.sum_log_mean += log_mean;
        for (acc, l) in self.cumulative_losses.iter_mut().zip(&expert_losses) {
            *acc += l;
        }
        self.own_cumulative += own_loss;
        self.round = pending.n;
        self.transcript
            .push(history.current_signal().clone(), observation.clone());
        self.pending_observation = Some(observation);

        let (lhs, rhs) = self.lemma9_sides();
        Ok(RoundReport {
            n: pending.n,
            beta: pending.beta,
            weights: pending.weights,
            prediction: pending.prediction,
            expert_losses,
            own_loss,
            cum_own_loss: self.own_cumulative,
            mixture_loss,
            lemma9_lhs: lhs,
            lemma9_rhs: rhs,
        })
    }

    fn lemma9_sides(&self) -> (f64, f64) {
        let n = self.round;
        let (_, ln_beta) = self.beta_params(n);
        let terms: Vec<f64> = self
            .pool
            .log_priors
            .iter()
            .zip(&self.cumulative_losses)
            .map(|(lq, l)| lq + l * ln_beta)
            .collect();
        let final_term = log_sum_exp(&terms) / ln_beta;
        (
            self.own_cumulative,
            self.sum_mixture_loss - self.sum_log_mean + final_term,
        )
    }

    /// Both sides of the cumulative weight-update inequality
    /// `L_N <= sum_n sum_k p l - sum_n log_beta(mean) + log_beta(prior mean)`
    /// after `N` completed rounds.
    pub fn lemma9_check(&self) -> Result<(f64, f64, bool)> {
        if self.round == 0 {
            return Err(Error::InvalidState(
                "lemma9_check needs a completed round".into(),
            ));
        }
        let (lhs, rhs) = self.lemma9_sides();
        Ok((lhs, rhs, lhs <= rhs + CHECK_TOL * rhs.abs().max(1.0)))
    }

    /// Regret-bound check against expert `k`:
    /// `L_N - L_N^(k) <= (L^2 e^L + ln(1/q_k)) sqrt(N)` for `L` an upper
    /// bound on `|lambda|` over the run.
    pub fn lemma5_bound(&self, expert: usize, loss_bound: f64) -> Result<Lemma5Check> {
        if expert >= self.pool.len() {
            return Err(Error::InvalidArgument(format!(
                "unknown expert index {expert}"
            )));
        }
        if self.round == 0 {
            // empty game; also dodges inf * sqrt(0) when e^L overflows
            return Ok(Lemma5Check {
                excess: 0.0,
                bound: 0.0,
                holds: true,
            });
        }
        let n = self.round as f64;
        let excess = self.own_cumulative - self.cumulative_losses[expert];
        let l = loss_bound;
        let bound = (l * l * l.exp() + (1.0 / self.pool.priors[expert]).ln()) * n.sqrt();
        Ok(Lemma5Check {
            excess,
            bound,
            holds: excess <= bound + CHECK_TOL * bound.max(1.0),
        })
    }

    /// `(L_N - sum_n lambda(D(sigma_n), y_n)) / N` with the competitor's
    /// losses recomputed by replay over the stored transcript.
    pub fn average_regret(&self, competitor: &dyn Predictor<P>) -> Result<f64> {
        if self.round == 0 {
            return Err(Error::InvalidState("average_regret needs rounds".into()));
        }
        let their = replay_cumulative_loss(competitor, &self.transcript, &self.loss)?;
        Ok((self.own_cumulative - their) / self.round as f64)
    }

    /// Activate a new expert mid-game. Its cumulative loss is reconstructed
    /// exactly by replaying the stored transcript (legal because strategies
    /// are stationary); priors renormalize over the grown pool.
    pub fn activate_expert(
        &mut self,
        expert: Arc<dyn Predictor<P>>,
        raw_prior: f64,
    ) -> Result<usize> {
        if self.pending.is_some() {
            return Err(Error::InvalidState(
                "cannot activate an expert mid-round".into(),
            ));
        }
        let replayed = replay_cumulative_loss(expert.as_ref(), &self.transcript, &self.loss)?;
        self.pool.push(expert, raw_prior)?;
        self.cumulative_losses.push(replayed);
        Ok(self.pool.len() - 1)
    }
}

/// The generalized-mean comparison behind the weight-update induction: the
/// `beta_n`-mean of cumulative losses never exceeds the `beta_{n+1}`-mean,
/// `log_{beta_n} sum_k q_k beta_n^{L^(k)} <= log_{beta_{n+1}} sum_k q_k
/// beta_{n+1}^{L^(k)} + 1e-9`.
pub fn mean_comparison_check(
    priors: &[f64],
    cumulative: &[f64],
    n: usize,
) -> Result<MeanComparison> {
    if n == 0 {
        return Err(Error::InvalidArgument("round index starts at 1".into()));
    }
    if priors.len() != cumulative.len() || priors.is_empty() {
        return Err(Error::InvalidArgument(
            "priors and losses must be equal-length and nonempty".into(),
        ));
    }
    if priors.iter().any(|q| *q <= 0.0 || !q.is_finite()) {
        return Err(Error::InvalidArgument("priors must be positive".into()));
    }
    let side = |m: usize| {
        let ln_beta = -1.0 / (m as f64).sqrt();
        let terms: Vec<f64> = priors
            .iter()
            .zip(cumulative)
            .map(|(q, l)| q.ln() + l * ln_beta)
            .collect();
        log_sum_exp(&terms) / ln_beta
    };
    let lhs = side(n);
    let rhs = side(n + 1);
    Ok(MeanComparison {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}
