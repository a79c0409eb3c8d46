//! Loss functions `lambda(gamma, y)` with the two oracles the unbounded-domain
//! machinery needs: a closed-form bound over a pair of balls, and a sublevel
//! compact outside of which the loss exceeds a threshold ("large at
//! infinity").

use std::sync::Arc;

use crate::domain::{CompactBall, Norm, Point};
use crate::{Error, Result};

/// A custom loss supplied by the caller. The engine never tries to maximize
/// an opaque loss numerically, so the bound and sublevel oracles are the
/// caller's responsibility; operations that need a missing oracle fail with
/// [`Error::Unsupported`].
pub type LossEvalFn = Box<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
pub type LossBoundFn = Box<dyn Fn(&CompactBall, &CompactBall) -> f64 + Send + Sync>;
pub type SublevelFn = Box<dyn Fn(&CompactBall, f64) -> CompactBall + Send + Sync>;

pub struct CustomLoss {
    pub eval: LossEvalFn,
    pub bound_on: Option<LossBoundFn>,
    pub sublevel: Option<SublevelFn>,
    pub convex_in_prediction: bool,
}

impl std::fmt::Debug for CustomLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomLoss")
            .field("bound_on", &self.bound_on.is_some())
            .field("sublevel", &self.sublevel.is_some())
            .field("convex_in_prediction", &self.convex_in_prediction)
            .finish()
    }
}

/// The loss function of a game of prediction.
///
/// The two built-in kinds are the Euclidean norm and its square; both are
/// convex in the prediction and large at infinity. Evaluation is
/// deterministic: equal inputs give bit-equal outputs.
#[derive(Debug, Clone)]
pub enum LossFunction {
    SquaredNorm,
    AbsoluteNorm,
    Custom(Arc<CustomLoss>),
}

impl LossFunction {
    /// Name used in config files.
    pub fn kind_name(&self) -> &'static str {
        match self {
            LossFunction::SquaredNorm => "squared_norm",
            LossFunction::AbsoluteNorm => "absolute_norm",
            LossFunction::Custom(_) => "custom",
        }
    }

    pub fn from_kind_name(name: &str) -> Result<Self> {
        match name {
            "squared_norm" => Ok(LossFunction::SquaredNorm),
            "absolute_norm" => Ok(LossFunction::AbsoluteNorm),
            other => Err(Error::Config(format!("unknown loss kind {other:?}"))),
        }
    }

    pub fn convex_in_prediction(&self) -> bool {
        match self {
            LossFunction::SquaredNorm | LossFunction::AbsoluteNorm => true,
            LossFunction::Custom(c) => c.convex_in_prediction,
        }
    }

    /// `lambda(gamma, y)`.
    pub fn eval(&self, prediction: &Point, observation: &Point) -> Result<f64> {
        observation.check_dim(prediction.dim())?;
        Ok(match self {
            LossFunction::SquaredNorm => {
                let d = observation.euclidean_distance(prediction);
                d * d
            }
            LossFunction::AbsoluteNorm => observation.euclidean_distance(prediction),
            LossFunction::Custom(c) => (c.eval)(prediction, observation),
        })
    }

    /// An upper bound `L` on `|lambda|` over `gamma_region x obs_region`.
    ///
    /// For the built-in norms the farthest pair of points is at distance
    /// `r_gamma + r_y + |c_gamma - c_y|`, so the bound is that distance to the
    /// first or second power.
    pub fn bound_on(&self, gamma_region: &CompactBall, obs_region: &CompactBall) -> Result<f64> {
        if let LossFunction::Custom(c) = self {
            let f = c.bound_on.as_ref().ok_or_else(|| {
                Error::Unsupported("custom loss has no bound oracle".into())
            })?;
            return Ok(f(gamma_region, obs_region));
        }
        require_euclidean(gamma_region)?;
        require_euclidean(obs_region)?;
        obs_region.center().check_dim(gamma_region.center().dim())?;
        let reach = gamma_region.radius()
            + obs_region.radius()
            + gamma_region.center().euclidean_distance(obs_region.center());
        Ok(match self {
            LossFunction::SquaredNorm => reach * reach,
            LossFunction::AbsoluteNorm => reach,
            LossFunction::Custom(_) => unreachable!(),
        })
    }

    /// A compact `C` with `lambda(gamma, y) > threshold` for every `gamma`
    /// outside `C` and every `y` in `obs_region` — the constructive form of
    /// "large at infinity".
    pub fn sublevel_compact(
        &self,
        obs_region: &CompactBall,
        threshold: f64,
    ) -> Result<CompactBall> {
        if let LossFunction::Custom(c) = self {
            let f = c.sublevel.as_ref().ok_or_else(|| {
                Error::Unsupported("custom loss has no sublevel oracle".into())
            })?;
            return Ok(f(obs_region, threshold));
        }
        require_euclidean(obs_region)?;
        // Reverse triangle inequality: |gamma - y| >= |gamma - c_y| - r_y.
        let extra = match self {
            LossFunction::AbsoluteNorm => threshold.max(0.0),
            LossFunction::SquaredNorm => threshold.max(0.0).sqrt(),
            LossFunction::Custom(_) => unreachable!(),
        };
        CompactBall::euclidean(obs_region.center().clone(), obs_region.radius() + extra)
    }
}

fn require_euclidean(ball: &CompactBall) -> Result<()> {
    if ball.norm() != Norm::Euclidean {
        return Err(Error::InvalidArgument(
            "built-in loss oracles expect Euclidean balls".into(),
        ));
    }
    Ok(())
}

/// Losses evaluated on a prediction type `P`: plain points for the
/// deterministic game, finite-support measures (via expected loss) for the
/// randomized game. The aggregator is generic over this.
pub trait LossOn<P> {
    fn loss_of(&self, prediction: &P, observation: &Point) -> Result<f64>;
}

impl LossOn<Point> for LossFunction {
    fn loss_of(&self, prediction: &Point, observation: &Point) -> Result<f64> {
        self.eval(prediction, observation)
    }
}
