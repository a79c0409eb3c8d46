//! Domain vocabulary shared by every other module: points of the signal,
//! prediction, and observation spaces, game histories, and closed balls
//! standing in for compact sets.
//!
//! All types here are immutable values and safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of one of the Euclidean spaces in play (signal space `X`,
/// prediction space `Gamma`, observation space `Y`).
///
/// Coordinates are always finite; constructors reject NaN and infinities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "point coordinates must be finite".into(),
            ));
        }
        Ok(Point { coords })
    }

    pub fn zero(dim: usize) -> Self {
        Point {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance to `other`. Panics are avoided by taking the
    /// shorter dimension; callers validate dimensions at the API boundary.
    pub fn euclidean_distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Max-norm (Chebyshev) distance to `other`.
    pub fn max_distance(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Lexicographic order on coordinates. Total because coordinates are
    /// finite by construction.
    pub fn lex_cmp(&self, other: &Point) -> std::cmp::Ordering {
        for (a, b) in self.coords.iter().zip(&other.coords) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.coords.len().cmp(&other.coords.len())
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords
    }
}

/// Which norm a [`CompactBall`] is measured in.
///
/// Balls over the prediction and observation spaces use the Euclidean norm;
/// the removal game's growing boxes over `X x Y` are max-norm balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Euclidean,
    Max,
}

/// A closed ball: the only compact-set representation the engine needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactBall {
    center: Point,
    radius: f64,
    norm: Norm,
}

impl CompactBall {
    pub fn new(center: Point, radius: f64, norm: Norm) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::InvalidArgument(
                "ball radius must be finite and nonnegative".into(),
            ));
        }
        Ok(CompactBall {
            center,
            radius,
            norm,
        })
    }

    pub fn euclidean(center: Point, radius: f64) -> Result<Self> {
        CompactBall::new(center, radius, Norm::Euclidean)
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn distance_to_center(&self, p: &Point) -> f64 {
        match self.norm {
            Norm::Euclidean => self.center.euclidean_distance(p),
            Norm::Max => self.center.max_distance(p),
        }
    }

    /// Closed membership test: distance to center at most the radius.
    pub fn contains(&self, p: &Point) -> bool {
        self.distance_to_center(p) <= self.radius
    }

    /// Smallest Euclidean ball containing this ball. A max-norm ball of
    /// radius `r` in dimension `d` fits inside the Euclidean ball of radius
    /// `r * sqrt(d)` around the same center.
    pub fn euclidean_enclosure(&self) -> CompactBall {
        match self.norm {
            Norm::Euclidean => self.clone(),
            Norm::Max => CompactBall {
                center: self.center.clone(),
                radius: self.radius * (self.center.dim() as f64).sqrt(),
                norm: Norm::Euclidean,
            },
        }
    }

    /// Same ball with the radius grown to at least `radius`.
    pub fn with_radius_at_least(&self, radius: f64) -> CompactBall {
        CompactBall {
            center: self.center.clone(),
            radius: self.radius.max(radius),
            norm: self.norm,
        }
    }
}

/// The history visible to a strategy on round `n`: the realized prefix
/// `(x_1, y_1, ..., x_{n-1}, y_{n-1})` plus the current signal `x_n`.
///
/// The infinite past of the prediction protocol is the "no feedback"
/// sentinel; it carries no information and is represented by the `prepast`
/// flag rather than materialized. Strategies that read beyond the realized
/// prefix see zero vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pairs: Vec<(Point, Point)>,
    current_signal: Point,
    prepast: bool,
}

impl History {
    /// Round-1 history: empty realized prefix over the sentinel prepast.
    pub fn start(signal: Point) -> Self {
        History {
            pairs: Vec::new(),
            current_signal: signal,
            prepast: true,
        }
    }

    /// Completed (signal, observation) pairs for rounds `1..n-1`.
    pub fn pairs(&self) -> &[(Point, Point)] {
        &self.pairs
    }

    pub fn current_signal(&self) -> &Point {
        &self.current_signal
    }

    /// True when everything before `pairs` is the sentinel past.
    pub fn prepast(&self) -> bool {
        self.prepast
    }

    /// The round this history belongs to.
    pub fn round(&self) -> usize {
        self.pairs.len() + 1
    }

    /// Up to the last `m` completed pairs, most recent last.
    pub fn last_pairs(&self, m: usize) -> &[(Point, Point)] {
        let start = self.pairs.len().saturating_sub(m);
        &self.pairs[start..]
    }

    /// Pure extension: the round-`n+1` history after observing `observation`
    /// and receiving `next_signal`. `self` is unchanged.
    pub fn extended(&self, observation: Point, next_signal: Point) -> Result<History> {
        if let Some((_, y)) = self.pairs.first() {
            observation.check_dim(y.dim())?;
        }
        next_signal.check_dim(self.current_signal.dim())?;
        let mut out = self.clone();
        out.advance(observation, next_signal);
        Ok(out)
    }

    /// In-place extension used on the engine's hot path; same result as
    /// [`History::extended`] without the clone.
    pub(crate) fn advance(&mut self, observation: Point, next_signal: Point) {
        let signal = std::mem::replace(&mut self.current_signal, next_signal);
        self.pairs.push((signal, observation));
    }
}

/// The completed rounds of one game: `(x_n, y_n)` in order. Histories are
/// reconstructed on demand so replay never stores quadratic state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    rounds: Vec<(Point, Point)>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[(Point, Point)] {
        &self.rounds
    }

    pub fn push(&mut self, signal: Point, observation: Point) {
        self.rounds.push((signal, observation));
    }

    /// Visits `(sigma_n, y_n)` for every completed round, building each
    /// history incrementally.
    pub fn replay<F: FnMut(&History, &Point)>(&self, mut f: F) {
        let mut iter = self.rounds.iter();
        let Some((x1, y1)) = iter.next() else {
            return;
        };
        let mut h = History::start(x1.clone());
        f(&h, y1);
        let mut prev_obs = y1;
        for (x, y) in iter {
            h.advance(prev_obs.clone(), x.clone());
            f(&h, y);
            prev_obs = y;
        }
    }

    /// Concatenation of two transcripts (used by replay-activation tests).
    pub fn concat(&self, tail: &Transcript) -> Transcript {
        let mut rounds = self.rounds.clone();
        rounds.extend(tail.rounds.iter().cloned());
        Transcript { rounds }
    }
}
