//! Enumerable families of stationary prediction strategies and the expert
//! pools built from them.
//!
//! A stationary strategy is a pure function of the history's content: it may
//! read a bounded suffix (the last `m` signal/observation pairs plus the
//! current signal) but never the round index. The enumeration is a diagonal
//! over (family, memory depth, dyadic grid level) so that every grid strategy
//! of every family is reached at some index, deterministically.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{History, Point, Transcript};
use crate::loss::{LossFunction, LossOn};
use crate::{Error, Result};

/// A prediction strategy producing predictions of type `P` (points in the
/// deterministic game, finite-support measures in the randomized game).
pub trait Predictor<P>: Send + Sync {
    fn predict(&self, h: &History) -> P;
}

impl<P, T: Predictor<P> + ?Sized> Predictor<P> for Arc<T> {
    fn predict(&self, h: &History) -> P {
        (**self).predict(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Linear,
    NearestCentroid,
}

/// Space dimensions a strategy was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDims {
    pub d_x: usize,
    pub d_y: usize,
    pub d_gamma: usize,
}

/// One concrete stationary strategy.
///
/// Parameter layout by family:
/// - `Constant`: the predicted point, `d_gamma` coordinates; `memory_depth`
///   is 0.
/// - `Linear`: for each output coordinate a row
///   `[bias, coeffs on y_{n-1} .. y_{n-m} (most recent first), coeffs on x_n]`,
///   rows concatenated. Entries missing from the realized prefix read as
///   zero, matching the uninformative sentinel past.
/// - `NearestCentroid`: `centroid_count` points of `d_x` (= `d_gamma`)
///   coordinates each; the prediction is the centroid closest to the current
///   signal, ties resolved toward the lowest index; `memory_depth` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryStrategy {
    pub family: Family,
    pub memory_depth: usize,
    pub params: Vec<f64>,
    pub dims: SpaceDims,
}

impl StationaryStrategy {
    pub fn constant(point: Point, dims: SpaceDims) -> Self {
        StationaryStrategy {
            family: Family::Constant,
            memory_depth: 0,
            params: point.coords().to_vec(),
            dims,
        }
    }

    pub fn linear(memory_depth: usize, params: Vec<f64>, dims: SpaceDims) -> Result<Self> {
        let row = 1 + memory_depth * dims.d_y + dims.d_x;
        if params.len() != row * dims.d_gamma {
            return Err(Error::InvalidArgument(format!(
                "linear strategy wants {} params, got {}",
                row * dims.d_gamma,
                params.len()
            )));
        }
        Ok(StationaryStrategy {
            family: Family::Linear,
            memory_depth,
            params,
            dims,
        })
    }

    pub fn nearest_centroid(centroids: Vec<Point>, dims: SpaceDims) -> Result<Self> {
        if dims.d_x != dims.d_gamma {
            return Err(Error::InvalidArgument(
                "nearest-centroid strategies need d_x == d_gamma".into(),
            ));
        }
        if centroids.is_empty() {
            return Err(Error::InvalidArgument("no centroids".into()));
        }
        let mut params = Vec::with_capacity(centroids.len() * dims.d_x);
        for c in &centroids {
            if c.dim() != dims.d_x {
                return Err(Error::DimensionMismatch {
                    expected: dims.d_x,
                    got: c.dim(),
                });
            }
            params.extend_from_slice(c.coords());
        }
        Ok(StationaryStrategy {
            family: Family::NearestCentroid,
            memory_depth: 0,
            params,
            dims,
        })
    }
}

impl Predictor<Point> for StationaryStrategy {
    fn predict(&self, h: &History) -> Point {
        match self.family {
            Family::Constant => Point::new(self.params.clone()).expect("finite params"),
            Family::Linear => {
                let m = self.memory_depth;
                let row = 1 + m * self.dims.d_y + self.dims.d_x;
                let recent = h.last_pairs(m);
                let mut out = Vec::with_capacity(self.dims.d_gamma);
                for j in 0..self.dims.d_gamma {
                    let coeffs = &self.params[j * row..(j + 1) * row];
                    let mut acc = coeffs[0];
                    // observations, most recent first; prepast reads as zero
                    for back in 0..m {
                        if back < recent.len() {
                            let (_, y) = &recent[recent.len() - 1 - back];
                            for (c, v) in coeffs[1 + back * self.dims.d_y..]
                                .iter()
                                .zip(y.coords())
                            {
                                acc += c * v;
                            }
                        }
                    }
                    let sig_coeffs = &coeffs[1 + m * self.dims.d_y..];
                    for (c, v) in sig_coeffs.iter().zip(h.current_signal().coords()) {
                        acc += c * v;
                    }
                    out.push(acc);
                }
                Point::new(out).expect("finite params and history")
            }
            Family::NearestCentroid => {
                let d = self.dims.d_x;
                let mut best = 0;
                let mut best_dist = f64::INFINITY;
                for (i, c) in self.params.chunks_exact(d).enumerate() {
                    let dist: f64 = c
                        .iter()
                        .zip(h.current_signal().coords())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if dist < best_dist {
                        best = i;
                        best_dist = dist;
                    }
                }
                Point::new(self.params[best * d..(best + 1) * d].to_vec()).expect("finite")
            }
        }
    }
}

/// Grid/memory configuration for one strategy family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: Family,
    /// Inclusive span of every grid coordinate.
    pub coeff_range: (f64, f64),
    /// Cap on the dyadic grid level; `None` enumerates ever finer grids.
    #[serde(default)]
    pub max_level: Option<u32>,
    /// Inclusive memory-depth range; only the linear family reads it.
    #[serde(default)]
    pub memory_range: (usize, usize),
    /// Number of centroids; only the nearest-centroid family reads it.
    #[serde(default = "default_centroids")]
    pub centroid_count: usize,
}

fn default_centroids() -> usize {
    2
}

impl FamilyConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.coeff_range;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Config("bad coeff_range".into()));
        }
        if self.memory_range.0 > self.memory_range.1 {
            return Err(Error::Config("bad memory_range".into()));
        }
        if self.family == Family::NearestCentroid && self.centroid_count == 0 {
            return Err(Error::Config("centroid_count must be positive".into()));
        }
        Ok(())
    }

    fn memory_range_for_family(&self) -> (usize, usize) {
        match self.family {
            Family::Linear => self.memory_range,
            // constant and nearest-centroid read nothing but the signal
            _ => (0, 0),
        }
    }
}

/// Full enumeration configuration: the countable strategy family standing in
/// for a dense strategy sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumConfig {
    pub dims: SpaceDims,
    pub families: Vec<FamilyConfig>,
}

impl EnumConfig {
    /// Constants plus memory-1 linear strategies on the unit grid; enough for
    /// the built-in experiments.
    pub fn default_for_dims(d_x: usize, d_y: usize, d_gamma: usize) -> Self {
        let dims = SpaceDims { d_x, d_y, d_gamma };
        EnumConfig {
            dims,
            families: vec![
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
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.d_x == 0 || self.dims.d_y == 0 || self.dims.d_gamma == 0 {
            return Err(Error::Config("space dimensions must be positive".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("no strategy families configured".into()));
        }
        for f in &self.families {
            f.validate()?;
            if f.family == Family::NearestCentroid && self.dims.d_x != self.dims.d_gamma {
                return Err(Error::Config(
                    "nearest-centroid family needs d_x == d_gamma".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Dyadic grid values `j / 2^level` inside `[lo, hi]`.
fn grid_values(range: (f64, f64), level: u32) -> Vec<f64> {
    let scale = (1u64 << level) as f64;
    let j_lo = (range.0 * scale).ceil() as i64;
    let j_hi = (range.1 * scale).floor() as i64;
    (j_lo..=j_hi).map(|j| j as f64 / scale).collect()
}

/// Values new at `level`: odd numerators (level 0 keeps everything).
fn is_new_at_level(value: f64, level: u32) -> bool {
    if level == 0 {
        return true;
    }
    let j = (value * (1u64 << level) as f64).round() as i64;
    j % 2 != 0
}

/// All `dim`-tuples over `cumulative` containing at least one value that is
/// new at `level`, ordered by (L1 norm, lexicographic). The ordering puts the
/// grid origin first at level 0.
fn cell_tuples(dim: usize, cumulative: &[f64], level: u32) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut buf = vec![0.0; dim];
    fn rec(
        out: &mut Vec<Vec<f64>>,
        buf: &mut Vec<f64>,
        pos: usize,
        cumulative: &[f64],
        level: u32,
        any_new: bool,
    ) {
        if pos == buf.len() {
            if any_new {
                out.push(buf.clone());
            }
            return;
        }
        for &v in cumulative {
            buf[pos] = v;
            rec(
                out,
                buf,
                pos + 1,
                cumulative,
                level,
                any_new || is_new_at_level(v, level),
            );
        }
    }
    rec(&mut out, &mut buf, 0, cumulative, level, level == 0);
    out.sort_by(|a, b| {
        let la: f64 = a.iter().map(|v| v.abs()).sum();
        let lb: f64 = b.iter().map(|v| v.abs()).sum();
        la.total_cmp(&lb).then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| !o.is_eq())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    out
}

fn param_dim(cfg: &FamilyConfig, dims: &SpaceDims, m: usize) -> usize {
    match cfg.family {
        Family::Constant => dims.d_gamma,
        Family::Linear => dims.d_gamma * (1 + m * dims.d_y + dims.d_x),
        Family::NearestCentroid => cfg.centroid_count * dims.d_x,
    }
}

fn build_strategy(
    cfg: &FamilyConfig,
    dims: SpaceDims,
    m: usize,
    params: Vec<f64>,
) -> StationaryStrategy {
    StationaryStrategy {
        family: cfg.family,
        memory_depth: if cfg.family == Family::Linear { m } else { 0 },
        params,
        dims,
    }
}

/// Deterministic diagonal enumeration of the configured families.
///
/// Cells `(family index, memory depth, grid level)` are visited in order of
/// their diagonal weight `family_index + (m - m_min) + level`; within a cell
/// the parameter tuples new at that level are emitted in (L1, lexicographic)
/// order. The same configuration therefore always reproduces the same
/// sequence, bit for bit.
pub struct StrategyEnumerator {
    config: EnumConfig,
    weight: u32,
    queue: std::collections::VecDeque<StationaryStrategy>,
    exhausted_weight: Option<u32>,
}

impl StrategyEnumerator {
    pub fn new(config: EnumConfig) -> Result<Self> {
        config.validate()?;
        // with every family level-capped the enumeration is finite
        let exhausted_weight = config
            .families
            .iter()
            .enumerate()
            .map(|(f, c)| {
                c.max_level.map(|cap| {
                    let (m_lo, m_hi) = c.memory_range_for_family();
                    f as u32 + (m_hi - m_lo) as u32 + cap
                })
            })
            .try_fold(0u32, |acc, w| w.map(|w| acc.max(w)));
        Ok(StrategyEnumerator {
            config,
            weight: 0,
            queue: std::collections::VecDeque::new(),
            exhausted_weight,
        })
    }

    fn fill_weight(&mut self) {
        let t = self.weight;
        for (f_idx, fam) in self.config.families.iter().enumerate() {
            let f_idx = f_idx as u32;
            if f_idx > t {
                break;
            }
            let (m_lo, m_hi) = fam.memory_range_for_family();
            for m in m_lo..=m_hi {
                let m_off = (m - m_lo) as u32;
                if f_idx + m_off > t {
                    break;
                }
                let level = t - f_idx - m_off;
                if fam.max_level.is_some_and(|cap| level > cap) {
                    continue;
                }
                let cumulative = grid_values(fam.coeff_range, level);
                if cumulative.is_empty() {
                    continue;
                }
                let dim = param_dim(fam, &self.config.dims, m);
                for params in cell_tuples(dim, &cumulative, level) {
                    self.queue
                        .push_back(build_strategy(fam, self.config.dims, m, params));
                }
            }
        }
    }
}

impl Iterator for StrategyEnumerator {
    type Item = StationaryStrategy;

    fn next(&mut self) -> Option<StationaryStrategy> {
        loop {
            if let Some(s) = self.queue.pop_front() {
                return Some(s);
            }
            if let Some(max_w) = self.exhausted_weight {
                if self.weight > max_w {
                    return None;
                }
            }
            self.fill_weight();
            self.weight += 1;
        }
    }
}

/// The strategy at 1-based `index` of the enumeration.
pub fn enumerate_strategy(config: &EnumConfig, index: usize) -> Result<StationaryStrategy> {
    if index == 0 {
        return Err(Error::InvalidArgument("enumeration index starts at 1".into()));
    }
    StrategyEnumerator::new(config.clone())?
        .nth(index - 1)
        .ok_or_else(|| Error::InvalidArgument(format!("enumeration exhausted before {index}")))
}

/// The first `n` strategies of the enumeration.
pub fn enumerate_first(config: &EnumConfig, n: usize) -> Result<Vec<StationaryStrategy>> {
    let out: Vec<_> = StrategyEnumerator::new(config.clone())?.take(n).collect();
    if out.len() < n {
        return Err(Error::InvalidArgument(format!(
            "enumeration exhausted at {} strategies, wanted {n}",
            out.len()
        )));
    }
    Ok(out)
}

/// Cumulative loss of a strategy replayed over a finished transcript:
/// `sum_n lambda(D(sigma_n), y_n)` in round order. Strategies are pure, so
/// the result reproduces a live-tracked run exactly.
pub fn replay_cumulative_loss<P>(
    strategy: &dyn Predictor<P>,
    transcript: &Transcript,
    loss: &LossFunction,
) -> Result<f64>
where
    LossFunction: LossOn<P>,
{
    let mut total = 0.0;
    let mut err = None;
    transcript.replay(|h, y| {
        if err.is_some() {
            return;
        }
        match loss.loss_of(&strategy.predict(h), y) {
            Ok(l) => total += l,
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}
