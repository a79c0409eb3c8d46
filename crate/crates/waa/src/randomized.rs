//! The randomized game: finite-support probability measures as predictions.
//!
//! The randomized aggregator is the deterministic engine instantiated with
//! prediction type [`DiscreteMeasure`] and the expected loss
//! `lambda(mu, y) = sum_atoms mass * lambda(point, y)`, which is linear (so
//! convex) in the measure. Mixtures of finitely many expert measures over
//! finitely many rounds always have finite support, so nothing beyond
//! finite-support measures is ever needed at runtime.
//!
//! Realized randomized losses are tied back to expected ones by
//! law-of-the-iterated-logarithm monitors over the partial sums
//! `sum_n (lambda(g_n, y_n) - lambda(gamma_n, y_n))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Point;
use crate::engine::ConvexCombine;
use crate::experts::Predictor;
use crate::loss::{LossFunction, LossOn};
use crate::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// A finite-support probability measure on the prediction space, kept in
/// canonical form: support sorted lexicographically, identical points merged,
/// masses strictly positive and summing to one within `1e-12`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct DiscreteMeasure {
    atoms: Vec<(Point, f64)>,
}

/// Wire form of one atom: `{"point": [..], "mass": m}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

impl DiscreteMeasure {
    /// Canonicalize and validate a list of atoms.
    pub fn new(atoms: Vec<(Point, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("measure needs at least one atom".into()));
        }
        let dim = atoms[0].0.dim();
        for (p, m) in &atoms {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if !m.is_finite() || *m <= 0.0 {
                return Err(Error::InvalidArgument(
                    "atom masses must be positive and finite".into(),
                ));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.lex_cmp(&b.0));
        let mut merged: Vec<(Point, f64)> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            match merged.last_mut() {
                Some((q, acc)) if *q == p => *acc += m,
                _ => merged.push((p, m)),
            }
        }
        let total: f64 = merged.iter().map(|(_, m)| m).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "atom masses sum to {total}, not 1"
            )));
        }
        Ok(DiscreteMeasure { atoms: merged })
    }

    /// The measure concentrated at one point.
    pub fn point_mass(point: Point) -> Self {
        DiscreteMeasure {
            atoms: vec![(point, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    /// Inverse-CDF sample over the sorted support from one uniform draw.
    /// Deterministic given the generator state; advances the state by exactly
    /// one draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (p, m) in &self.atoms {
            cum += m;
            if u < cum {
                return p.clone();
            }
        }
        self.atoms.last().expect("measure is nonempty").0.clone()
    }
}

impl TryFrom<Vec<Atom>> for DiscreteMeasure {
    type Error = Error;
    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|a| Ok((Point::new(a.point)?, a.mass)))
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(atoms)
    }
}

impl From<DiscreteMeasure> for Vec<Atom> {
    fn from(m: DiscreteMeasure) -> Vec<Atom> {
        m.atoms
            .into_iter()
            .map(|(p, mass)| Atom {
                point: p.into(),
                mass,
            })
            .collect()
    }
}

/// `sum_atoms mass * lambda(point, y)`: the loss of the randomized game.
pub fn expected_loss(
    loss: &LossFunction,
    measure: &DiscreteMeasure,
    observation: &Point,
) -> Result<f64> {
    let mut total = 0.0;
    for (p, m) in &measure.atoms {
        total += m * loss.eval(p, observation)?;
    }
    Ok(total)
}

impl LossOn<DiscreteMeasure> for LossFunction {
    fn loss_of(&self, prediction: &DiscreteMeasure, observation: &Point) -> Result<f64> {
        expected_loss(self, prediction, observation)
    }
}

/// Weighted mixture of measures: union of supports with scaled masses,
/// canonicalized. Weights must be nonnegative and sum to one within `1e-12`;
/// zero weights (possible after extreme underflow in the aggregator) drop
/// their component.
pub fn mixture_measure(
    weights: &[f64],
    measures: &[DiscreteMeasure],
) -> Result<DiscreteMeasure> {
    if weights.len() != measures.len() {
        return Err(Error::InvalidArgument(
            "one weight per measure required".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidArgument(
            "mixture weights must be nonnegative and sum to 1".into(),
        ));
    }
    let mut atoms = Vec::new();
    for (w, m) in weights.iter().zip(measures) {
        if *w == 0.0 {
            continue;
        }
        for (p, mass) in &m.atoms {
            atoms.push((p.clone(), w * mass));
        }
    }
    DiscreteMeasure::new(atoms)
}

impl ConvexCombine for DiscreteMeasure {
    fn convex_combine(weights: &[f64], items: &[Self]) -> Self {
        mixture_measure(weights, items).expect("aggregator weights form a mixture")
    }
}

/// Lift of a point-valued strategy into the randomized game via point masses.
pub struct Dirac<S>(pub S);

impl<S: Predictor<Point>> Predictor<DiscreteMeasure> for Dirac<S> {
    fn predict(&self, h: &crate::domain::History) -> DiscreteMeasure {
        DiscreteMeasure::point_mass(self.0.predict(h))
    }
}

/// Law-of-the-iterated-logarithm monitor for the gap between realized and
/// expected randomized losses.
///
/// Tracks `S_N = sum_n (lambda(g_n, y_n) - lambda(gamma_n, y_n))`; with
/// `|lambda| <= L` every increment is bounded by `2L`, and the statistic
/// `|S_N| / sqrt(2 L^2 N ln ln N)` has almost-sure limsup at most one.
#[derive(Debug, Clone)]
pub struct LilMonitor {
    partial_sum: f64,
    n: usize,
    loss_bound: f64,
}

/// Smallest round count with `ln ln n > 0`.
pub const LIL_MIN_ROUNDS: usize = 16;

impl LilMonitor {
    pub fn new(loss_bound: f64) -> Result<Self> {
        if !loss_bound.is_finite() || loss_bound <= 0.0 {
            return Err(Error::InvalidArgument(
                "loss bound must be positive and finite".into(),
            ));
        }
        Ok(LilMonitor {
            partial_sum: 0.0,
            n: 0,
            loss_bound,
        })
    }

    /// Record one round's realized and expected loss.
    pub fn record(&mut self, realized: f64, expected: f64) -> Result<()> {
        let increment = realized - expected;
        if increment.abs() > 2.0 * self.loss_bound + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "increment {increment} exceeds twice the loss bound {}",
                self.loss_bound
            )));
        }
        self.partial_sum += increment;
        self.n += 1;
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn partial_sum(&self) -> f64 {
        self.partial_sum
    }

    /// `|S_n| / sqrt(2 L^2 n ln ln n)`; undefined before
    /// [`LIL_MIN_ROUNDS`] rounds (the monitor still accumulates).
    pub fn statistic(&self) -> Result<f64> {
        if self.n < LIL_MIN_ROUNDS {
            return Err(Error::InvalidState(format!(
                "statistic undefined below {LIL_MIN_ROUNDS} rounds (have {})",
                self.n
            )));
        }
        let n = self.n as f64;
        let denom = (2.0 * self.loss_bound * self.loss_bound * n * n.ln().ln()).sqrt();
        Ok(self.partial_sum.abs() / denom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(cs: &[f64]) -> Point {
        Point::new(cs.to_vec()).unwrap()
    }

    fn measure(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            atoms
                .iter()
                .map(|(v, m)| (pt(&[*v]), *m))
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn expected_loss_examples() {
        let m = DiscreteMeasure::point_mass(pt(&[0.5]));
        assert_eq!(
            expected_loss(&LossFunction::SquaredNorm, &m, &pt(&[0.0])).unwrap(),
            0.25
        );
        let m = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(
            expected_loss(&LossFunction::SquaredNorm, &m, &pt(&[0.0])).unwrap(),
            0.5
        );
        let m = measure(&[(0.0, 0.25), (2.0, 0.75)]);
        assert_eq!(
            expected_loss(&LossFunction::AbsoluteNorm, &m, &pt(&[1.0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn canonical_form_merges_and_sorts() {
        let m = DiscreteMeasure::new(vec![
            (pt(&[1.0]), 0.25),
            (pt(&[0.0]), 0.5),
            (pt(&[1.0]), 0.25),
        ])
        .unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.atoms()[0].0, pt(&[0.0]));
        assert_eq!(m.atoms()[1], (pt(&[1.0]), 0.5));
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(DiscreteMeasure::new(vec![(pt(&[0.0]), 0.5)]).is_err());
        assert!(DiscreteMeasure::new(vec![(pt(&[0.0]), -0.5), (pt(&[1.0]), 1.5)]).is_err());
        assert!(DiscreteMeasure::new(vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![(pt(&[0.0]), 1.0), (pt(&[0.0, 1.0]), 0.0)]).is_err());
    }

    #[test]
    fn mixture_examples() {
        let a = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        let same = mixture_measure(&[1.0], std::slice::from_ref(&a)).unwrap();
        assert_eq!(same, a);

        let b = mixture_measure(
            &[0.5, 0.5],
            &[
                DiscreteMeasure::point_mass(pt(&[0.0])),
                DiscreteMeasure::point_mass(pt(&[1.0])),
            ],
        )
        .unwrap();
        assert_eq!(b, measure(&[(0.0, 0.5), (1.0, 0.5)]));

        let c = mixture_measure(&[0.5, 0.5], &[a, DiscreteMeasure::point_mass(pt(&[1.0]))])
            .unwrap();
        assert_eq!(c, measure(&[(0.0, 0.25), (1.0, 0.75)]));
    }

    #[test]
    fn mixture_rejects_mismatch() {
        let a = DiscreteMeasure::point_mass(pt(&[0.0]));
        assert!(mixture_measure(&[0.5, 0.5], std::slice::from_ref(&a)).is_err());
        assert!(mixture_measure(&[0.7], std::slice::from_ref(&a)).is_err());
    }

    #[test]
    fn point_mass_sampling_ignores_seed() {
        let m = DiscreteMeasure::point_mass(pt(&[0.25]));
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(m.sample(&mut rng), pt(&[0.25]));
        }
    }

    #[test]
    fn chacha_streams_are_independent() {
        // the sampling contract: one seed, split into one stream for the
        // aggregator's draws and further streams per competitor
        let m = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        let mut own = ChaCha8Rng::seed_from_u64(42);
        let mut competitor = ChaCha8Rng::seed_from_u64(42);
        competitor.set_stream(1);
        let a: Vec<Point> = (0..64).map(|_| m.sample(&mut own)).collect();
        let b: Vec<Point> = (0..64).map(|_| m.sample(&mut competitor)).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let m = measure(&[(0.0, 0.3), (0.5, 0.4), (1.0, 0.3)]);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| m.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn sampling_frequency_matches_masses() {
        let m = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| m.sample(&mut rng) == pt(&[0.0]))
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn sampling_unbiased_for_expected_loss() {
        let m = measure(&[(0.0, 0.25), (0.5, 0.25), (1.0, 0.5)]);
        let y = pt(&[0.25]);
        let loss = LossFunction::SquaredNorm;
        let expected = expected_loss(&loss, &m, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| loss.eval(&m.sample(&mut rng), &y).unwrap())
            .sum::<f64>()
            / n as f64;
        // L = 1 on this support; 4 L / sqrt(n)
        assert!((mean - expected).abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn continuity_probe_total_variation() {
        // same support, masses perturbed: |E_mu - E_mu'| <= 2 L tv(mu, mu')
        let loss = LossFunction::AbsoluteNorm;
        let y = pt(&[0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            use rand::Rng;
            let m1: f64 = rng.gen_range(0.05..0.95);
            let d: f64 = rng.gen_range(-0.04..0.04);
            let a = measure(&[(0.0, m1), (2.0, 1.0 - m1)]);
            let b = measure(&[(0.0, m1 + d), (2.0, 1.0 - m1 - d)]);
            let tv = d.abs(); // half the l1 distance between mass vectors
            let l = 2.0; // |lambda| <= 2 on this support against y
            let diff = (expected_loss(&loss, &a, &y).unwrap()
                - expected_loss(&loss, &b, &y).unwrap())
            .abs();
            assert!(diff <= 2.0 * l * tv + 1e-12);
        }
    }

    #[test]
    fn lil_monitor_unit_case() {
        let mut m = LilMonitor::new(1.0).unwrap();
        assert!(m.statistic().is_err());
        let target = 5.712_530_621_119_089; // sqrt(2 * 16 * ln ln 16)
        for _ in 0..16 {
            m.record(target / 16.0, 0.0).unwrap();
        }
        assert!((m.statistic().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lil_monitor_zero_sum() {
        let mut m = LilMonitor::new(1.0).unwrap();
        for _ in 0..100 {
            m.record(0.7, 0.7).unwrap();
        }
        assert_eq!(m.statistic().unwrap(), 0.0);
    }

    #[test]
    fn lil_monitor_rejects_oversized_increment() {
        let mut m = LilMonitor::new(1.0).unwrap();
        assert!(m.record(2.5, 0.0).is_err());
        assert!(m.record(1.9, 0.0).is_ok());
    }

    #[test]
    fn measure_json_round_trip() {
        let m = measure(&[(0.0, 0.25), (1.5, 0.75)]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"[{"point":[0.0],"mass":0.25},{"point":[1.5],"mass":0.75}]"#);
        let back: DiscreteMeasure = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        // non-canonical input is canonicalized on parse
        let back: DiscreteMeasure = serde_json::from_str(
            r#"[{"point":[1.5],"mass":0.5},{"point":[0.0],"mass":0.25},{"point":[1.5],"mass":0.25}]"#,
        )
        .unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"[{"point":[0.0],"mass":0.5}]"#).is_err());
    }

    proptest! {
        /// Canonicalization is idempotent: rebuilding from the atoms of a
        /// canonical measure reproduces it exactly.
        #[test]
        fn canonicalization_idempotent(
            raw in proptest::collection::vec((-4i32..4, 1u32..20), 1..8),
        ) {
            let total: f64 = raw.iter().map(|(_, m)| *m as f64).sum();
            let atoms: Vec<(Point, f64)> = raw
                .iter()
                .map(|(v, m)| (pt(&[*v as f64 / 2.0]), *m as f64 / total))
                .collect();
            prop_assume!((atoms.iter().map(|(_, m)| m).sum::<f64>() - 1.0).abs() <= 1e-12);
            let m1 = DiscreteMeasure::new(atoms).unwrap();
            let m2 = DiscreteMeasure::new(m1.atoms().to_vec()).unwrap();
            prop_assert_eq!(m1, m2);
        }

        /// Expected loss is linear in the measure.
        #[test]
        fn expected_loss_linear_in_mixture(
            w0 in 0.01f64..0.99,
            vals in proptest::collection::vec(-2.0f64..2.0, 4),
            y in -2.0f64..2.0,
        ) {
            let a = measure(&[(vals[0], 0.5), (vals[1], 0.5)]);
            let b = measure(&[(vals[2], 0.25), (vals[3], 0.75)]);
            let w = [w0, 1.0 - w0];
            let mix = mixture_measure(&w, &[a.clone(), b.clone()]).unwrap();
            let y = pt(&[y]);
            for loss in [LossFunction::SquaredNorm, LossFunction::AbsoluteNorm] {
                let lhs = expected_loss(&loss, &mix, &y).unwrap();
                let rhs = w[0] * expected_loss(&loss, &a, &y).unwrap()
                    + w[1] * expected_loss(&loss, &b, &y).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }
    }
}
