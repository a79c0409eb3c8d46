//! Reality's side of the protocol: seeded observation generators, including a
//! worst-case adversary that maximizes the announced prediction's loss over
//! the extreme points of a ball.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EnvironmentSpec;
use crate::domain::{CompactBall, Point};
use crate::loss::LossFunction;
use crate::{Error, Result};

/// A sequential environment. `next_signal` announces `x_n`; after the
/// prediction is announced, `next_observation` produces `y_n`, optionally
/// consulting the loss the current prediction would suffer at a candidate
/// observation (only the adversarial kind does).
pub trait Environment: Send {
    fn next_signal(&mut self) -> Point;
    fn next_observation(
        &mut self,
        prediction_loss: &dyn Fn(&Point) -> Result<f64>,
    ) -> Result<Point>;
}

/// Standard normal draw via Box-Muller; two uniforms per draw, fully
/// determined by the generator state.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

struct IidGaussian {
    mean: Vec<f64>,
    sd: f64,
    d_x: usize,
    signal_rng: ChaCha8Rng,
    obs_rng: ChaCha8Rng,
}

impl Environment for IidGaussian {
    fn next_signal(&mut self) -> Point {
        let coords = (0..self.d_x)
            .map(|_| standard_normal(&mut self.signal_rng))
            .collect();
        Point::new(coords).expect("normal draws are finite")
    }

    fn next_observation(
        &mut self,
        _prediction_loss: &dyn Fn(&Point) -> Result<f64>,
    ) -> Result<Point> {
        let coords = self
            .mean
            .iter()
            .map(|m| m + self.sd * standard_normal(&mut self.obs_rng))
            .collect();
        Point::new(coords)
    }
}

struct Ar1 {
    a: f64,
    c: f64,
    sd: f64,
    prev: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Environment for Ar1 {
    fn next_signal(&mut self) -> Point {
        // the signal is the previous observation (zero before round 1)
        Point::new(self.prev.clone()).expect("finite state")
    }

    fn next_observation(
        &mut self,
        _prediction_loss: &dyn Fn(&Point) -> Result<f64>,
    ) -> Result<Point> {
        let next: Vec<f64> = self
            .prev
            .iter()
            .map(|p| self.a * p + self.c + self.sd * standard_normal(&mut self.rng))
            .collect();
        self.prev = next.clone();
        Point::new(next)
    }
}

struct DriftingSine {
    amplitude: f64,
    period: f64,
    sd: f64,
    d_x: usize,
    d_y: usize,
    n: usize,
    rng: ChaCha8Rng,
}

impl DriftingSine {
    fn phase(&self) -> f64 {
        (std::f64::consts::TAU * (self.n as f64) / self.period).sin()
    }
}

impl Environment for DriftingSine {
    fn next_signal(&mut self) -> Point {
        self.n += 1;
        Point::new(vec![self.phase(); self.d_x]).expect("finite")
    }

    fn next_observation(
        &mut self,
        _prediction_loss: &dyn Fn(&Point) -> Result<f64>,
    ) -> Result<Point> {
        let s = self.phase();
        let coords = (0..self.d_y)
            .map(|_| self.amplitude * s + self.sd * standard_normal(&mut self.rng))
            .collect();
        Point::new(coords)
    }
}

struct Adversarial {
    bounds: CompactBall,
    d_x: usize,
}

impl Environment for Adversarial {
    fn next_signal(&mut self) -> Point {
        Point::zero(self.d_x)
    }

    fn next_observation(
        &mut self,
        prediction_loss: &dyn Fn(&Point) -> Result<f64>,
    ) -> Result<Point> {
        worst_extreme(&self.bounds, prediction_loss)
    }
}

struct Escaping {
    base: f64,
    growth: f64,
    d_x: usize,
    d_y: usize,
    n: u32,
}

impl Environment for Escaping {
    fn next_signal(&mut self) -> Point {
        Point::zero(self.d_x)
    }

    fn next_observation(
        &mut self,
        _prediction_loss: &dyn Fn(&Point) -> Result<f64>,
    ) -> Result<Point> {
        let mut coords = vec![0.0; self.d_y];
        coords[0] = self.base * self.growth.powi(self.n as i32);
        if !coords[0].is_finite() {
            return Err(Error::InvalidState(
                "escaping environment overflowed; shorten the horizon".into(),
            ));
        }
        self.n += 1;
        Point::new(coords)
    }
}

/// The extreme-point candidates of a ball: `center +- radius * e_i`,
/// in lexicographic order.
fn extreme_candidates(bounds: &CompactBall) -> Vec<Point> {
    let c = bounds.center().coords();
    let r = bounds.radius();
    let mut out = Vec::with_capacity(2 * c.len());
    for i in 0..c.len() {
        for sign in [-1.0, 1.0] {
            let mut coords = c.to_vec();
            coords[i] += sign * r;
            out.push(Point::new(coords).expect("finite"));
        }
    }
    out.sort_by(|a, b| a.lex_cmp(b));
    out.dedup();
    out
}

fn worst_extreme(
    bounds: &CompactBall,
    prediction_loss: &dyn Fn(&Point) -> Result<f64>,
) -> Result<Point> {
    let mut best: Option<(Point, f64)> = None;
    for cand in extreme_candidates(bounds) {
        let l = prediction_loss(&cand)?;
        match &best {
            // strict improvement only: ties stay with the lexicographically
            // smallest candidate
            Some((_, bl)) if l <= *bl => {}
            _ => best = Some((cand, l)),
        }
    }
    best.map(|(p, _)| p)
        .ok_or_else(|| Error::InvalidArgument("no extreme candidates".into()))
}

/// Worst extreme point of `bounds` against a fixed prediction:
/// `argmax_y lambda(prediction, y)` over the candidate set, ties toward the
/// lexicographically smallest.
pub fn adversarial_next(
    loss: &LossFunction,
    prediction: &Point,
    bounds: &CompactBall,
) -> Result<Point> {
    worst_extreme(bounds, &|y| loss.eval(prediction, y))
}

/// Instantiate a generator from its spec.
pub fn build_environment(
    spec: &EnvironmentSpec,
    d_x: usize,
    d_y: usize,
) -> Result<Box<dyn Environment>> {
    Ok(match spec {
        EnvironmentSpec::IidGaussian { mean, sd, seed } => {
            let mut signal_rng = ChaCha8Rng::seed_from_u64(*seed);
            signal_rng.set_stream(1);
            let mut obs_rng = ChaCha8Rng::seed_from_u64(*seed);
            obs_rng.set_stream(2);
            Box::new(IidGaussian {
                mean: mean.clone(),
                sd: *sd,
                d_x,
                signal_rng,
                obs_rng,
            })
        }
        EnvironmentSpec::Ar1 { a, c, sd, seed } => Box::new(Ar1 {
            a: *a,
            c: *c,
            sd: *sd,
            prev: vec![0.0; d_y],
            rng: ChaCha8Rng::seed_from_u64(*seed),
        }),
        EnvironmentSpec::DriftingSine {
            amplitude,
            period,
            sd,
            seed,
        } => Box::new(DriftingSine {
            amplitude: *amplitude,
            period: *period,
            sd: *sd,
            d_x,
            d_y,
            n: 0,
            rng: ChaCha8Rng::seed_from_u64(*seed),
        }),
        EnvironmentSpec::AdversarialWorstcase { center, radius, .. } => Box::new(Adversarial {
            bounds: CompactBall::euclidean(Point::new(center.clone())?, *radius)?,
            d_x,
        }),
        EnvironmentSpec::Escaping { base, growth, .. } => Box::new(Escaping {
            base: *base,
            growth: *growth,
            d_x,
            d_y,
            n: 0,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(cs: &[f64]) -> Point {
        Point::new(cs.to_vec()).unwrap()
    }

    fn no_adversary(_: &Point) -> Result<f64> {
        Ok(0.0)
    }

    #[test]
    fn adversarial_examples() {
        let loss = LossFunction::SquaredNorm;
        let bounds = CompactBall::euclidean(pt(&[0.5]), 0.5).unwrap();
        assert_eq!(
            adversarial_next(&loss, &pt(&[0.3]), &bounds).unwrap(),
            pt(&[1.0])
        );
        // exact tie broken toward the lexicographically smallest
        assert_eq!(
            adversarial_next(&loss, &pt(&[0.5]), &bounds).unwrap(),
            pt(&[0.0])
        );
        assert_eq!(
            adversarial_next(&loss, &pt(&[0.9]), &bounds).unwrap(),
            pt(&[0.0])
        );
    }

    #[test]
    fn adversarial_candidates_above_one_dimension() {
        let loss = LossFunction::AbsoluteNorm;
        let bounds = CompactBall::euclidean(pt(&[0.0, 0.0]), 1.0).unwrap();
        // prediction at (2, 0): the farthest candidate is (-1, 0)
        assert_eq!(
            adversarial_next(&loss, &pt(&[2.0, 0.0]), &bounds).unwrap(),
            pt(&[-1.0, 0.0])
        );
    }

    #[test]
    fn environments_regenerate_exactly() {
        let specs = [
            EnvironmentSpec::IidGaussian {
                mean: vec![0.5],
                sd: 0.25,
                seed: 9,
            },
            EnvironmentSpec::Ar1 {
                a: 0.5,
                c: 0.1,
                sd: 0.2,
                seed: 9,
            },
            EnvironmentSpec::DriftingSine {
                amplitude: 2.0,
                period: 50.0,
                sd: 0.1,
                seed: 9,
            },
            EnvironmentSpec::Escaping {
                base: 1.0,
                growth: 3.0,
                seed: 0,
            },
        ];
        for spec in specs {
            let gen = |spec: &EnvironmentSpec| {
                let mut env = build_environment(spec, 1, 1).unwrap();
                let mut out = Vec::new();
                for _ in 0..50 {
                    let x = env.next_signal();
                    let y = env.next_observation(&no_adversary).unwrap();
                    out.push((x, y));
                }
                out
            };
            assert_eq!(gen(&spec), gen(&spec), "{spec:?} not reproducible");
        }
    }

    #[test]
    fn ar1_signal_is_previous_observation() {
        let spec = EnvironmentSpec::Ar1 {
            a: 0.9,
            c: 0.0,
            sd: 1.0,
            seed: 4,
        };
        let mut env = build_environment(&spec, 1, 1).unwrap();
        assert_eq!(env.next_signal(), Point::zero(1));
        let y1 = env.next_observation(&no_adversary).unwrap();
        assert_eq!(env.next_signal(), y1);
    }

    #[test]
    fn escaping_triples() {
        let spec = EnvironmentSpec::Escaping {
            base: 1.0,
            growth: 3.0,
            seed: 0,
        };
        let mut env = build_environment(&spec, 1, 1).unwrap();
        let mut seen = Vec::new();
        for _ in 0..4 {
            env.next_signal();
            seen.push(env.next_observation(&no_adversary).unwrap().coords()[0]);
        }
        assert_eq!(seen, vec![1.0, 3.0, 9.0, 27.0]);
    }

    #[test]
    fn gaussian_moments_sane() {
        let spec = EnvironmentSpec::IidGaussian {
            mean: vec![2.0],
            sd: 0.5,
            seed: 11,
        };
        let mut env = build_environment(&spec, 1, 1).unwrap();
        let n = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            env.next_signal();
            let y = env.next_observation(&no_adversary).unwrap().coords()[0];
            sum += y;
            sumsq += y * y;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
        assert!((var - 0.25).abs() < 0.02, "var {var}");
    }
}
