//! Random perturbation directions.
//!
//! Every draw comes from a stream keyed by the run seed and the position in
//! the recursion, so results do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::problem::{DecisionVector, MultilevelProblem};

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A replayable random stream identified by a seed and a path.
///
/// The path is folded into a 64-bit key. Children are derived with
/// [`RngStream::child`], which appends one path element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: splitmix64(seed ^ 0x6d63_6d6f),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, element: u64) -> Self {
        Self {
            seed: self.seed,
            key: splitmix64(self.key ^ splitmix64(element.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn path(&self, elements: &[u64]) -> Self {
        elements.iter().fold(*self, |s, &e| s.child(e))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.key);
        rng
    }
}

/// `count` vectors with coordinates independently uniform on `[-0.5, 0.5]`.
pub fn rand_directions(count: usize, dim: usize, stream: &RngStream) -> Vec<Vec<f64>> {
    let mut rng = stream.rng();
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect()
}

/// `x` followed by `samples` perturbations of `x` on `level`'s block, each of
/// max-norm at most `step / 2`.
///
/// The unperturbed point is always first.
pub fn candidate_set(
    problem: &MultilevelProblem,
    x: &DecisionVector,
    level: usize,
    samples: usize,
    step: f64,
    stream: &RngStream,
) -> Result<Vec<DecisionVector>> {
    let block = problem.block(level)?;
    let mut out = Vec::with_capacity(samples + 1);
    out.push(x.clone());
    for d in rand_directions(samples, block.len(), stream) {
        let scaled: Vec<f64> = d.iter().map(|v| v * step).collect();
        out.push(problem.embed_block(x, level, &scaled)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_nested_toll, TollScenario};
    use proptest::prelude::*;

    #[test]
    fn zero_count_is_empty() {
        assert!(rand_directions(0, 3, &RngStream::new(1)).is_empty());
    }

    #[test]
    fn directions_lie_in_unit_hypercube() {
        for seed in 0..5 {
            let ds = rand_directions(1000, 3, &RngStream::new(seed));
            assert_eq!(ds.len(), 1000);
            assert!(ds.iter().flatten().all(|v| (-0.5..=0.5).contains(v)));
        }
    }

    #[test]
    fn directions_have_zero_mean() {
        let ds = rand_directions(100_000, 3, &RngStream::new(42));
        for j in 0..3 {
            let mean = ds.iter().map(|d| d[j]).sum::<f64>() / ds.len() as f64;
            assert!(mean.abs() < 0.01, "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn streams_replay_and_separate() {
        let s = RngStream::new(9).path(&[3, 1, 0, 2]);
        assert_eq!(rand_directions(4, 2, &s), rand_directions(4, 2, &s));
        let other = RngStream::new(9).path(&[3, 1, 0, 3]);
        assert_ne!(rand_directions(4, 2, &s), rand_directions(4, 2, &other));
        assert_ne!(
            rand_directions(4, 2, &RngStream::new(9)),
            rand_directions(4, 2, &RngStream::new(10))
        );
    }

    #[test]
    fn candidate_set_shape() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = DecisionVector::new(vec![1.0, 2.0, 0.3, 0.3, 0.4]).unwrap();
        let cs = candidate_set(&p, &x, 1, 2, 0.15, &RngStream::new(0)).unwrap();
        assert_eq!(cs.len(), 3);
        assert_eq!(cs[0], x);
        for c in &cs {
            assert_eq!(&c.as_slice()[2..], &x.as_slice()[2..]);
            assert!(c.max_abs_diff(&x) <= 0.075);
        }
    }

    #[test]
    fn tiny_step_collapses_candidates() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = DecisionVector::new(vec![1.0, 2.0, 0.3, 0.3, 0.4]).unwrap();
        let cs = candidate_set(&p, &x, 1, 8, 1e-12, &RngStream::new(3)).unwrap();
        assert!(cs.iter().all(|c| c.max_abs_diff(&x) <= 1e-12));
    }

    proptest! {
        #[test]
        fn candidate_invariants(seed in any::<u64>(), n in 0usize..12, step in 1e-6..5.0f64, level in 1usize..=3) {
            let p = make_nested_toll(&TollScenario::new(6.0));
            let x = DecisionVector::new(vec![1.0, 2.0, 0.3, 0.3, 0.4]).unwrap();
            let s = RngStream::new(seed);
            let cs = candidate_set(&p, &x, level, n, step, &s).unwrap();
            prop_assert_eq!(cs.len(), n + 1);
            prop_assert!(cs.contains(&x));
            let block = p.block(level).unwrap();
            for c in &cs {
                prop_assert!(c.max_abs_diff(&x) <= step / 2.0);
                for i in 0..x.len() {
                    if !block.contains(&i) {
                        prop_assert_eq!(c[i], x[i]);
                    }
                }
            }
            prop_assert_eq!(cs, candidate_set(&p, &x, level, n, step, &s).unwrap());
        }
    }
}
