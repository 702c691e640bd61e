//! Replicate-keyed random streams.
//!
//! Every replicate draws from its own ChaCha8 stream selected by
//! `(seed, task, replicate)`. A replicate's draws therefore never depend on
//! how replicates are distributed over workers, which keeps serial and
//! parallel runs bit-identical.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Identifies a family of replicate streams: a user seed plus a task id that
/// separates independent ensembles drawn within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub task: u64,
}

impl StreamKey {
    pub fn new(seed: u64, task: u64) -> Self {
        Self { seed, task }
    }

    /// Derives a key for a sub-task, e.g. one variant within a study cell.
    pub fn child(self, sub: u64) -> Self {
        Self { seed: self.seed, task: splitmix64(self.task ^ splitmix64(sub.wrapping_add(0x5851_F42D_4C95_7F2D))) }
    }

    /// The stream for replicate `rep`.
    pub fn replicate(self, rep: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(self.task)));
        rng.set_stream(rep);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Unit-rate exponential by inversion, `-ln U`. Always strictly positive.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open01(rng).ln()
}
