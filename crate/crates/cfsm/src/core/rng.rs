use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seeded random source with reproducible, platform-independent draws.
///
/// Backed by ChaCha8, whose output for a given seed is identical on every
/// platform. Index draws go through 64-bit arithmetic only, so sequences do
/// not depend on the native word size.
///
/// Per-stage streams are derived from a root seed by a fixed splitting rule
/// (see [`RngHandle::stage_stream`]), so any single stage of a run can be
/// replayed without replaying the stages before it.
#[derive(Clone, Debug)]
pub struct RngHandle {
    rng: ChaCha8Rng,
}

/// SplitMix64 finalizer; decorrelates consecutive seeds.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngHandle {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The stream for `stage` under `root_seed`.
    ///
    /// Splitting rule: the stage index is spread by the golden-ratio
    /// increment, added to the root seed, and passed through the SplitMix64
    /// finalizer. Distinct (seed, stage) pairs map to distinct, decorrelated
    /// ChaCha seeds.
    pub fn stage_stream(root_seed: u64, stage: usize) -> Self {
        let stage_seed = mix64(root_seed.wrapping_add((stage as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        Self::from_seed(stage_seed)
    }

    /// Uniform draw from the inclusive range `lo..=hi`.
    pub fn uniform_index(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi, "empty index range {lo}..={hi}");
        self.rng.random_range(lo as u64..=hi as u64) as usize
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random_range(0.0..1.0)
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}
