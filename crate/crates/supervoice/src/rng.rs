//! Deterministic pseudo-randomness for corpus synthesis and weight init.
//!
//! Everything random in this crate flows through SplitMix64 so that corpora,
//! model initialization and therefore checkpoints reproduce bit-for-bit on
//! any platform. The generator is fully specified by three constants: the
//! state increment 0x9E3779B97F4A7C15 and the two finalization multipliers
//! 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB. It is splittable, so
//! independent substreams can be derived for each speaker, utterance or
//! tensor without coordinating a shared cursor.

/// SplitMix64 generator. One `u64` of state, one output per step.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX2: u64 = 0x94D0_49BB_1331_11EB;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derives a substream from a seed and a path of indices. Equal paths
    /// yield equal streams; sibling paths are statistically independent.
    pub fn stream(seed: u64, path: &[u64]) -> Self {
        let mut rng = SplitMix64::new(seed);
        for &p in path {
            // Fold each path component into the state through the output
            // function so that (seed, [1, 2]) and (seed, [12]) differ.
            let folded = rng.next_u64() ^ mix(p);
            rng = SplitMix64::new(folded);
        }
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Splits off an independent child generator.
    pub fn split(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64())
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be nonzero. The tiny modulo bias
    /// (< 2^-53 for every n used here) is irrelevant for synthesis work.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        (self.next_f64() * n as f64) as u64
    }

    /// Standard normal deviate via Box-Muller. Stateless: consumes two
    /// uniforms per call and discards the second branch, which keeps
    /// substream consumption independent of call history.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        // Guard the log against u1 == 0.
        let r = (-2.0 * (u1 + f64::MIN_POSITIVE).ln()).sqrt();
        r * (std::f64::consts::TAU * u2).cos()
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX2);
    z ^ (z >> 31)
}
