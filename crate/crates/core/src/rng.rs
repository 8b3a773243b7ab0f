//! Random-stream plumbing. Every stochastic operation takes an explicit
//! stream handle, so trials can run concurrently on disjoint streams and a
//! fixed seed reproduces a run bit-for-bit.

use rand_chacha::ChaCha12Rng;

/// The RNG stream handed to samplers and algorithms.
pub type SampleStream = ChaCha12Rng;

/// Builds a stream from a 64-bit seed.
pub fn stream_from_seed(seed: u64) -> SampleStream {
    use rand::SeedableRng;
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stream for trial `index` of a run with base seed `base_seed`.
///
/// Trials use consecutive seeds so a single trial can be re-run in isolation.
pub fn trial_stream(base_seed: u64, index: u64) -> SampleStream {
    stream_from_seed(base_seed.wrapping_add(index))
}
