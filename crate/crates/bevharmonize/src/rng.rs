//! Counter-based deterministic random numbers.
//!
//! Every random quantity in this crate is a pure function of a seed and a
//! set of index words (sample index, entity index, draw counter). There is
//! no global generator state, so batch work can fan out across threads and
//! still produce bit-identical results in any execution order.

/// SplitMix64 finalizer: full-avalanche mixing of a 64-bit word.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hash a seed together with an arbitrary list of index words.
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN) ^ mix64(w));
    }
    h
}

/// Uniform draw in [0, 1) keyed by (seed, words).
pub fn uniform_at(seed: u64, words: &[u64]) -> f64 {
    u64_to_unit(hash_words(seed, words))
}

/// Map a u64 to [0, 1) using the top 53 bits.
#[inline]
fn u64_to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A stateless-keyed counter generator.
///
/// `CounterRng::new(seed, a, b)` opens an independent stream for entity
/// `(a, b)`; successive draws advance only the local counter.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    a: u64,
    b: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, a: u64, b: u64) -> Self {
        Self {
            seed,
            a,
            b,
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = hash_words(self.seed, &[self.a, self.b, self.counter]);
        self.counter += 1;
        x
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        u64_to_unit(self.next_u64())
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller; consumes two draws.
    pub fn next_normal(&mut self) -> f64 {
        // shift into (0, 1] so ln never sees zero
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = u64_to_unit(self.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
