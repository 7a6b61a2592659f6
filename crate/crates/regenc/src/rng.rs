//! Deterministic random number generation.
//!
//! The generator is xoshiro256** seeded through SplitMix64, both documented
//! public-domain algorithms defined purely over 64-bit integer arithmetic, so
//! identical seeds produce identical streams on every platform. All
//! randomness in the crate (weight init, dropout masks, batch shuffling,
//! k-means seeding, synthetic data) flows from one of these streams; there
//! are no hidden entropy sources.
//!
//! [`Rng::derive`] produces an independent child stream from a string tag,
//! which keeps unrelated consumers (e.g. weight init vs. batch shuffling)
//! from perturbing each other's draws when one of them changes.

/// SplitMix64 output function, also used for seed mixing.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes, for deriving child seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// xoshiro256** stream with the seed it was built from.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
    seed: u64,
    spare_normal: Option<f64>,
}

impl Rng {
    /// Build a generator from a 64-bit seed (state expanded via SplitMix64).
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { s, seed, spare_normal: None }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child stream named by `tag`.
    ///
    /// Children depend only on `(seed, tag)`, never on how far the parent
    /// stream has advanced.
    pub fn derive(&self, tag: &str) -> Rng {
        let mut mix = self.seed ^ fnv1a(tag.as_bytes()).rotate_left(17);
        Rng::from_seed(splitmix64(&mut mix))
    }

    /// Derive an independent child stream from a numeric index.
    pub fn derive_index(&self, tag: &str, index: u64) -> Rng {
        let mut mix = self.seed ^ fnv1a(tag.as_bytes()).rotate_left(17) ^ index.rotate_left(43);
        Rng::from_seed(splitmix64(&mut mix))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw via Box-Muller (second value cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform index in [0, n). Rejection sampling keeps it unbiased.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index bound must be positive");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}
