//! Seeded random stream.
//!
//! Uniform bits come from ChaCha8, which has a documented, portable output
//! sequence. Transcendental functions used by the samplers go through
//! `libm` so derived draws do not depend on the platform math library.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh stream whose seed depends only on this stream's seed and
    /// `label`, never on how many draws were already taken.
    pub fn derive(&self, label: &str) -> RngStream {
        RngStream::new(derive_seed(self.seed, label))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct items of `pool`, in draw order (partial Fisher–Yates).
    pub fn choose_distinct<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        assert!(k <= pool.len());
        let mut work = pool.to_vec();
        for i in 0..k {
            let j = i + self.below(work.len() - i);
            work.swap(i, j);
        }
        work.truncate(k);
        work
    }

    /// Standard normal draw (Marsaglia polar method).
    pub fn normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * libm::sqrt(-2.0 * libm::log(s) / s);
            }
        }
    }

    /// Gamma(shape, 1) by Marsaglia–Tsang with the squeeze test; shapes
    /// below one are boosted through `Gamma(shape + 1) · U^(1/shape)`.
    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::Parameter(format!(
                "gamma shape must be positive, got {shape}"
            )));
        }
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0)?;
            let u = self.uniform_open();
            return Ok(g * libm::pow(u, 1.0 / shape));
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / libm::sqrt(9.0 * d);
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return Ok(d * v);
            }
            if libm::log(u) < 0.5 * x2 + d * (1.0 - v + libm::log(v)) {
                return Ok(d * v);
            }
        }
    }

    /// Beta(alpha1, alpha2) as `X / (X + Y)` with independent Gamma draws.
    pub fn beta(&mut self, alpha1: f64, alpha2: f64) -> Result<f64> {
        beta_sample(self, alpha1, alpha2)
    }
}

pub fn beta_sample(rng: &mut RngStream, alpha1: f64, alpha2: f64) -> Result<f64> {
    for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2)] {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Parameter(format!(
                "beta shape {name} must be positive, got {a}"
            )));
        }
    }
    let x = rng.gamma(alpha1)?;
    let y = rng.gamma(alpha2)?;
    if x + y == 0.0 {
        // both draws underflowed; only reachable for tiny shapes
        return Ok(if rng.uniform() < alpha1 / (alpha1 + alpha2) {
            1.0
        } else {
            0.0
        });
    }
    Ok((x / (x + y)).clamp(0.0, 1.0))
}

/// SplitMix64-style mix of a seed with an FNV-1a hash of `label`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
