use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::Matrix;

/// Well-known sub-stream labels. Each consumer draws from its own fork so the
/// values it sees do not depend on how much any other consumer has drawn.
pub mod streams {
    pub const CFF: u64 = 1;
    pub const LAYERS: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const DATA: u64 = 5;
    pub const HEAD: u64 = 6;
}

/// Deterministic ChaCha20 stream keyed by a 64-bit seed.
///
/// ChaCha is a counter-mode generator, so equal seeds give equal streams on
/// every platform. [`Rng::fork`] derives a child stream from the *seed*, not the
/// current position, which keeps sub-streams independent of evaluation order.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed;
        for chunk in key.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self {
            seed,
            inner: ChaCha20Rng::from_seed(key),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream identified by `label`.
    pub fn fork(&self, label: u64) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        self.inner.gen_range(0..n)
    }

    /// Standard normal via the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `rows x cols` matrix of `N(0, sigma^2)` draws, filled row-major.
pub fn randn(rng: &mut Rng, rows: usize, cols: usize, sigma: f64) -> Matrix {
    assert!(sigma > 0.0, "sigma must be positive");
    let data = (0..rows * cols).map(|_| sigma * rng.normal()).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

/// `rows x cols` matrix of `U(lo, hi)` draws, filled row-major.
pub fn rand_uniform(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    assert!(lo < hi, "empty interval");
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}
