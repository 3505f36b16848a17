use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Seeded random stream. ChaCha8 keeps sequences identical across platforms.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

pub fn seeded_rng(seed: u64) -> RngStream {
    RngStream {
        seed,
        inner: ChaCha8Rng::seed_from_u64(seed),
        spare_normal: None,
    }
}

/// Seed for an independent child stream (`seed` XOR a scrambled stream index).
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl RngStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform integer in `[0, n)`, unbiased (rejection sampling).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return (x % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_give_equal_streams() {
        let a: Vec<f64> = {
            let mut r = seeded_rng(42);
            (0..100).map(|_| r.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut r = seeded_rng(42);
            (0..100).map(|_| r.uniform()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let mut r1 = seeded_rng(42);
        let mut r2 = seeded_rng(43);
        let differs = (0..100).any(|_| r1.uniform() != r2.uniform());
        assert!(differs);
    }

    #[test]
    fn uniform_in_unit_interval() {
        for seed in [0, 1, 42, u64::MAX] {
            let mut r = seeded_rng(seed);
            for _ in 0..10_000 {
                let u = r.uniform();
                assert!((0.0..1.0).contains(&u));
            }
        }
    }

    #[test]
    fn golden_sequence() {
        let mut r = seeded_rng(42);
        let got: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(got, GOLDEN_42);
    }

    // First four raw draws for seed 42; a change here breaks reproducibility
    // of every stored run.
    const GOLDEN_42: [u64; 4] = [
        12578764544318200737,
        17529487244874322312,
        7886285670807131020,
        11572758976476374866,
    ];

    #[test]
    fn normal_moments() {
        let mut r = seeded_rng(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn below_covers_range_without_escaping() {
        let mut r = seeded_rng(3);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[r.below(7)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }

    #[test]
    fn child_seeds_do_not_collide_for_small_seeds() {
        let mut all = Vec::new();
        for seed in 1..=5u64 {
            for stream in 0..20u64 {
                all.push(child_seed(seed, stream));
            }
        }
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
