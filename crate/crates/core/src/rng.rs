//! Seedable, portable random generator.
//!
//! SplitMix64 (Steele, Lea & Flood): 64-bit state, increment constant
//! 0x9E3779B97F4A7C15 and the two mixing constants below. Output is identical
//! on every platform, which keeps seeded scenarios and tests bit-reproducible.
//! All engine randomness flows from one run seed, fanned out per module via
//! `derive` with a fixed label.

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Sub-generator for an independent stream, derived from a label and salt.
    pub fn derive(seed: u64, label: &str, salt: u64) -> Self {
        let mut h = seed;
        for &b in label.as_bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100000001B3); // FNV-1a step
        }
        let mut rng = Rng::new(h ^ salt.wrapping_mul(0x9E3779B97F4A7C15));
        rng.next_u64(); // decorrelate nearby salts
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }

    /// Standard normal via the Marsaglia polar method.
    pub fn gaussian(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// Random unit vector of the given dimension.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.gaussian()).collect();
            let n = crate::mat::norm2(&v);
            if n > 1e-9 {
                return v.iter().map(|x| x / n).collect();
            }
        }
    }

    /// Poisson draw by inversion; suitable for the small rates used here.
    pub fn poisson(&mut self, lambda: f64) -> usize {
        if lambda <= 0.0 {
            return 0;
        }
        let l = (-lambda).exp();
        let mut k = 0usize;
        let mut p = 1.0;
        loop {
            p *= self.next_f64();
            if p <= l {
                return k;
            }
            k += 1;
            if k > 10_000 {
                return k; // lambda pathologically large; cap the draw
            }
        }
    }
}
