//! Counter-based random streams.
//!
//! Every walk draws from its own stream keyed by `(seed, point index, walk
//! index)`, so results do not depend on scheduling order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;
use crate::vector::Vector;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix two keys into one.
#[inline]
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b.wrapping_add(0x632B_E59B_D9B4_E019)))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Stream for walk `walk` launched from evaluation point `point`.
    pub fn for_walk(seed: u64, point: u64, walk: u64) -> Self {
        Self::new(seed, mix(point, walk))
    }

    /// Independent child stream; the parent is not advanced.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(mix(self.seed, tag ^ 0xA5A5_5A5A_0F0F_F0F0), mix(self.stream, tag))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform<T: Real>(&mut self) -> T {
        T::lit(self.rng.gen::<f64>())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn normal<T: Real>(&mut self) -> T {
        // Box-Muller; u1 in (0, 1].
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        T::lit((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
    }

    /// Uniform direction on the unit sphere in `D` dimensions.
    pub fn unit_sphere<T: Real, const D: usize>(&mut self) -> Vector<T, D> {
        match D {
            1 => {
                let mut v = Vector::zero();
                v.0[0] = if self.rng.gen::<bool>() { T::one() } else { -T::one() };
                v
            }
            2 => {
                let th = std::f64::consts::TAU * self.rng.gen::<f64>();
                let mut v = Vector::zero();
                v.0[0] = T::lit(th.cos());
                v.0[1] = T::lit(th.sin());
                v
            }
            3 => {
                let z = 1.0 - 2.0 * self.rng.gen::<f64>();
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = std::f64::consts::TAU * self.rng.gen::<f64>();
                let mut v = Vector::zero();
                v.0[0] = T::lit(r * phi.cos());
                v.0[1] = T::lit(r * phi.sin());
                v.0[2] = T::lit(z);
                v
            }
            _ => loop {
                let mut v = Vector::<T, D>::zero();
                for c in v.0.iter_mut() {
                    *c = self.normal();
                }
                let n = v.norm();
                if n > T::zero() {
                    break v * n.recip();
                }
            },
        }
    }

    /// Uniform point in the unit ball in `D` dimensions.
    pub fn unit_ball<T: Real, const D: usize>(&mut self) -> Vector<T, D> {
        let dir = self.unit_sphere::<T, D>();
        let u: f64 = self.rng.gen();
        dir * T::lit(u.powf(1.0 / D as f64))
    }
}
