//! Walk-on-spheres estimation of the forward problem and of boundary normal
//! derivatives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvp::Bvp;
use crate::error::{Error, Result};
use crate::geometry::{Boundary, BoundaryQuery};
use crate::kernels::{ball_volume, sample_ball, sample_sphere, BallKernel};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalDerivativeMethod {
    #[default]
    Backward,
    OffsetBall,
}

/// Walk parameters. Lengths are absolute.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Shell width ε.
    pub epsilon: T,
    /// Normal-derivative offset c.
    pub offset: T,
    pub max_steps: usize,
    pub russian_roulette: bool,
    pub walks: usize,
    pub seed: u64,
    pub method: NormalDerivativeMethod,
    /// Nested forward walks per terminal point of a differential walk.
    pub forward_walks: usize,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(epsilon: T, offset: T) -> Self {
        Self {
            epsilon,
            offset,
            max_steps: 10_000,
            russian_roulette: true,
            walks: 1,
            seed: 0,
            method: NormalDerivativeMethod::Backward,
            forward_walks: 1,
        }
    }

    /// ε = 10⁻³ and c = 10ε relative to the scene extent.
    pub fn for_extent(extent: T) -> Self {
        let eps = T::lit(1e-3) * extent;
        Self::new(eps, T::lit(10.0) * eps)
    }

    pub fn with_walks(mut self, walks: usize) -> Self {
        self.walks = walks;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.offset >= self.epsilon) {
            return Err(Error::Config("offset must be at least epsilon".into()));
        }
        if self.max_steps == 0 || self.walks == 0 || self.forward_walks == 0 {
            return Err(Error::Config("step budget and walk counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkResult<T> {
    pub value: T,
    pub steps: usize,
    pub truncated: bool,
}

/// One walk of Alg. 1 from `x`.
pub fn wos_solve<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    rng: &mut RngStream,
) -> Result<WalkResult<T>> {
    if !boundary.contains(x) {
        return Err(Error::OutsideDomain);
    }
    let mut x = *x;
    let mut acc = T::zero();
    let mut weight = T::one();
    let mut steps = 0;
    loop {
        if steps >= cfg.max_steps {
            let tail = boundary.closest(&x).and_then(|q| bvp.data.value(boundary, &q)).unwrap_or(T::zero());
            return Ok(WalkResult { value: acc + weight * tail, steps, truncated: true });
        }
        let step = boundary.walk_step(&x, cfg.epsilon)?;
        let terminal = match step.terminal {
            Some(q) => Some(q),
            None if !(step.radius > T::zero()) => Some(boundary.closest(&x)?),
            None => None,
        };
        if let Some(q) = terminal {
            let g = bvp.data.value(boundary, &q)?;
            return Ok(WalkResult { value: acc + weight * g, steps, truncated: false });
        }
        let r = step.radius;
        let kernel = BallKernel::new(D, r, bvp.sigma)?;
        if !bvp.source.is_zero() {
            let z = sample_ball(rng, &x, r);
            let dz = z.distance(&x);
            if dz > T::zero() && dz < r {
                let s = kernel.greens(dz)? * ball_volume(D, r) * bvp.source.value(&z);
                acc = acc - weight * s;
            }
        }
        let alpha = kernel.attenuation();
        if cfg.russian_roulette {
            if alpha < T::one() && rng.uniform::<T>() >= alpha {
                return Ok(WalkResult { value: acc, steps, truncated: false });
            }
        } else {
            weight = weight * alpha;
        }
        x = sample_sphere(rng, &x, r);
        steps += 1;
    }
}

/// Per-point summary of repeated walks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimate<T> {
    pub mean: T,
    /// Unbiased sample variance of single-walk values.
    pub variance: T,
    pub walks: usize,
    pub truncated: usize,
    pub steps: usize,
}

impl<T: Real> PointEstimate<T> {
    pub fn from_values(values: &[T], truncated: usize, steps: usize) -> Self {
        let n = values.len();
        let mean = values.iter().copied().sum::<T>() / T::count(n.max(1));
        let variance = if n > 1 {
            values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / T::count(n - 1)
        } else {
            T::zero()
        };
        Self { mean, variance, walks: n, truncated, steps }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> T {
        (self.variance / T::count(self.walks.max(1))).sqrt()
    }
}

/// `cfg.walks` walks from `x`, keyed by `point` for reproducibility.
pub fn estimate_point<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    point: u64,
) -> Result<PointEstimate<T>> {
    let mut values = Vec::with_capacity(cfg.walks);
    let (mut truncated, mut steps) = (0, 0);
    for w in 0..cfg.walks {
        let mut rng = RngStream::for_walk(cfg.seed, point, w as u64);
        let r = wos_solve(boundary, bvp, cfg, x, &mut rng)?;
        values.push(r.value);
        truncated += r.truncated as usize;
        steps += r.steps;
    }
    Ok(PointEstimate::from_values(&values, truncated, steps))
}

/// Parallel estimate over many points; points outside the domain yield
/// `None`.
pub fn estimate_grid<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    points: &[Vector<T, D>],
) -> Result<Vec<Option<PointEstimate<T>>>> {
    cfg.validate()?;
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            if boundary.contains(x) {
                estimate_point(boundary, bvp, cfg, x, i as u64).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalDerivativeEstimate<T> {
    pub value: T,
    /// Offset actually used after retries.
    pub offset: T,
    pub retries: usize,
    pub steps: usize,
    pub truncated: bool,
}

const OFFSET_RETRIES: usize = 3;

/// Interior offset point `x̄ − c n`, halving `c` (not below ε) while the
/// point leaves the domain or lands much closer to another part of the
/// boundary than to `x̄`.
pub fn offset_point<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    cfg: &SolverConfig<T>,
    q: &BoundaryQuery<T, D>,
) -> Result<(Vector<T, D>, T, usize)> {
    let mut c = cfg.offset;
    for attempt in 0..=OFFSET_RETRIES {
        let y = q.closest - q.normal * c;
        if boundary.contains(&y) {
            if let Ok(d) = boundary.closest(&y) {
                if d.distance >= c * T::lit(0.5) {
                    return Ok((y, c, attempt));
                }
            }
        }
        c = (c * T::lit(0.5)).max(cfg.epsilon);
    }
    Err(Error::Numerical("offset point outside the domain".into()))
}

/// Estimate of `∂u/∂n` at a boundary point using `cfg.forward_walks`
/// nested walks drawn from `rng`.
pub fn normal_derivative<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    q: &BoundaryQuery<T, D>,
    rng: &mut RngStream,
) -> Result<NormalDerivativeEstimate<T>> {
    let (y, c, retries) = offset_point(boundary, cfg, q)?;
    let n = T::count(cfg.forward_walks);
    let mut sum = T::zero();
    let mut steps = 0;
    let mut truncated = false;
    match cfg.method {
        NormalDerivativeMethod::Backward => {
            let g = bvp.data.value(boundary, q)?;
            for _ in 0..cfg.forward_walks {
                let w = wos_solve(boundary, bvp, cfg, &y, rng)?;
                sum = sum + (g - w.value) / c;
                steps += w.steps;
                truncated |= w.truncated;
            }
        }
        NormalDerivativeMethod::OffsetBall => {
            let radius = c.min(boundary.walk_step(&y, cfg.epsilon)?.radius.max(cfg.epsilon));
            let scale = T::count(D) / radius;
            for _ in 0..cfg.forward_walks {
                let dir = rng.unit_sphere::<T, D>();
                let z = y + dir * radius;
                let w = if boundary.contains(&z) {
                    wos_solve(boundary, bvp, cfg, &z, rng)?
                } else {
                    let qz = boundary.closest(&z)?;
                    WalkResult { value: bvp.data.value(boundary, &qz)?, steps: 0, truncated: false }
                };
                sum = sum + scale * dir.dot(&q.normal) * w.value;
                steps += w.steps;
                truncated |= w.truncated;
            }
        }
    }
    Ok(NormalDerivativeEstimate { value: sum / n, offset: c, retries, steps, truncated })
}
