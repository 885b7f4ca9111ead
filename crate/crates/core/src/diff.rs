//! Differential walk on spheres: one walk yields a forward sample `û` and a
//! sparse sample of `∂u/∂π` for every parameter at once.

use rayon::prelude::*;

use crate::bvp::Bvp;
use crate::error::{Error, Result};
use crate::forward::{estimate_point, normal_derivative, PointEstimate, SolverConfig};
use crate::geometry::{Boundary, BoundaryQuery};
use crate::kernels::{ball_volume, sample_ball, sample_sphere, BallKernel};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

const NESTED_TAG: u64 = 0xD1FF;

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledEstimate<T> {
    pub value: T,
    pub derivative: SparseVec<T>,
    pub steps: usize,
    pub truncated: bool,
    /// The nested normal-derivative walk could not place its offset point.
    pub offset_failed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDerivative<T> {
    pub value: SparseVec<T>,
    pub offset_failed: bool,
    pub steps: usize,
}

/// Dirichlet data of the differential problem at a terminal point:
/// `δβ + (∂g/∂n − ∂u/∂n) v_n`.
pub fn differential_boundary_value<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    q: &BoundaryQuery<T, D>,
    rng: &mut RngStream,
) -> Result<BoundaryDerivative<T>> {
    let vn = boundary.normal_velocity(q)?;
    let mut value = bvp.data.param_derivative(boundary, q);
    if vn.nnz() == 0 {
        return Ok(BoundaryDerivative { value, offset_failed: false, steps: 0 });
    }
    let dg_dn = bvp.data.normal_derivative(q);
    match normal_derivative(boundary, bvp, cfg, q, rng) {
        Ok(du) => {
            value = value.add(&vn.scaled(dg_dn - du.value));
            Ok(BoundaryDerivative { value, offset_failed: false, steps: du.steps })
        }
        Err(Error::Numerical(_)) => {
            value = value.add(&vn.scaled(dg_dn));
            Ok(BoundaryDerivative { value, offset_failed: true, steps: 0 })
        }
        Err(e) => Err(e),
    }
}

/// One coupled walk (Alg. 2 fused with Alg. 1).
pub fn diff_wos<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    rng: &mut RngStream,
) -> Result<CoupledEstimate<T>> {
    if !boundary.contains(x) {
        return Err(Error::OutsideDomain);
    }
    let n = boundary.num_params();
    let mut x = *x;
    let mut acc = T::zero();
    let mut weight = T::one();
    let mut steps = 0;
    loop {
        if steps >= cfg.max_steps {
            let tail = boundary.closest(&x).and_then(|q| bvp.data.value(boundary, &q)).unwrap_or(T::zero());
            return Ok(CoupledEstimate {
                value: acc + weight * tail,
                derivative: SparseVec::empty(n),
                steps,
                truncated: true,
                offset_failed: false,
            });
        }
        let step = boundary.walk_step(&x, cfg.epsilon)?;
        let terminal = match step.terminal {
            Some(q) => Some(q),
            None if !(step.radius > T::zero()) => Some(boundary.closest(&x)?),
            None => None,
        };
        if let Some(q) = terminal {
            let g = bvp.data.value(boundary, &q)?;
            let mut nested = rng.derive(NESTED_TAG);
            let bd = differential_boundary_value(boundary, bvp, cfg, &q, &mut nested)?;
            return Ok(CoupledEstimate {
                value: acc + weight * g,
                derivative: if weight == T::one() { bd.value } else { bd.value.scaled(weight) },
                steps,
                truncated: false,
                offset_failed: bd.offset_failed,
            });
        }
        let r = step.radius;
        let kernel = BallKernel::new(D, r, bvp.sigma)?;
        if !bvp.source.is_zero() {
            let z = sample_ball(rng, &x, r);
            let dz = z.distance(&x);
            if dz > T::zero() && dz < r {
                acc = acc - weight * kernel.greens(dz)? * ball_volume(D, r) * bvp.source.value(&z);
            }
        }
        let alpha = kernel.attenuation();
        if cfg.russian_roulette {
            if alpha < T::one() && rng.uniform::<T>() >= alpha {
                return Ok(CoupledEstimate {
                    value: acc,
                    derivative: SparseVec::empty(n),
                    steps,
                    truncated: false,
                    offset_failed: false,
                });
            }
        } else {
            weight = weight * alpha;
        }
        x = sample_sphere(rng, &x, r);
        steps += 1;
    }
}

/// `cfg.walks` coupled walks from one point.
pub fn coupled_walks<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    point: u64,
) -> Result<Vec<CoupledEstimate<T>>> {
    (0..cfg.walks)
        .map(|w| diff_wos(boundary, bvp, cfg, x, &mut RngStream::for_walk(cfg.seed, point, w as u64)))
        .collect()
}

/// Per-parameter sample mean and unbiased variance of the derivative
/// samples, plus the forward summary.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeEstimate<T> {
    pub value: PointEstimate<T>,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
    pub walks: usize,
    pub offset_failures: usize,
}

impl<T: Real> DerivativeEstimate<T> {
    pub fn from_walks(walks: &[CoupledEstimate<T>], num_params: usize) -> Self {
        let values: Vec<T> = walks.iter().map(|w| w.value).collect();
        let truncated = walks.iter().filter(|w| w.truncated).count();
        let steps = walks.iter().map(|w| w.steps).sum();
        let n = walks.len();
        let mut mean = vec![T::zero(); num_params];
        for w in walks {
            w.derivative.add_scaled_to(T::one(), &mut mean);
        }
        let inv = T::count(n.max(1)).recip();
        mean.iter_mut().for_each(|m| *m = *m * inv);
        let mut variance = vec![T::zero(); num_params];
        if n > 1 {
            for w in walks {
                let d = w.derivative.to_dense();
                for k in 0..num_params {
                    let e = d[k] - mean[k];
                    variance[k] = variance[k] + e * e;
                }
            }
            let inv = T::count(n - 1).recip();
            variance.iter_mut().for_each(|v| *v = *v * inv);
        }
        Self {
            value: PointEstimate::from_values(&values, truncated, steps),
            mean,
            variance,
            walks: n,
            offset_failures: walks.iter().filter(|w| w.offset_failed).count(),
        }
    }

    pub fn std_error(&self, k: usize) -> T {
        (self.variance[k] / T::count(self.walks.max(1))).sqrt()
    }
}

pub fn estimate_derivative_point<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    point: u64,
) -> Result<DerivativeEstimate<T>> {
    let walks = coupled_walks(boundary, bvp, cfg, x, point)?;
    Ok(DerivativeEstimate::from_walks(&walks, boundary.num_params()))
}

/// Parallel derivative estimates; points outside the domain yield `None`.
pub fn estimate_derivative_grid<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    points: &[Vector<T, D>],
) -> Result<Vec<Option<DerivativeEstimate<T>>>> {
    cfg.validate()?;
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            if boundary.contains(x) {
                estimate_derivative_point(boundary, bvp, cfg, x, i as u64).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Forward differences with common random numbers: for each parameter,
/// the per-walk differences `(û(π + δeₖ) − û(π))/δ`. `None` marks a
/// perturbation that produced invalid geometry or moved `x` outside.
pub fn fd_reference_gradient<T: Real, const D: usize, B: Boundary<T, D> + Clone>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    delta: T,
    point: u64,
) -> Result<Vec<Option<PointEstimate<T>>>> {
    if !(delta > T::zero()) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let base = per_walk_values(boundary, bvp, cfg, x, point)?;
    let params = boundary.params();
    (0..params.len())
        .into_par_iter()
        .map(|k| {
            let mut moved = boundary.clone();
            let mut p = params.clone();
            p[k] = p[k] + delta;
            if moved.set_params(&p).is_err() || !moved.contains(x) {
                return Ok(None);
            }
            let vals = per_walk_values(&moved, bvp, cfg, x, point)?;
            let diffs: Vec<T> = vals.iter().zip(&base).map(|(a, b)| (*a - *b) / delta).collect();
            Ok(Some(PointEstimate::from_values(&diffs, 0, 0)))
        })
        .collect()
}

fn per_walk_values<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    cfg: &SolverConfig<T>,
    x: &Vector<T, D>,
    point: u64,
) -> Result<Vec<T>> {
    let single = SolverConfig { walks: 1, ..cfg.clone() };
    (0..cfg.walks)
        .map(|w| {
            let mut rng = RngStream::for_walk(cfg.seed, point, w as u64);
            Ok(crate::forward::wos_solve(boundary, bvp, &single, x, &mut rng)?.value)
        })
        .collect::<Result<Vec<T>>>()
        .or_else(|e| match e {
            Error::OutsideDomain => estimate_point(boundary, bvp, cfg, x, point).map(|_| Vec::new()),
            e => Err(e),
        })
}
