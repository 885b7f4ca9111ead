//! Implicit boundaries given by the zero set of a sum of monopoles,
//! `h(x) = c + Σ aₙ / ‖x − pₙ‖`, with domain `{h > 0}`.
//!
//! In the plane the kernel is the restriction of a 3D harmonic function, so
//! an empty 3D ball around a point gives an empty disk on the slice.

use super::{next_revision, Boundary, BoundaryQuery, BoundarySample, ParamInfo, ParamRole, WalkStep};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monopole<T, const D: usize> {
    pub scale: T,
    pub position: Vector<T, D>,
}

#[derive(Clone, Debug)]
pub struct ImplicitMonopoles<T, const D: usize> {
    offset: T,
    poles: Vec<Monopole<T, D>>,
    /// Cap on a single step; also bounds the bisection bracket.
    max_radius: T,
    exclusion: T,
    revision: u64,
}

struct Eval<T, const D: usize> {
    h: T,
    grad: Vector<T, D>,
}

impl<T: Real, const D: usize> ImplicitMonopoles<T, D> {
    pub fn new(offset: T, poles: Vec<Monopole<T, D>>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::Config("monopole scene has no poles".into()));
        }
        let mut m = Self {
            offset,
            poles,
            max_radius: T::zero(),
            exclusion: T::zero(),
            revision: next_revision(),
        };
        m.validate()?;
        m.refresh_scales();
        Ok(m)
    }

    pub fn with_max_radius(mut self, r: T) -> Self {
        self.max_radius = r;
        self
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn poles(&self) -> &[Monopole<T, D>] {
        &self.poles
    }

    pub fn exclusion_radius(&self) -> T {
        self.exclusion
    }

    fn validate(&self) -> Result<()> {
        let finite = self.offset.is_finite() && self.poles.iter().all(|p| p.scale.is_finite() && p.position.is_finite());
        if !finite {
            return Err(Error::Degenerate("non-finite monopole parameter".into()));
        }
        Ok(())
    }

    fn refresh_scales(&mut self) {
        let extent = self.extent();
        self.exclusion = T::lit(1e-6) * extent;
        self.max_radius = T::lit(4.0) * extent;
    }

    fn pole_distances(&self, x: &Vector<T, D>) -> Result<Vec<T>> {
        self.poles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let r = x.distance(&p.position);
                if r <= self.exclusion {
                    Err(Error::Singularity(i))
                } else {
                    Ok(r)
                }
            })
            .collect()
    }

    pub fn value(&self, x: &Vector<T, D>) -> Result<T> {
        Ok(self.eval(x)?.h)
    }

    pub fn gradient(&self, x: &Vector<T, D>) -> Result<Vector<T, D>> {
        Ok(self.eval(x)?.grad)
    }

    fn eval(&self, x: &Vector<T, D>) -> Result<Eval<T, D>> {
        let rho = self.pole_distances(x)?;
        let mut h = self.offset;
        let mut grad = Vector::zero();
        for (p, r) in self.poles.iter().zip(&rho) {
            h = h + p.scale / *r;
            grad -= (*x - p.position) * (p.scale / (*r * *r * *r));
        }
        Ok(Eval { h, grad })
    }

    fn hessian(&self, x: &Vector<T, D>) -> Result<[[T; D]; D]> {
        let rho = self.pole_distances(x)?;
        let mut hess = [[T::zero(); D]; D];
        for (p, r) in self.poles.iter().zip(&rho) {
            let d = *x - p.position;
            let r3 = *r * *r * *r;
            let r5 = r3 * *r * *r;
            for i in 0..D {
                for j in 0..D {
                    let delta = if i == j { T::one() / r3 } else { T::zero() };
                    hess[i][j] = hess[i][j] - p.scale * (delta - T::lit(3.0) * d[i] * d[j] / r5);
                }
            }
        }
        Ok(hess)
    }

    /// Lower (`lower = true`) or upper bound of `h` over the ball `B(x, r)`.
    fn bound(&self, rho: &[T], r: T, lower: bool) -> T {
        let mut acc = self.offset;
        for (p, rp) in self.poles.iter().zip(rho) {
            let toward = p.scale.is_sign_negative() == lower;
            let term = if toward {
                if r >= *rp {
                    return if lower { T::neg_infinity() } else { T::infinity() };
                }
                p.scale / (*rp - r)
            } else {
                p.scale / (*rp + r)
            };
            acc = acc + term;
        }
        acc
    }

    /// Conservative zero-free radius around `x`, termination flag, and the
    /// gradient-projected closest-point estimate.
    pub fn implicit_step(&self, x: &Vector<T, D>, epsilon: T) -> Result<(T, bool, Vector<T, D>)> {
        let e = self.eval(x)?;
        let rho = self.pole_distances(x)?;
        let gn = e.grad.norm();
        let terminated = e.h.abs() < gn * epsilon;
        let closest = *x - e.grad * (e.h / (gn * gn));
        if e.h == T::zero() {
            return Ok((T::zero(), true, *x));
        }
        let lower = e.h > T::zero();
        let keeps_sign = |r: T| {
            let b = self.bound(&rho, r, lower);
            if lower {
                b > T::zero()
            } else {
                b < T::zero()
            }
        };
        let radius = if keeps_sign(self.max_radius) {
            self.max_radius
        } else {
            let (mut lo, mut hi) = (T::zero(), self.max_radius);
            for _ in 0..48 {
                let mid = (lo + hi) * T::lit(0.5);
                if keeps_sign(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        Ok((radius, terminated, closest))
    }

    fn query_at(&self, x: &Vector<T, D>, closest: Vector<T, D>) -> Result<BoundaryQuery<T, D>> {
        let g = self.eval(&closest)?.grad;
        if !(g.norm() > T::zero()) {
            return Err(Error::Numerical("vanishing level-set gradient".into()));
        }
        Ok(BoundaryQuery {
            point: *x,
            closest,
            distance: x.distance(&closest),
            normal: -g.normalized(),
            primitive: 0,
            local: T::zero(),
            revision: self.revision,
        })
    }

    fn param_derivative(&self, x: &Vector<T, D>) -> Result<SparseVec<T>> {
        let rho = self.pole_distances(x)?;
        let mut pairs = vec![(0, T::one())];
        for (i, (p, r)) in self.poles.iter().zip(&rho).enumerate() {
            let base = 1 + i * (D + 1);
            pairs.push((base, r.recip()));
            let w = p.scale / (*r * *r * *r);
            for k in 0..D {
                pairs.push((base + 1 + k, w * (x[k] - p.position[k])));
            }
        }
        Ok(SparseVec::from_pairs(self.num_params(), pairs))
    }
}

impl<T: Real, const D: usize> Boundary<T, D> for ImplicitMonopoles<T, D> {
    /// Newton projection onto the zero set along the gradient.
    fn closest(&self, x: &Vector<T, D>) -> Result<BoundaryQuery<T, D>> {
        let mut y = *x;
        for _ in 0..32 {
            let e = self.eval(&y)?;
            let g2 = e.grad.norm_squared();
            if !(g2 > T::zero()) {
                return Err(Error::Numerical("vanishing level-set gradient".into()));
            }
            let step = e.grad * (e.h / g2);
            y -= step;
            if step.norm() <= T::epsilon() * (T::one() + y.norm()) {
                break;
            }
        }
        self.query_at(x, y)
    }

    fn contains(&self, x: &Vector<T, D>) -> bool {
        self.eval(x).map(|e| e.h > T::zero()).unwrap_or(false)
    }

    fn walk_step(&self, x: &Vector<T, D>, epsilon: T) -> Result<WalkStep<T, D>> {
        let (radius, terminated, closest) = self.implicit_step(x, epsilon)?;
        let terminal = if terminated { Some(self.query_at(x, closest)?) } else { None };
        Ok(WalkStep { radius, terminal })
    }

    fn normal_velocity(&self, q: &BoundaryQuery<T, D>) -> Result<SparseVec<T>> {
        self.check_revision(q)?;
        let gn = self.eval(&q.closest)?.grad.norm();
        Ok(self.param_derivative(&q.closest)?.scaled(gn.recip()))
    }

    fn curvature(&self, q: &BoundaryQuery<T, D>) -> Result<T> {
        let g = self.eval(&q.closest)?.grad;
        let hess = self.hessian(&q.closest)?;
        let g2 = g.norm_squared();
        let mut lap = T::zero();
        let mut ghg = T::zero();
        for i in 0..D {
            lap = lap + hess[i][i];
            for j in 0..D {
                ghg = ghg + g[i] * hess[i][j] * g[j];
            }
        }
        Ok(-(lap * g2 - ghg) / (g2 * g2.sqrt()))
    }

    fn sample_boundary(&self, _rng: &mut RngStream) -> Result<BoundarySample<T, D>> {
        Err(Error::Unsupported("boundary sampling on an implicit boundary; use the band integral"))
    }

    fn measure(&self) -> Result<T> {
        Err(Error::Unsupported("boundary measure of an implicit boundary"))
    }

    fn bounding_box(&self) -> (Vector<T, D>, Vector<T, D>) {
        let mut lo = Vector::from_f64([f64::INFINITY; D]);
        let mut hi = Vector::from_f64([f64::NEG_INFINITY; D]);
        for p in &self.poles {
            lo = lo.min(&p.position);
            hi = hi.max(&p.position);
        }
        let total: T = self.poles.iter().map(|p| p.scale.abs()).sum();
        let pad = if self.offset < T::zero() { total / -self.offset } else { T::one() };
        let pad = Vector::from_f64([1.0; D]) * pad;
        (lo - pad, hi + pad)
    }

    fn params(&self) -> Vec<T> {
        let mut v = vec![self.offset];
        for p in &self.poles {
            v.push(p.scale);
            v.extend(p.position.0);
        }
        v
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Config("parameter count mismatch".into()));
        }
        let old = (self.offset, self.poles.clone());
        self.offset = params[0];
        for (i, p) in self.poles.iter_mut().enumerate() {
            let base = 1 + i * (D + 1);
            p.scale = params[base];
            for k in 0..D {
                p.position[k] = params[base + 1 + k];
            }
        }
        if let Err(e) = self.validate() {
            (self.offset, self.poles) = old;
            return Err(e);
        }
        self.refresh_scales();
        self.revision = next_revision();
        Ok(())
    }

    fn layout(&self) -> Vec<ParamInfo> {
        let mut v = vec![ParamInfo {
            representation: "monopoles",
            role: ParamRole::LevelOffset,
            element: 0,
            component: 0,
            group: None,
        }];
        for i in 0..self.poles.len() {
            v.push(ParamInfo {
                representation: "monopoles",
                role: ParamRole::PoleScale,
                element: i,
                component: 0,
                group: None,
            });
            for k in 0..D {
                v.push(ParamInfo {
                    representation: "monopoles",
                    role: ParamRole::PolePosition,
                    element: i,
                    component: k,
                    group: Some(i),
                });
            }
        }
        v
    }

    fn num_params(&self) -> usize {
        1 + self.poles.len() * (D + 1)
    }

    fn revision(&self) -> u64 {
        self.revision
    }

    fn implicit_band(&self, x: &Vector<T, D>) -> Option<Result<(T, SparseVec<T>)>> {
        Some(self.eval(x).and_then(|e| {
            let gn = e.grad.norm();
            let vn = self.param_derivative(x)?.scaled(gn.recip());
            Ok((e.h.abs() / gn, vn))
        }))
    }
}
