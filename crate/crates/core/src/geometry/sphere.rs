//! Balls and holes (analytic validation geometry).

use super::{next_revision, Boundary, BoundaryQuery, BoundarySample, ParamInfo, ParamRole};
use crate::error::{Error, Result};
use crate::kernels::sphere_area;
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq)]
pub struct SpherePrimitive<T, const D: usize> {
    pub center: Vector<T, D>,
    pub radius: T,
    /// `true`: the domain lies inside the sphere. `false`: the sphere is a
    /// hole and the outward normal points toward its centre.
    pub solid: bool,
    /// Dirichlet value carried by this sphere.
    pub value: T,
}

/// Intersection of ball interiors and hole exteriors. Spheres are assumed
/// not to intersect each other.
#[derive(Clone, Debug)]
pub struct SphereSet<T, const D: usize> {
    spheres: Vec<SpherePrimitive<T, D>>,
    revision: u64,
}

impl<T: Real, const D: usize> SphereSet<T, D> {
    pub fn new(spheres: Vec<SpherePrimitive<T, D>>) -> Result<Self> {
        if spheres.is_empty() {
            return Err(Error::Config("empty sphere list".into()));
        }
        if D != 2 && D != 3 {
            return Err(Error::Config(format!("sphere dimension {D} not in {{2, 3}}")));
        }
        for s in &spheres {
            if !(s.radius > T::zero()) || !s.center.is_finite() {
                return Err(Error::Degenerate("sphere radius must be positive".into()));
            }
        }
        Ok(Self { spheres, revision: next_revision() })
    }

    /// Single ball with constant boundary value.
    pub fn ball(center: Vector<T, D>, radius: T, value: T) -> Result<Self> {
        Self::new(vec![SpherePrimitive { center, radius, solid: true, value }])
    }

    /// Region between two concentric spheres.
    pub fn annulus(center: Vector<T, D>, inner: T, outer: T, inner_value: T, outer_value: T) -> Result<Self> {
        if !(inner < outer) {
            return Err(Error::Degenerate("annulus needs inner < outer".into()));
        }
        Self::new(vec![
            SpherePrimitive { center, radius: outer, solid: true, value: outer_value },
            SpherePrimitive { center, radius: inner, solid: false, value: inner_value },
        ])
    }

    pub fn spheres(&self) -> &[SpherePrimitive<T, D>] {
        &self.spheres
    }

    fn params_per_sphere() -> usize {
        D + 1
    }

    fn local_coordinate(dir: &Vector<T, D>) -> T {
        if D == 2 {
            let a = dir[1].atan2(dir[0]) / T::TAU();
            if a < T::zero() {
                a + T::one()
            } else {
                a
            }
        } else {
            (T::one() - dir[D - 1]) * T::lit(0.5)
        }
    }
}

impl<T: Real, const D: usize> Boundary<T, D> for SphereSet<T, D> {
    fn closest(&self, x: &Vector<T, D>) -> Result<BoundaryQuery<T, D>> {
        let mut best: Option<BoundaryQuery<T, D>> = None;
        for (i, s) in self.spheres.iter().enumerate() {
            let rel = *x - s.center;
            let r = rel.norm();
            let dir = if r > T::zero() { rel * r.recip() } else { Vector::axis(0) };
            let d = (r - s.radius).abs();
            if best.as_ref().map_or(true, |b| d < b.distance) {
                let closest = s.center + dir * s.radius;
                best = Some(BoundaryQuery {
                    point: *x,
                    closest,
                    distance: d,
                    normal: if s.solid { dir } else { -dir },
                    primitive: i,
                    local: Self::local_coordinate(&dir),
                    revision: self.revision,
                });
            }
        }
        best.ok_or_else(|| Error::Config("empty sphere list".into()))
    }

    fn contains(&self, x: &Vector<T, D>) -> bool {
        self.spheres.iter().all(|s| {
            let r = x.distance(&s.center);
            if s.solid {
                r < s.radius
            } else {
                r > s.radius
            }
        })
    }

    fn normal_velocity(&self, q: &BoundaryQuery<T, D>) -> Result<SparseVec<T>> {
        self.check_revision(q)?;
        let s = &self.spheres[q.primitive];
        let base = q.primitive * Self::params_per_sphere();
        let mut pairs: Vec<(usize, T)> = (0..D).map(|k| (base + k, q.normal[k])).collect();
        pairs.push((base + D, if s.solid { T::one() } else { -T::one() }));
        Ok(SparseVec::from_pairs(self.num_params(), pairs))
    }

    fn curvature(&self, q: &BoundaryQuery<T, D>) -> Result<T> {
        let s = &self.spheres[q.primitive];
        let k = T::count(D - 1) / s.radius;
        Ok(if s.solid { k } else { -k })
    }

    fn sample_boundary(&self, rng: &mut RngStream) -> Result<BoundarySample<T, D>> {
        let total = self.measure()?;
        let mut pick = rng.uniform::<T>() * total;
        let mut idx = self.spheres.len() - 1;
        for (i, s) in self.spheres.iter().enumerate() {
            let a = sphere_area(D, s.radius);
            if pick < a {
                idx = i;
                break;
            }
            pick = pick - a;
        }
        let s = &self.spheres[idx];
        let dir = rng.unit_sphere::<T, D>();
        let closest = s.center + dir * s.radius;
        Ok(BoundarySample {
            query: BoundaryQuery {
                point: closest,
                closest,
                distance: T::zero(),
                normal: if s.solid { dir } else { -dir },
                primitive: idx,
                local: Self::local_coordinate(&dir),
                revision: self.revision,
            },
            pdf: total.recip(),
        })
    }

    fn measure(&self) -> Result<T> {
        Ok(self.spheres.iter().map(|s| sphere_area(D, s.radius)).sum())
    }

    fn bounding_box(&self) -> (Vector<T, D>, Vector<T, D>) {
        let solids: Vec<_> = self.spheres.iter().filter(|s| s.solid).collect();
        let set: Vec<_> = if solids.is_empty() { self.spheres.iter().collect() } else { solids };
        let mut lo = Vector([T::infinity(); D]);
        let mut hi = Vector([T::neg_infinity(); D]);
        for s in set {
            let r = Vector([s.radius; D]);
            lo = lo.min(&(s.center - r));
            hi = hi.max(&(s.center + r));
        }
        (lo, hi)
    }

    fn params(&self) -> Vec<T> {
        self.spheres
            .iter()
            .flat_map(|s| s.center.0.iter().copied().chain(std::iter::once(s.radius)))
            .collect()
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        let per = Self::params_per_sphere();
        if params.len() != self.spheres.len() * per {
            return Err(Error::Config("parameter count mismatch".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Degenerate("non-finite sphere parameter".into()));
        }
        if params.chunks(per).any(|c| !(c[D] > T::zero())) {
            return Err(Error::Degenerate("sphere radius must be positive".into()));
        }
        for (s, c) in self.spheres.iter_mut().zip(params.chunks(per)) {
            s.center.0.copy_from_slice(&c[..D]);
            s.radius = c[D];
        }
        self.revision = next_revision();
        Ok(())
    }

    fn layout(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        for i in 0..self.spheres.len() {
            for k in 0..D {
                out.push(ParamInfo {
                    representation: "sphere",
                    role: ParamRole::Center,
                    element: i,
                    component: k,
                    group: Some(i),
                });
            }
            out.push(ParamInfo {
                representation: "sphere",
                role: ParamRole::Radius,
                element: i,
                component: 0,
                group: None,
            });
        }
        out
    }

    fn num_params(&self) -> usize {
        self.spheres.len() * Self::params_per_sphere()
    }

    fn revision(&self) -> u64 {
        self.revision
    }

    fn mapped_value(&self, q: &BoundaryQuery<T, D>) -> Option<T> {
        Some(self.spheres[q.primitive].value)
    }
}
