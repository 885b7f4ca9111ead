//! Boundary representations and the queries walks need from them.
//!
//! Every representation exposes its degrees of freedom as a flat parameter
//! vector. Queries are pure; `set_params` installs a new parameter vector
//! and bumps the revision so that stale [`BoundaryQuery`] values are
//! rejected.

mod bezier;
mod bvh;
mod monopoles;
mod polyline;
mod shape;
mod sphere;

use std::sync::atomic::{AtomicU64, Ordering};

pub use bezier::{BezierChain, FLATNESS};
pub use bvh::SegmentBvh;
pub use monopoles::{ImplicitMonopoles, Monopole};
pub use polyline::PolylineBoundary;
pub use shape::Shape2;
pub use sphere::{SpherePrimitive, SphereSet};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

static REVISION: AtomicU64 = AtomicU64::new(1);

/// Fresh, process-unique revision number.
pub(crate) fn next_revision() -> u64 {
    REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Closest-point query result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryQuery<T, const D: usize> {
    pub point: Vector<T, D>,
    pub closest: Vector<T, D>,
    pub distance: T,
    /// Outward unit normal of the domain at `closest`.
    pub normal: Vector<T, D>,
    pub primitive: usize,
    /// Segment/curve parameter in `[0, 1]`, or an angular coordinate.
    pub local: T,
    pub revision: u64,
}

/// One walk-on-spheres step: a conservative empty-ball radius, and the
/// terminal boundary query when the point lies in the ε-shell.
#[derive(Clone, Copy, Debug)]
pub struct WalkStep<T, const D: usize> {
    pub radius: T,
    pub terminal: Option<BoundaryQuery<T, D>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample<T, const D: usize> {
    pub query: BoundaryQuery<T, D>,
    /// Density with respect to boundary measure: `1 / |∂Ω|`.
    pub pdf: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    VertexPosition,
    ControlPoint,
    Center,
    Radius,
    PoleScale,
    PolePosition,
    LevelOffset,
    DataValue,
}

/// Meaning of one entry of the parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamInfo {
    pub representation: &'static str,
    pub role: ParamRole,
    /// Owning element (vertex, control point, sphere, pole, anchor).
    pub element: usize,
    /// Spatial axis for positions, zero otherwise.
    pub component: usize,
    /// Entries sharing a group form one spatial vector (for Vector Adam).
    pub group: Option<usize>,
}

pub trait Boundary<T: Real, const D: usize>: Send + Sync {
    /// Nearest boundary point over all primitives. Does not check domain
    /// membership.
    fn closest(&self, x: &Vector<T, D>) -> Result<BoundaryQuery<T, D>>;

    fn contains(&self, x: &Vector<T, D>) -> bool;

    /// Amount subtracted from the reported distance to obtain a radius that
    /// is guaranteed boundary-free.
    fn conservative_slack(&self) -> T {
        T::zero()
    }

    fn walk_step(&self, x: &Vector<T, D>, epsilon: T) -> Result<WalkStep<T, D>> {
        let q = self.closest(x)?;
        let radius = (q.distance - self.conservative_slack()).max(T::zero());
        Ok(WalkStep {
            radius,
            terminal: (q.distance < epsilon).then_some(q),
        })
    }

    /// Normal speed of the boundary at `q.closest` under a unit change of each
    /// parameter.
    fn normal_velocity(&self, q: &BoundaryQuery<T, D>) -> Result<SparseVec<T>>;

    /// Signed curvature (sum of principal curvatures in 3D), positive where
    /// the boundary is convex with respect to the outward normal.
    fn curvature(&self, q: &BoundaryQuery<T, D>) -> Result<T>;

    fn sample_boundary(&self, rng: &mut RngStream) -> Result<BoundarySample<T, D>>;

    /// Total boundary measure.
    fn measure(&self) -> Result<T>;

    fn bounding_box(&self) -> (Vector<T, D>, Vector<T, D>);

    fn params(&self) -> Vec<T>;

    fn set_params(&mut self, params: &[T]) -> Result<()>;

    fn layout(&self) -> Vec<ParamInfo>;

    fn revision(&self) -> u64;

    fn num_params(&self) -> usize {
        self.layout().len()
    }

    /// Boundary data carried by the representation itself (per-primitive or
    /// per-anchor values), if any.
    fn mapped_value(&self, _q: &BoundaryQuery<T, D>) -> Option<T> {
        None
    }

    /// Parameter derivative of the mapped data at a fixed spatial point:
    /// the data's own parameter dependence plus the drift of the reference
    /// coordinate along the moving boundary.
    fn mapped_derivative(&self, _q: &BoundaryQuery<T, D>) -> SparseVec<T> {
        SparseVec::empty(self.num_params())
    }

    /// Re-impose representation constraints after a parameter update.
    fn project_constraints(&mut self) {}

    /// Implicit representations: normal velocity field evaluated off the
    /// zero set, `∂h/∂π / |∇h|`, and an estimate of the distance to the
    /// zero set. `None` for explicit representations.
    fn implicit_band(&self, _x: &Vector<T, D>) -> Option<Result<(T, SparseVec<T>)>> {
        None
    }

    fn extent(&self) -> T {
        let (lo, hi) = self.bounding_box();
        (0..D).map(|i| hi[i] - lo[i]).fold(T::zero(), T::max)
    }

    fn check_revision(&self, q: &BoundaryQuery<T, D>) -> Result<()> {
        if q.revision != self.revision() {
            return Err(Error::StaleQuery { found: q.revision, expected: self.revision() });
        }
        Ok(())
    }
}

/// Closest boundary point for a point strictly inside the domain.
pub fn distance_to_boundary<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    x: &Vector<T, D>,
) -> Result<BoundaryQuery<T, D>> {
    if !boundary.contains(x) {
        return Err(Error::OutsideDomain);
    }
    boundary.closest(x)
}

/// Closest point on segment `[a, b]` to `x`: returns `(parameter, squared distance)`.
#[inline]
pub(crate) fn segment_closest<T: Real>(x: &Vector<T, 2>, a: &Vector<T, 2>, b: &Vector<T, 2>) -> (T, T) {
    let ab = *b - *a;
    let len2 = ab.norm_squared();
    let t = if len2 > T::zero() {
        ((*x - *a).dot(&ab) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let p = *a + ab * t;
    (t, (*x - p).norm_squared())
}

/// Even-odd point-in-polygon over a segment soup.
pub(crate) fn even_odd<T: Real>(x: &Vector<T, 2>, segments: impl Iterator<Item = (Vector<T, 2>, Vector<T, 2>)>) -> bool {
    let mut inside = false;
    for (a, b) in segments {
        if (a.y() > x.y()) != (b.y() > x.y()) {
            let xi = a.x() + (x.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if x.x() < xi {
                inside = !inside;
            }
        }
    }
    inside
}
