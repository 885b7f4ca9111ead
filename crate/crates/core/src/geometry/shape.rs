//! Closed set of planar representations behind one concrete type.

use super::{
    BezierChain, Boundary, BoundaryQuery, BoundarySample, ImplicitMonopoles, ParamInfo, PolylineBoundary, SphereSet,
    WalkStep,
};
use crate::error::Result;
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

type V2<T> = Vector<T, 2>;

#[derive(Clone, Debug)]
pub enum Shape2<T: Real> {
    Polyline(PolylineBoundary<T>),
    Bezier(BezierChain<T>),
    Monopoles(ImplicitMonopoles<T, 2>),
    Spheres(SphereSet<T, 2>),
}

macro_rules! dispatch {
    ($self:expr, $b:ident => $e:expr) => {
        match $self {
            Shape2::Polyline($b) => $e,
            Shape2::Bezier($b) => $e,
            Shape2::Monopoles($b) => $e,
            Shape2::Spheres($b) => $e,
        }
    };
}

impl<T: Real> Shape2<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape2::Polyline(_) => "polyline",
            Shape2::Bezier(_) => "bezier",
            Shape2::Monopoles(_) => "monopoles",
            Shape2::Spheres(_) => "spheres",
        }
    }

    /// Uniform arclength redistribution for polylines; no-op otherwise.
    pub fn resample(&mut self) -> Result<()> {
        match self {
            Shape2::Polyline(p) => p.resample_uniform(),
            _ => Ok(()),
        }
    }
}

impl<T: Real> Boundary<T, 2> for Shape2<T> {
    fn closest(&self, x: &V2<T>) -> Result<BoundaryQuery<T, 2>> {
        dispatch!(self, b => b.closest(x))
    }

    fn contains(&self, x: &V2<T>) -> bool {
        dispatch!(self, b => b.contains(x))
    }

    fn conservative_slack(&self) -> T {
        dispatch!(self, b => b.conservative_slack())
    }

    fn walk_step(&self, x: &V2<T>, epsilon: T) -> Result<WalkStep<T, 2>> {
        dispatch!(self, b => b.walk_step(x, epsilon))
    }

    fn normal_velocity(&self, q: &BoundaryQuery<T, 2>) -> Result<SparseVec<T>> {
        dispatch!(self, b => b.normal_velocity(q))
    }

    fn curvature(&self, q: &BoundaryQuery<T, 2>) -> Result<T> {
        dispatch!(self, b => b.curvature(q))
    }

    fn sample_boundary(&self, rng: &mut RngStream) -> Result<BoundarySample<T, 2>> {
        dispatch!(self, b => b.sample_boundary(rng))
    }

    fn measure(&self) -> Result<T> {
        dispatch!(self, b => b.measure())
    }

    fn bounding_box(&self) -> (V2<T>, V2<T>) {
        dispatch!(self, b => b.bounding_box())
    }

    fn params(&self) -> Vec<T> {
        dispatch!(self, b => b.params())
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        dispatch!(self, b => b.set_params(params))
    }

    fn layout(&self) -> Vec<ParamInfo> {
        dispatch!(self, b => b.layout())
    }

    fn revision(&self) -> u64 {
        dispatch!(self, b => b.revision())
    }

    fn num_params(&self) -> usize {
        dispatch!(self, b => b.num_params())
    }

    fn mapped_value(&self, q: &BoundaryQuery<T, 2>) -> Option<T> {
        dispatch!(self, b => b.mapped_value(q))
    }

    fn mapped_derivative(&self, q: &BoundaryQuery<T, 2>) -> SparseVec<T> {
        dispatch!(self, b => b.mapped_derivative(q))
    }

    fn project_constraints(&mut self) {
        dispatch!(self, b => b.project_constraints())
    }

    fn implicit_band(&self, x: &V2<T>) -> Option<Result<(T, SparseVec<T>)>> {
        dispatch!(self, b => b.implicit_band(x))
    }
}
