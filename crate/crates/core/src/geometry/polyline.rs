//! Closed polylines with vertex positions as parameters.

use super::{
    even_odd, next_revision, Boundary, BoundaryQuery, BoundarySample, ParamInfo, ParamRole, SegmentBvh,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

type V2<T> = Vector<T, 2>;

#[derive(Clone, Debug)]
struct Segment {
    a: usize,
    b: usize,
    /// +1 when the outward normal is the right-hand side of `a → b`.
    side: i8,
}

#[derive(Clone, Debug)]
pub struct PolylineBoundary<T> {
    vertices: Vec<V2<T>>,
    loops: Vec<Vec<usize>>,
    /// Optional per-vertex Dirichlet values, interpolated along segments.
    values: Option<Vec<T>>,
    segments: Vec<Segment>,
    coords: Vec<(V2<T>, V2<T>)>,
    cumulative: Vec<T>,
    bvh: SegmentBvh<T>,
    revision: u64,
}

impl<T: Real> PolylineBoundary<T> {
    pub fn new(vertices: Vec<V2<T>>, loops: Vec<Vec<usize>>) -> Result<Self> {
        let mut p = Self {
            vertices,
            loops,
            values: None,
            segments: Vec::new(),
            coords: Vec::new(),
            cumulative: Vec::new(),
            bvh: SegmentBvh::build(&[]),
            revision: 0,
        };
        p.validate_topology()?;
        p.rebuild()?;
        Ok(p)
    }

    /// Single loop through all vertices in order.
    pub fn closed(vertices: Vec<V2<T>>) -> Result<Self> {
        let n = vertices.len();
        Self::new(vertices, vec![(0..n).collect()])
    }

    /// Regular `n`-gon inscribed in a circle.
    pub fn regular(center: V2<T>, radius: T, n: usize) -> Result<Self> {
        let verts = (0..n)
            .map(|i| {
                let th = T::TAU() * T::count(i) / T::count(n);
                center + V2::new(th.cos(), th.sin()) * radius
            })
            .collect();
        Self::closed(verts)
    }

    pub fn with_values(mut self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.vertices.len() {
            return Err(Error::Config("one value per vertex required".into()));
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn vertices(&self) -> &[V2<T>] {
        &self.vertices
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn values(&self) -> Option<&[T]> {
        self.values.as_deref()
    }

    fn validate_topology(&self) -> Result<()> {
        if self.loops.is_empty() {
            return Err(Error::Config("polyline has no loops".into()));
        }
        let mut seen = vec![false; self.vertices.len()];
        for l in &self.loops {
            if l.len() < 3 {
                return Err(Error::Config("polyline loop needs at least 3 vertices".into()));
            }
            for &i in l {
                if i >= self.vertices.len() {
                    return Err(Error::Config(format!("vertex index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::Config(format!("vertex {i} used twice")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("unused polyline vertex".into()));
        }
        Ok(())
    }

    fn rebuild(&mut self) -> Result<()> {
        let mut raw = Vec::new();
        for (li, l) in self.loops.iter().enumerate() {
            for k in 0..l.len() {
                let (a, b) = (l[k], l[(k + 1) % l.len()]);
                if !(self.vertices[a].distance(&self.vertices[b]) > T::zero()) {
                    return Err(Error::Degenerate(format!("zero-length segment {a}-{b}")));
                }
                raw.push((li, a, b));
            }
        }
        let coords: Vec<_> = raw.iter().map(|&(_, a, b)| (self.vertices[a], self.vertices[b])).collect();
        // Loop orientation: signed area, flipped once per enclosing loop.
        let mut sides = Vec::with_capacity(self.loops.len());
        for (li, l) in self.loops.iter().enumerate() {
            let mut area = T::zero();
            for k in 0..l.len() {
                area = area + self.vertices[l[k]].cross(&self.vertices[l[(k + 1) % l.len()]]);
            }
            let probe = self.vertices[l[0]];
            let depth = self
                .loops
                .iter()
                .enumerate()
                .filter(|(lj, _)| *lj != li)
                .filter(|(_, other)| {
                    even_odd(
                        &probe,
                        (0..other.len()).map(|k| (self.vertices[other[k]], self.vertices[other[(k + 1) % other.len()]])),
                    )
                })
                .count();
            let mut side: i8 = if area > T::zero() { 1 } else { -1 };
            if depth % 2 == 1 {
                side = -side;
            }
            sides.push(side);
        }
        self.segments = raw.iter().map(|&(li, a, b)| Segment { a, b, side: sides[li] }).collect();
        let mut acc = T::zero();
        self.cumulative = coords
            .iter()
            .map(|(a, b)| {
                acc = acc + a.distance(b);
                acc
            })
            .collect();
        self.bvh = SegmentBvh::build(&coords);
        self.coords = coords;
        self.revision = next_revision();
        Ok(())
    }

    fn segment_normal(&self, s: usize) -> V2<T> {
        let (a, b) = self.coords[s];
        let t = (b - a).normalized();
        let right = V2::new(t.y(), -t.x());
        if self.segments[s].side > 0 {
            right
        } else {
            -right
        }
    }

    fn query_on_segment(&self, x: V2<T>, s: usize, t: T, d: T) -> BoundaryQuery<T, 2> {
        let (a, b) = self.coords[s];
        BoundaryQuery {
            point: x,
            closest: a.lerp(&b, t),
            distance: d,
            normal: self.segment_normal(s),
            primitive: s,
            local: t,
            revision: self.revision,
        }
    }

    /// Signed turning-angle curvature at a vertex, divided by the mean of the
    /// adjacent half-lengths.
    fn vertex_curvature(&self, v: usize) -> T {
        let l = self.loops.iter().find(|l| l.contains(&v)).expect("vertex in a loop");
        let k = l.iter().position(|&i| i == v).unwrap();
        let prev = self.vertices[l[(k + l.len() - 1) % l.len()]];
        let next = self.vertices[l[(k + 1) % l.len()]];
        let cur = self.vertices[v];
        let (e1, e2) = (cur - prev, next - cur);
        let angle = e1.cross(&e2).atan2(e1.dot(&e2));
        let seg = self.segments.iter().find(|s| s.a == v).expect("outgoing segment");
        let half = (e1.norm() + e2.norm()) * T::lit(0.5);
        let sign = if seg.side > 0 { T::one() } else { -T::one() };
        sign * angle / half
    }

    /// Moves vertices so that each loop has uniform edge length, keeping the
    /// vertex count and the first vertex of each loop.
    pub fn resample_uniform(&mut self) -> Result<()> {
        let mut verts = self.vertices.clone();
        for l in &self.loops {
            let n = l.len();
            let pts: Vec<V2<T>> = l.iter().map(|&i| self.vertices[i]).collect();
            let mut cum = vec![T::zero()];
            for k in 0..n {
                let d = pts[k].distance(&pts[(k + 1) % n]);
                cum.push(cum[k] + d);
            }
            let total = cum[n];
            let mut seg = 0;
            for (j, &vi) in l.iter().enumerate() {
                let target = total * T::count(j) / T::count(n);
                while seg + 1 < n && cum[seg + 1] <= target {
                    seg += 1;
                }
                let len = cum[seg + 1] - cum[seg];
                let t = if len > T::zero() { (target - cum[seg]) / len } else { T::zero() };
                verts[vi] = pts[seg].lerp(&pts[(seg + 1) % n], t);
            }
        }
        self.vertices = verts;
        self.rebuild()
    }
}

impl<T: Real> Boundary<T, 2> for PolylineBoundary<T> {
    fn closest(&self, x: &V2<T>) -> Result<BoundaryQuery<T, 2>> {
        let (s, t, d2) = self.bvh.nearest(&self.coords, x).ok_or_else(|| Error::Config("empty polyline".into()))?;
        Ok(self.query_on_segment(*x, s, t, d2.sqrt()))
    }

    fn contains(&self, x: &V2<T>) -> bool {
        even_odd(x, self.coords.iter().copied())
    }

    fn normal_velocity(&self, q: &BoundaryQuery<T, 2>) -> Result<SparseVec<T>> {
        self.check_revision(q)?;
        let seg = &self.segments[q.primitive];
        let (t, n) = (q.local, q.normal);
        let w = [(seg.a, T::one() - t), (seg.b, t)];
        let pairs = w.iter().flat_map(|&(v, wt)| (0..2).map(move |k| (2 * v + k, wt * n[k]))).collect();
        Ok(SparseVec::from_pairs(self.num_params(), pairs))
    }

    fn curvature(&self, q: &BoundaryQuery<T, 2>) -> Result<T> {
        let seg = &self.segments[q.primitive];
        let (ka, kb) = (self.vertex_curvature(seg.a), self.vertex_curvature(seg.b));
        Ok(ka + (kb - ka) * q.local)
    }

    fn sample_boundary(&self, rng: &mut RngStream) -> Result<BoundarySample<T, 2>> {
        let total = *self.cumulative.last().ok_or_else(|| Error::Config("empty polyline".into()))?;
        let target = rng.uniform::<T>() * total;
        let s = self.cumulative.partition_point(|c| *c <= target).min(self.coords.len() - 1);
        let start = if s == 0 { T::zero() } else { self.cumulative[s - 1] };
        let len = self.cumulative[s] - start;
        let t = ((target - start) / len).max(T::zero()).min(T::one());
        let mut query = self.query_on_segment(V2::zero(), s, t, T::zero());
        query.point = query.closest;
        Ok(BoundarySample { query, pdf: total.recip() })
    }

    fn measure(&self) -> Result<T> {
        self.cumulative.last().copied().ok_or_else(|| Error::Config("empty polyline".into()))
    }

    fn bounding_box(&self) -> (V2<T>, V2<T>) {
        let mut lo = V2::new(T::infinity(), T::infinity());
        let mut hi = V2::new(T::neg_infinity(), T::neg_infinity());
        for v in &self.vertices {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    fn params(&self) -> Vec<T> {
        self.vertices.iter().flat_map(|v| v.0).collect()
    }

    fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != 2 * self.vertices.len() {
            return Err(Error::Config("parameter count mismatch".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Degenerate("non-finite vertex".into()));
        }
        let old = std::mem::replace(&mut self.vertices, params.chunks(2).map(|c| V2::new(c[0], c[1])).collect());
        if let Err(e) = self.rebuild() {
            self.vertices = old;
            self.rebuild()?;
            return Err(e);
        }
        Ok(())
    }

    fn layout(&self) -> Vec<ParamInfo> {
        (0..self.vertices.len())
            .flat_map(|v| {
                (0..2).map(move |k| ParamInfo {
                    representation: "polyline",
                    role: ParamRole::VertexPosition,
                    element: v,
                    component: k,
                    group: Some(v),
                })
            })
            .collect()
    }

    fn num_params(&self) -> usize {
        2 * self.vertices.len()
    }

    fn revision(&self) -> u64 {
        self.revision
    }

    fn mapped_value(&self, q: &BoundaryQuery<T, 2>) -> Option<T> {
        let values = self.values.as_ref()?;
        let seg = &self.segments[q.primitive];
        Some(values[seg.a] + (values[seg.b] - values[seg.a]) * q.local)
    }

    fn mapped_derivative(&self, q: &BoundaryQuery<T, 2>) -> SparseVec<T> {
        let Some(values) = self.values.as_ref() else {
            return SparseVec::empty(self.num_params());
        };
        // Values are fixed; only the reference coordinate drifts as the
        // endpoints slide: ∂t/∂π = -(τ̇ · τ') / |τ'|².
        let seg = &self.segments[q.primitive];
        let (a, b) = self.coords[q.primitive];
        let tangent = b - a;
        let len2 = tangent.norm_squared();
        let dg_dt = values[seg.b] - values[seg.a];
        let t = q.local;
        let w = [(seg.a, T::one() - t), (seg.b, t)];
        let pairs = w
            .iter()
            .flat_map(|&(v, wt)| (0..2).map(move |k| (2 * v + k, -dg_dt * wt * tangent[k] / len2)))
            .collect();
        SparseVec::from_pairs(self.num_params(), pairs)
    }
}
