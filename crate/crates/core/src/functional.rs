//! Shape functionals `J = ∫_Ω M L(u) + ∫_∂Ω m ℓ(u) + regularizers` and their
//! parameter gradients via the Reynolds transport theorem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvp::{AmbientField, Bvp};
use crate::diff::{coupled_walks, CoupledEstimate};
use crate::error::{Error, Result};
use crate::forward::{wos_solve, SolverConfig};
use crate::geometry::{Boundary, BoundaryQuery};
use crate::grid::GridField;
use crate::rng::{mix, RngStream};
use crate::scalar::Real;
use crate::vector::Vector;

const REGION_TAG: u64 = 0x5EED_0001;
const BOUNDARY_TAG: u64 = 0x5EED_0002;
const BAND_TAG: u64 = 0x5EED_0003;
const REGULARIZER_TAG: u64 = 0x5EED_0004;

/// Pointwise loss of the solution against a reference value.
#[derive(Clone, Debug, PartialEq)]
pub enum Loss<T> {
    /// `½ (u − r)²`.
    Squared,
    /// `√((u − r)² + δ²) − δ`.
    L1Smooth { delta: T },
    /// Piecewise-linear table over the error `u − r`, clamped at the ends.
    Table { errors: Vec<T>, values: Vec<T>, slopes: Vec<T> },
}

impl<T: Real> Loss<T> {
    pub fn table(errors: Vec<T>, values: Vec<T>, slopes: Vec<T>) -> Result<Self> {
        if errors.len() < 2 || values.len() != errors.len() || slopes.len() != errors.len() {
            return Err(Error::Config("loss table needs matching columns of length >= 2".into()));
        }
        if errors.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("loss table errors must increase".into()));
        }
        Ok(Loss::Table { errors, values, slopes })
    }

    fn lookup(errors: &[T], col: &[T], e: T) -> T {
        let n = errors.len();
        if e <= errors[0] {
            return col[0];
        }
        if e >= errors[n - 1] {
            return col[n - 1];
        }
        let i = errors.partition_point(|x| *x <= e) - 1;
        let t = (e - errors[i]) / (errors[i + 1] - errors[i]);
        col[i] + (col[i + 1] - col[i]) * t
    }

    pub fn value(&self, u: T, r: T) -> T {
        let e = u - r;
        match self {
            Loss::Squared => T::lit(0.5) * e * e,
            Loss::L1Smooth { delta } => (e * e + *delta * *delta).sqrt() - *delta,
            Loss::Table { errors, values, .. } => Self::lookup(errors, values, e),
        }
    }

    pub fn derivative(&self, u: T, r: T) -> T {
        let e = u - r;
        match self {
            Loss::Squared => e,
            Loss::L1Smooth { delta } => e / (e * e + *delta * *delta).sqrt(),
            Loss::Table { errors, slopes, .. } => Self::lookup(errors, slopes, e),
        }
    }

    pub fn is_squared(&self) -> bool {
        matches!(self, Loss::Squared)
    }
}

/// Binary region selector.
#[derive(Clone, Debug)]
pub enum Mask<T: Real, const D: usize> {
    All,
    Ball { center: Vector<T, D>, radius: T },
    Box { lo: Vector<T, D>, hi: Vector<T, D> },
    Ring { center: Vector<T, D>, inner: T, outer: T },
    /// Nonzero cells of a planar grid channel.
    Grid { grid: GridField<T>, channel: usize },
}

impl<T: Real, const D: usize> Mask<T, D> {
    pub fn contains(&self, x: &Vector<T, D>) -> bool {
        match self {
            Mask::All => true,
            Mask::Ball { center, radius } => x.distance(center) < *radius,
            Mask::Box { lo, hi } => (0..D).all(|k| x[k] >= lo[k] && x[k] <= hi[k]),
            Mask::Ring { center, inner, outer } => {
                let r = x.distance(center);
                r >= *inner && r < *outer
            }
            Mask::Grid { grid, channel } => {
                let (lo, hi) = grid.bounds();
                if x[0] < lo.x() || x[0] > hi.x() || x[1] < lo.y() || x[1] > hi.y() {
                    return false;
                }
                let h = grid.cell_size();
                let i = ((x[0] - lo.x()) / h.x()).floor().to_usize().unwrap_or(0).min(grid.nx() - 1);
                let j = ((x[1] - lo.y()) / h.y()).floor().to_usize().unwrap_or(0).min(grid.ny() - 1);
                grid.get(i, j, *channel) != T::zero()
            }
        }
    }

    /// Axis-aligned bounds, if the mask is bounded.
    pub fn bounds(&self) -> Option<(Vector<T, D>, Vector<T, D>)> {
        match self {
            Mask::All => None,
            Mask::Ball { center, radius } | Mask::Ring { center, outer: radius, .. } => {
                let r = Vector([*radius; D]);
                Some((*center - r, *center + r))
            }
            Mask::Box { lo, hi } => Some((*lo, *hi)),
            Mask::Grid { grid, .. } => {
                let (lo, hi) = grid.bounds();
                let mut a = Vector::zero();
                let mut b = Vector::zero();
                a[0] = lo.x();
                a[1] = lo.y();
                b[0] = hi.x();
                b[1] = hi.y();
                Some((a, b))
            }
        }
    }
}

/// Target values `u_ref`.
#[derive(Clone, Debug)]
pub enum Reference<T: Real, const D: usize> {
    Constant(T),
    Field(AmbientField<T, D>),
    Grid { grid: GridField<T>, channel: usize },
}

impl<T: Real, const D: usize> Reference<T, D> {
    pub fn value(&self, x: &Vector<T, D>) -> T {
        match self {
            Reference::Constant(c) => *c,
            Reference::Field(f) => f.value(x),
            Reference::Grid { grid, channel } => grid.sample(&Vector::new(x[0], x[1]), *channel),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryLoss<T: Real, const D: usize> {
    pub loss: Loss<T>,
    pub mask: Mask<T, D>,
    pub reference: Reference<T, D>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    /// `α |∂Ω|`, gradient `α ∫ κ v_n`.
    Length,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularizer<T> {
    pub kind: RegularizerKind,
    pub strength: T,
}

#[derive(Clone, Debug)]
pub struct FunctionalSpec<T: Real, const D: usize> {
    pub loss: Loss<T>,
    pub mask: Mask<T, D>,
    pub reference: Reference<T, D>,
    pub boundary_loss: Option<BoundaryLoss<T, D>>,
    /// When set, `u` is extended by this constant outside Ω and the
    /// interior term integrates over the whole mask.
    pub exterior_value: Option<T>,
    pub regularizers: Vec<Regularizer<T>>,
    /// Uniform draws in the sampling region for the interior term.
    pub interior_samples: usize,
    /// Boundary (or band) samples for boundary terms.
    pub boundary_samples: usize,
    /// Band half-width ε_b for implicit boundaries (absolute).
    pub band: T,
    /// Sampling region; defaults to the mask bounds, else the scene bounds.
    pub region: Option<(Vector<T, D>, Vector<T, D>)>,
}

impl<T: Real, const D: usize> FunctionalSpec<T, D> {
    pub fn squared(reference: Reference<T, D>, mask: Mask<T, D>) -> Self {
        Self {
            loss: Loss::Squared,
            mask,
            reference,
            boundary_loss: None,
            exterior_value: None,
            regularizers: Vec::new(),
            interior_samples: 64,
            boundary_samples: 64,
            band: T::lit(1e-2),
            region: None,
        }
    }

    fn region<B: Boundary<T, D> + ?Sized>(&self, boundary: &B) -> (Vector<T, D>, Vector<T, D>) {
        if let Some(r) = self.region {
            return r;
        }
        let (blo, bhi) = boundary.bounding_box();
        match self.mask.bounds() {
            Some((lo, hi)) if self.exterior_value.is_some() => (lo, hi),
            Some((lo, hi)) => (lo.max(&blo), hi.min(&bhi)),
            None => (blo, bhi),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductEstimator {
    Uncorrelated,
    Correlated,
    #[default]
    Ustat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProductEstimatorConfig {
    pub kind: ProductEstimator,
    pub batch: usize,
}

impl Default for ProductEstimatorConfig {
    fn default() -> Self {
        Self { kind: ProductEstimator::Ustat, batch: 8 }
    }
}

/// Estimate of `E[û] · E[u̇̂]` from coupled samples, as a dense vector.
pub fn product_estimate<T: Real>(
    samples: &[CoupledEstimate<T>],
    num_params: usize,
    cfg: &ProductEstimatorConfig,
) -> Result<Vec<T>> {
    let n = samples.len();
    let mut out = vec![T::zero(); num_params];
    match cfg.kind {
        ProductEstimator::Correlated => {
            if n == 0 {
                return Err(Error::Config("product estimate needs samples".into()));
            }
            let mean_u = samples.iter().map(|s| s.value).sum::<T>() / T::count(n);
            for s in samples {
                s.derivative.add_scaled_to(mean_u / T::count(n), &mut out);
            }
        }
        ProductEstimator::Uncorrelated => {
            if n < 2 {
                return Err(Error::Config("uncorrelated product estimate needs at least 2 walks".into()));
            }
            let (a, b) = samples.split_at(n / 2);
            let mean_u = a.iter().map(|s| s.value).sum::<T>() / T::count(a.len());
            for s in b {
                s.derivative.add_scaled_to(mean_u / T::count(b.len()), &mut out);
            }
        }
        ProductEstimator::Ustat => {
            if cfg.batch < 2 {
                return Err(Error::Config("U-statistic batch must be at least 2".into()));
            }
            let batches: Vec<&[CoupledEstimate<T>]> = samples.chunks(cfg.batch).filter(|c| c.len() >= 2).collect();
            if batches.is_empty() {
                return Err(Error::Config("U-statistic needs at least 2 walks".into()));
            }
            let nb = T::count(batches.len());
            for batch in batches {
                let m = batch.len();
                let total: T = batch.iter().map(|s| s.value).sum();
                let norm = T::count(m * (m - 1)) * nb;
                for s in batch {
                    s.derivative.add_scaled_to((total - s.value) / norm, &mut out);
                }
            }
        }
    }
    Ok(out)
}

/// Unbiased estimate of `E[û]²` from independent samples (falls back to
/// the plain square for a single sample).
fn square_of_mean<T: Real>(values: &[T]) -> T {
    let n = values.len();
    let s: T = values.iter().copied().sum();
    if n < 2 {
        return s * s;
    }
    let s2: T = values.iter().map(|v| *v * *v).sum();
    (s * s - s2) / T::count(n * (n - 1))
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::count(values.len().max(1))
}

/// Loss at one interior point from independent solution samples.
fn point_loss<T: Real>(loss: &Loss<T>, values: &[T], r: T) -> T {
    if loss.is_squared() {
        T::lit(0.5) * square_of_mean(values) - r * mean(values) + T::lit(0.5) * r * r
    } else {
        loss.value(mean(values), r)
    }
}

#[derive(Clone, Copy, Debug)]
struct RegionDraw<T, const D: usize> {
    index: usize,
    x: Vector<T, D>,
    inside: bool,
}

fn region_draws<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    spec: &FunctionalSpec<T, D>,
    seed: u64,
    implicit: bool,
) -> (T, Vec<RegionDraw<T, D>>) {
    let (lo, hi) = spec.region(boundary);
    let mut volume = T::one();
    for k in 0..D {
        volume = volume * (hi[k] - lo[k]).max(T::zero());
    }
    let draws = (0..spec.interior_samples)
        .filter_map(|i| {
            let mut rng = RngStream::new(mix(seed, REGION_TAG), i as u64);
            let mut x = lo;
            for k in 0..D {
                x[k] = lo[k] + (hi[k] - lo[k]) * rng.uniform::<T>();
            }
            if !spec.mask.contains(&x) {
                return None;
            }
            let mut inside = boundary.contains(&x);
            if inside && implicit {
                if let Some(Ok((d, _))) = boundary.implicit_band(&x) {
                    inside = d >= spec.band;
                }
            }
            (inside || spec.exterior_value.is_some()).then_some(RegionDraw { index: i, x, inside })
        })
        .collect();
    (volume / T::count(spec.interior_samples.max(1)), draws)
}

fn is_implicit<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(boundary: &B) -> bool {
    let (lo, hi) = boundary.bounding_box();
    boundary.implicit_band(&lo.lerp(&hi, T::lit(0.5))).is_some()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalEstimate<T> {
    pub value: T,
    pub interior: T,
    pub boundary: T,
    pub regularizer: T,
    pub interior_points: usize,
}

/// Monte Carlo estimate of `J`.
pub fn estimate_functional<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    cfg: &SolverConfig<T>,
) -> Result<FunctionalEstimate<T>> {
    cfg.validate()?;
    let implicit = is_implicit(boundary);
    let (weight, draws) = region_draws(boundary, spec, cfg.seed, implicit);
    let terms: Vec<T> = draws
        .par_iter()
        .map(|d| {
            let r = spec.reference.value(&d.x);
            if !d.inside {
                let ext = spec.exterior_value.unwrap_or(T::zero());
                return Ok(spec.loss.value(ext, r));
            }
            let values = (0..cfg.walks)
                .map(|w| {
                    let mut rng = RngStream::for_walk(cfg.seed, d.index as u64, w as u64);
                    Ok(wos_solve(boundary, bvp, cfg, &d.x, &mut rng)?.value)
                })
                .collect::<Result<Vec<T>>>()?;
            Ok(point_loss(&spec.loss, &values, r))
        })
        .collect::<Result<_>>()?;
    let interior = terms.iter().copied().sum::<T>() * weight;
    let boundary_term = match &spec.boundary_loss {
        Some(bl) if !implicit => {
            let n = spec.boundary_samples.max(1);
            let mut acc = T::zero();
            for j in 0..n {
                let mut rng = RngStream::new(mix(cfg.seed, BOUNDARY_TAG), j as u64);
                let s = boundary.sample_boundary(&mut rng)?;
                if bl.mask.contains(&s.query.closest) {
                    let g = bvp.data.value(boundary, &s.query)?;
                    acc = acc + bl.loss.value(g, bl.reference.value(&s.query.closest)) / s.pdf;
                }
            }
            acc / T::count(n)
        }
        _ => T::zero(),
    };
    let regularizer = regularizer_value(boundary, &spec.regularizers)?;
    Ok(FunctionalEstimate {
        value: interior + boundary_term + regularizer,
        interior,
        boundary: boundary_term,
        regularizer,
        interior_points: draws.len(),
    })
}

fn regularizer_value<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    regs: &[Regularizer<T>],
) -> Result<T> {
    let mut v = T::zero();
    for r in regs {
        match r.kind {
            RegularizerKind::Length => v = v + r.strength * boundary.measure()?,
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate<T> {
    pub gradient: Vec<T>,
    /// Loss estimated from the same walks.
    pub loss: T,
    pub interior_points: usize,
    pub offset_failures: usize,
    pub truncated: usize,
    /// Walk steps taken, including nested walks' outer steps.
    pub steps: usize,
}

/// Interior contribution `L′(u) u̇` at one point.
fn interior_gradient<T: Real>(
    loss: &Loss<T>,
    walks: &[CoupledEstimate<T>],
    r: T,
    num_params: usize,
    est: &ProductEstimatorConfig,
) -> Result<Vec<T>> {
    if loss.is_squared() {
        let mut g = product_estimate(walks, num_params, est)?;
        let scale = -r / T::count(walks.len());
        for w in walks {
            w.derivative.add_scaled_to(scale, &mut g);
        }
        return Ok(g);
    }
    let half = (walks.len() / 2).max(1).min(walks.len());
    let (a, b) = walks.split_at(if walks.len() >= 2 { half } else { 0 });
    let b = if b.is_empty() { a } else { b };
    let u: Vec<T> = a.iter().map(|w| w.value).collect();
    let dl = loss.derivative(mean(&u), r);
    let mut g = vec![T::zero(); num_params];
    for w in b {
        w.derivative.add_scaled_to(dl / T::count(b.len()), &mut g);
    }
    Ok(g)
}

/// Gradient of `J` with respect to every scene parameter.
pub fn functional_gradient<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    cfg: &SolverConfig<T>,
    est: &ProductEstimatorConfig,
) -> Result<GradientEstimate<T>> {
    cfg.validate()?;
    let n = boundary.num_params();
    let implicit = is_implicit(boundary);
    let (weight, draws) = region_draws(boundary, spec, cfg.seed, implicit);

    struct PointTerm<T> {
        grad: Vec<T>,
        loss: T,
        failures: usize,
        truncated: usize,
        steps: usize,
    }
    let terms: Vec<PointTerm<T>> = draws
        .par_iter()
        .map(|d| {
            let r = spec.reference.value(&d.x);
            if !d.inside {
                let ext = spec.exterior_value.unwrap_or(T::zero());
                return Ok(PointTerm {
                    grad: Vec::new(),
                    loss: spec.loss.value(ext, r),
                    failures: 0,
                    truncated: 0,
                    steps: 0,
                });
            }
            let walks = coupled_walks(boundary, bvp, cfg, &d.x, d.index as u64)?;
            let values: Vec<T> = walks.iter().map(|w| w.value).collect();
            Ok(PointTerm {
                grad: interior_gradient(&spec.loss, &walks, r, n, est)?,
                loss: point_loss(&spec.loss, &values, r),
                failures: walks.iter().filter(|w| w.offset_failed).count(),
                truncated: walks.iter().filter(|w| w.truncated).count(),
                steps: walks.iter().map(|w| w.steps).sum(),
            })
        })
        .collect::<Result<_>>()?;

    let mut gradient = vec![T::zero(); n];
    let mut loss = T::zero();
    let (mut failures, mut truncated, mut steps) = (0, 0, 0);
    for t in &terms {
        for (g, v) in gradient.iter_mut().zip(&t.grad) {
            *g = *g + *v * weight;
        }
        loss = loss + t.loss * weight;
        failures += t.failures;
        truncated += t.truncated;
        steps += t.steps;
    }

    let flux = if implicit {
        band_flux(boundary, bvp, spec, cfg.seed)?
    } else {
        boundary_flux(boundary, bvp, spec, cfg.seed)?
    };
    for (g, v) in gradient.iter_mut().zip(&flux.0) {
        *g = *g + *v;
    }
    loss = loss + flux.1;
    if !implicit {
        for r in &spec.regularizers {
            let g = length_regularizer_gradient(boundary, r.strength, spec.boundary_samples, mix(cfg.seed, REGULARIZER_TAG))?;
            for (a, b) in gradient.iter_mut().zip(&g) {
                *a = *a + *b;
            }
        }
    }
    loss = loss + regularizer_value(boundary, &spec.regularizers).unwrap_or(T::zero());
    Ok(GradientEstimate {
        gradient,
        loss,
        interior_points: draws.len(),
        offset_failures: failures,
        truncated,
        steps,
    })
}

/// Jump of the interior integrand across the boundary at `q`.
fn interior_jump<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    q: &BoundaryQuery<T, D>,
) -> Result<T> {
    if !spec.mask.contains(&q.closest) {
        return Ok(T::zero());
    }
    let r = spec.reference.value(&q.closest);
    let g = bvp.data.value(boundary, q)?;
    let outside = spec.exterior_value.map_or(T::zero(), |e| spec.loss.value(e, r));
    Ok(spec.loss.value(g, r) - outside)
}

/// Boundary integrals by uniform boundary sampling: the moving-domain flux
/// of the interior loss plus the derivative of the boundary loss. Returns
/// the gradient part and the boundary-loss value.
fn boundary_flux<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    seed: u64,
) -> Result<(Vec<T>, T)> {
    let n = boundary.num_params();
    let count = spec.boundary_samples.max(1);
    let mut grad = vec![T::zero(); n];
    let mut value = T::zero();
    let inv = T::count(count).recip();
    for j in 0..count {
        let mut rng = RngStream::new(mix(seed, BOUNDARY_TAG), j as u64);
        let s = boundary.sample_boundary(&mut rng)?;
        let q = s.query;
        let w = inv / s.pdf;
        let vn = boundary.normal_velocity(&q)?;
        let jump = interior_jump(boundary, bvp, spec, &q)?;
        if jump != T::zero() {
            vn.add_scaled_to(jump * w, &mut grad);
        }
        if let Some(bl) = &spec.boundary_loss {
            if bl.mask.contains(&q.closest) {
                let r = bl.reference.value(&q.closest);
                let g = bvp.data.value(boundary, &q)?;
                let l = bl.loss.value(g, r);
                let dl = bl.loss.derivative(g, r);
                value = value + l * w;
                // d/dπ of ℓ(u) following the boundary: u̇ + ∂u/∂n v_n, which on
                // a Dirichlet boundary equals δβ + ∂g/∂n v_n.
                let kappa = boundary.curvature(&q)?;
                let data = bvp.data.param_derivative(boundary, &q);
                data.add_scaled_to(dl * w, &mut grad);
                vn.add_scaled_to((dl * bvp.data.normal_derivative(&q) + kappa * l) * w, &mut grad);
            }
        }
    }
    Ok((grad, value))
}

/// Band approximation of the boundary flux for implicit boundaries:
/// `(1/ε_b) ∫_{Ω ∩ {d < ε_b}} v_n [L]` with the band on the inner side.
fn band_flux<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    seed: u64,
) -> Result<(Vec<T>, T)> {
    let grad = implicit_boundary_band_gradient(boundary, bvp, spec, spec.band, seed)?;
    Ok((grad, T::zero()))
}

/// Volume approximation of `∫_∂Ω M v_n [L] dy` for implicit boundaries.
pub fn implicit_boundary_band_gradient<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    band: T,
    seed: u64,
) -> Result<Vec<T>> {
    if !(band > T::zero()) {
        return Err(Error::Config("band width must be positive".into()));
    }
    let n = boundary.num_params();
    let (lo, hi) = {
        let (blo, bhi) = boundary.bounding_box();
        let pad = Vector([band; D]);
        (blo - pad, bhi + pad)
    };
    let mut volume = T::one();
    for k in 0..D {
        volume = volume * (hi[k] - lo[k]);
    }
    let count = spec.boundary_samples.max(1);
    let samples: Vec<Option<Vec<T>>> = (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = RngStream::new(mix(seed, BAND_TAG), j as u64);
            let mut x = lo;
            for k in 0..D {
                x[k] = lo[k] + (hi[k] - lo[k]) * rng.uniform::<T>();
            }
            if !boundary.contains(&x) {
                return Ok(None);
            }
            let (d, vn) = match boundary.implicit_band(&x) {
                Some(r) => r?,
                None => return Err(Error::Unsupported("band integral on an explicit boundary")),
            };
            if d >= band {
                return Ok(None);
            }
            let q = boundary.closest(&x)?;
            let jump = interior_jump(boundary, bvp, spec, &q)?;
            let mut g = vec![T::zero(); n];
            vn.add_scaled_to(jump, &mut g);
            Ok(Some(g))
        })
        .collect::<Result<_>>()?;
    let scale = volume / (T::count(count) * band);
    let mut grad = vec![T::zero(); n];
    for s in samples.into_iter().flatten() {
        for (a, b) in grad.iter_mut().zip(s) {
            *a = *a + b * scale;
        }
    }
    Ok(grad)
}

/// `α ∫_∂Ω κ v_n dl` by uniform boundary sampling.
pub fn length_regularizer_gradient<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    strength: T,
    samples: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let n = boundary.num_params();
    let count = samples.max(1);
    let mut grad = vec![T::zero(); n];
    if strength == T::zero() {
        return Ok(grad);
    }
    for j in 0..count {
        let mut rng = RngStream::new(seed, j as u64);
        let s = boundary.sample_boundary(&mut rng)?;
        let kappa = boundary.curvature(&s.query)?;
        if kappa != T::zero() {
            let w = strength * kappa / (s.pdf * T::count(count));
            boundary.normal_velocity(&s.query)?.add_scaled_to(w, &mut grad);
        }
    }
    Ok(grad)
}
