//! Stochastic gradient descent on shape parameters with Adam / Vector Adam,
//! walks-per-point annealing and regularizer decay.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bvp::Bvp;
use crate::error::{Error, Result};
use crate::forward::SolverConfig;
use crate::functional::{functional_gradient, FunctionalSpec, ProductEstimatorConfig};
use crate::geometry::{
    BezierChain, Boundary, ImplicitMonopoles, ParamInfo, ParamRole, PolylineBoundary, Shape2, SphereSet,
};
use crate::rng::mix;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps_adam: T,
    pub iterations: usize,
    pub wpp0: usize,
    pub wpp_final: usize,
    /// Share the second moment across position groups.
    pub vector_adam: bool,
    /// Resample polylines to uniform edge length every this many iterations.
    pub resample_every: Option<usize>,
    /// Weight of one umbrella smoothing pass over polyline gradients.
    pub smoothing: Option<T>,
    /// Parameters held fixed; their gradient entries are zeroed.
    pub frozen: Vec<usize>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps_adam: T::lit(1e-8),
            iterations: 100,
            wpp0: 1,
            wpp_final: 1,
            vector_adam: true,
            resample_every: None,
            smoothing: None,
            frozen: Vec::new(),
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: T| b > T::zero() && b < T::one();
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if !(self.lr > T::zero()) || !(self.eps_adam > T::zero()) {
            return Err(Error::Config("learning rate and eps_adam must be positive".into()));
        }
        if self.wpp0 == 0 || self.wpp0 > self.wpp_final {
            return Err(Error::Config("need 1 <= wpp0 <= wpp_final".into()));
        }
        if self.resample_every == Some(0) {
            return Err(Error::Config("resample_every must be positive".into()));
        }
        Ok(())
    }
}

/// `WPP_t = WPP₀ exp(ln(WPP_T / WPP₀) t / T)`, rounded and clamped.
pub fn wpp_schedule<T: Real>(t: usize, cfg: &OptimizerConfig<T>) -> usize {
    if cfg.iterations == 0 || cfg.wpp0 >= cfg.wpp_final {
        return cfg.wpp0;
    }
    let (w0, w1) = (cfg.wpp0 as f64, cfg.wpp_final as f64);
    let s = (t.min(cfg.iterations) as f64) / cfg.iterations as f64;
    let w = (w0 * ((w1 / w0).ln() * s).exp()).round() as usize;
    w.clamp(cfg.wpp0, cfg.wpp_final)
}

/// `α_t = α₀ (WPP_t / WPP₀)^(-1/2)`.
pub fn regularizer_decay<T: Real>(t: usize, alpha0: T, cfg: &OptimizerConfig<T>) -> T {
    let ratio = T::count(wpp_schedule(t, cfg)) / T::count(cfg.wpp0.max(1));
    alpha0 / ratio.sqrt()
}

/// First and second moments for Adam.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    steps: Vec<u32>,
    /// Gradient entries skipped because they were not finite.
    pub skipped: usize,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], steps: vec![0; n], skipped: 0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Index sets updated together: position groups share one second moment when
/// `vector` is set, everything else is per scalar.
pub fn update_groups(layout: &[ParamInfo], vector: bool) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for (i, info) in layout.iter().enumerate() {
        let position = matches!(
            info.role,
            ParamRole::VertexPosition | ParamRole::ControlPoint | ParamRole::Center | ParamRole::PolePosition
        );
        match info.group {
            Some(g) if vector && position => match index.get(&g) {
                Some(&k) => groups[k].push(i),
                None => {
                    index.insert(g, groups.len());
                    groups.push(vec![i]);
                }
            },
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// One Adam step in place. A group with any non-finite gradient entry is left
/// untouched and its entries are counted as skipped.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grad: &[T],
    state: &mut AdamState<T>,
    groups: &[Vec<usize>],
    cfg: &OptimizerConfig<T>,
) -> Result<()> {
    if params.len() != grad.len() || state.len() != grad.len() {
        return Err(Error::Config("parameter, gradient and state sizes differ".into()));
    }
    let one = T::one();
    for group in groups {
        if group.iter().any(|&i| !grad[i].is_finite()) {
            state.skipped += group.len();
            continue;
        }
        let sq = group.iter().fold(T::zero(), |a, &i| a + grad[i] * grad[i]);
        for &i in group {
            state.steps[i] += 1;
            state.m[i] = cfg.beta1 * state.m[i] + (one - cfg.beta1) * grad[i];
            let g2 = if group.len() > 1 { sq } else { grad[i] * grad[i] };
            state.v[i] = cfg.beta2 * state.v[i] + (one - cfg.beta2) * g2;
            let k = state.steps[i] as i32;
            let mhat = state.m[i] / (one - cfg.beta1.powi(k));
            let vhat = state.v[i] / (one - cfg.beta2.powi(k));
            params[i] = params[i] - cfg.lr * mhat / (vhat.sqrt() + cfg.eps_adam);
        }
    }
    Ok(())
}

/// Boundaries the optimizer can maintain between steps.
pub trait Optimizable<T: Real, const D: usize>: Boundary<T, D> + Clone {
    /// Re-distribute the parameterization without changing its size.
    fn resample(&mut self) -> Result<()> {
        Ok(())
    }

    fn smooth_gradient(&self, _grad: &mut [T], _weight: T) {}
}

impl<T: Real> Optimizable<T, 2> for PolylineBoundary<T> {
    fn resample(&mut self) -> Result<()> {
        self.resample_uniform()
    }

    fn smooth_gradient(&self, grad: &mut [T], weight: T) {
        let old = grad.to_vec();
        let half = T::lit(0.5);
        for l in self.loops() {
            let n = l.len();
            if n < 3 {
                continue;
            }
            for (j, &v) in l.iter().enumerate() {
                let (a, b) = (l[(j + n - 1) % n], l[(j + 1) % n]);
                for k in 0..2 {
                    let avg = half * (old[2 * a + k] + old[2 * b + k]);
                    grad[2 * v + k] = old[2 * v + k] + weight * (avg - old[2 * v + k]);
                }
            }
        }
    }
}

impl<T: Real> Optimizable<T, 2> for BezierChain<T> {}
impl<T: Real, const D: usize> Optimizable<T, D> for ImplicitMonopoles<T, D> {}
impl<T: Real, const D: usize> Optimizable<T, D> for SphereSet<T, D> {}

impl<T: Real> Optimizable<T, 2> for Shape2<T> {
    fn resample(&mut self) -> Result<()> {
        Shape2::resample(self)
    }

    fn smooth_gradient(&self, grad: &mut [T], weight: T) {
        if let Shape2::Polyline(p) = self {
            p.smooth_gradient(grad, weight)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub wpp: usize,
    pub seconds: f64,
    /// Cumulative walk steps, a machine-independent cost measure.
    pub steps: u64,
    pub param_hash: u64,
    pub rejected: bool,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "t,loss,grad_norm,wpp,seconds,steps,param_hash,rejected";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{},{:016x},{}",
            self.t, self.loss, self.grad_norm, self.wpp, self.seconds, self.steps, self.param_hash, self.rejected as u8
        )
    }

    /// Same record with wall time removed, for reproducibility checks.
    pub fn without_time(&self) -> Self {
        Self { seconds: 0.0, ..self.clone() }
    }
}

pub fn write_log<W: Write>(mut w: W, records: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(w, "{}", IterationRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn param_hash<T: Real>(params: &[T]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for p in params {
        p.as_f64().to_bits().hash(&mut h);
    }
    h.finish()
}

#[derive(Clone, Debug)]
pub struct OptimizationResult<T> {
    pub params: Vec<T>,
    pub records: Vec<IterationRecord>,
    pub rejected_steps: usize,
    pub skipped_entries: usize,
}

/// Runs `cfg.iterations` steps from the boundary's current parameters. Each
/// iteration uses solver seed `mix(seed, t)` and `wpp_schedule(t)` walks.
/// Steps that degenerate the geometry are rolled back and logged.
pub fn optimize<T: Real, const D: usize, B: Optimizable<T, D>>(
    boundary: &mut B,
    bvp: &Bvp<T, D>,
    spec: &FunctionalSpec<T, D>,
    solver: &SolverConfig<T>,
    estimator: &ProductEstimatorConfig,
    cfg: &OptimizerConfig<T>,
    seed: u64,
) -> Result<OptimizationResult<T>> {
    cfg.validate()?;
    if cfg.frozen.iter().any(|&k| k >= boundary.num_params()) {
        return Err(Error::Config("frozen parameter out of range".into()));
    }
    let start = Instant::now();
    let mut state = AdamState::new(boundary.num_params());
    let mut groups = update_groups(&boundary.layout(), cfg.vector_adam);
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut spec_t = spec.clone();
    let (mut rejected_steps, mut steps) = (0, 0u64);
    for t in 0..cfg.iterations {
        let wpp = wpp_schedule(t, cfg);
        for (r, r0) in spec_t.regularizers.iter_mut().zip(&spec.regularizers) {
            r.strength = regularizer_decay(t, r0.strength, cfg);
        }
        let mut sc = solver.clone();
        sc.walks = wpp;
        sc.seed = mix(seed, t as u64);
        let est = functional_gradient(&*boundary, bvp, &spec_t, &sc, estimator)?;
        steps += est.steps as u64;
        let mut grad = est.gradient;
        if let Some(w) = cfg.smoothing {
            boundary.smooth_gradient(&mut grad, w);
        }
        for &k in &cfg.frozen {
            grad[k] = T::zero();
        }
        let grad_norm = grad.iter().filter(|g| g.is_finite()).map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt();

        let old = boundary.params();
        let saved = state.clone();
        let mut next = old.clone();
        adam_step(&mut next, &grad, &mut state, &groups, cfg)?;
        let mut rejected = boundary.set_params(&next).is_err();
        if !rejected {
            boundary.project_constraints();
            if cfg.resample_every.is_some_and(|k| (t + 1) % k == 0) && boundary.resample().is_err() {
                rejected = true;
            }
        }
        if rejected {
            rejected_steps += 1;
            let skipped = state.skipped;
            state = saved;
            state.skipped = skipped;
            boundary.set_params(&old)?;
        }
        if boundary.num_params() != state.len() {
            state = AdamState::new(boundary.num_params());
            groups = update_groups(&boundary.layout(), cfg.vector_adam);
        }
        records.push(IterationRecord {
            t,
            loss: est.loss.as_f64(),
            grad_norm,
            wpp,
            seconds: start.elapsed().as_secs_f64(),
            steps,
            param_hash: param_hash(&boundary.params()),
            rejected,
        });
    }
    Ok(OptimizationResult { params: boundary.params(), records, rejected_steps, skipped_entries: state.skipped })
}
