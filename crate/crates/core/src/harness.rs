//! Ablation sweeps with bias/variance decomposition and equal-time comparison
//! of differential walks against finite differences.

use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bvp::{AmbientField, Bvp, DirichletData};
use crate::diff::{coupled_walks, estimate_derivative_grid, fd_reference_gradient};
use crate::error::{Error, Result};
use crate::forward::{NormalDerivativeMethod, SolverConfig};
use crate::functional::{product_estimate, ProductEstimator, ProductEstimatorConfig};
use crate::geometry::{Boundary, SphereSet};
use crate::rng::mix;
use crate::scalar::Real;
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Epsilon,
    Offset,
    Estimator,
    Method,
    Wpp,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Offset => "offset",
            SweepAxis::Estimator => "estimator",
            SweepAxis::Method => "method",
            SweepAxis::Wpp => "wpp",
        };
        f.write_str(s)
    }
}

/// One setting of the swept hyperparameter. Epsilon levels keep the base
/// ratio `offset / epsilon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepLevel<T> {
    Epsilon(T),
    Offset(T),
    Estimator(ProductEstimator),
    Method(NormalDerivativeMethod),
    Wpp(usize),
}

impl<T: Real> SweepLevel<T> {
    pub fn axis(&self) -> SweepAxis {
        match self {
            SweepLevel::Epsilon(_) => SweepAxis::Epsilon,
            SweepLevel::Offset(_) => SweepAxis::Offset,
            SweepLevel::Estimator(_) => SweepAxis::Estimator,
            SweepLevel::Method(_) => SweepAxis::Method,
            SweepLevel::Wpp(_) => SweepAxis::Wpp,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SweepLevel::Epsilon(e) | SweepLevel::Offset(e) => format!("{:e}", e.as_f64()),
            SweepLevel::Estimator(e) => format!("{e:?}").to_lowercase(),
            SweepLevel::Method(NormalDerivativeMethod::Backward) => "backward".into(),
            SweepLevel::Method(NormalDerivativeMethod::OffsetBall) => "offset_ball".into(),
            SweepLevel::Wpp(w) => w.to_string(),
        }
    }

    fn apply(&self, cfg: &mut SolverConfig<T>, est: &mut ProductEstimatorConfig) {
        match *self {
            SweepLevel::Epsilon(e) => {
                cfg.offset = cfg.offset / cfg.epsilon * e;
                cfg.epsilon = e;
            }
            SweepLevel::Offset(c) => cfg.offset = c,
            SweepLevel::Estimator(k) => est.kind = k,
            SweepLevel::Method(m) => cfg.method = m,
            SweepLevel::Wpp(w) => cfg.walks = w,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig<T> {
    /// Base solver settings; each level overrides one field.
    pub solver: SolverConfig<T>,
    pub estimator: ProductEstimatorConfig,
    /// Independent repetitions per level; repetition `r` uses seed
    /// `mix(solver.seed, r)` at every level.
    pub repetitions: usize,
    /// Parameter whose derivative is swept.
    pub param: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub label: String,
    pub rmse: f64,
    /// Root of the mean squared per-point bias.
    pub bias: f64,
    /// Mean per-point variance over repetitions (population form).
    pub variance: f64,
    pub walks: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub axis: String,
    pub reference: String,
    pub levels: Vec<LevelStats>,
}

impl AblationReport {
    pub fn level(&self, label: &str) -> Option<&LevelStats> {
        self.levels.iter().find(|l| l.label == label)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "axis,level,rmse,bias,variance,walks,seconds")?;
        for l in &self.levels {
            writeln!(w, "{},{},{},{},{},{},{:.6}", self.axis, l.label, l.rmse, l.bias, l.variance, l.walks, l.seconds)?;
        }
        Ok(())
    }

    /// Long format: one `(axis, level, metric, value)` row per number.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "axis,level,metric,value")?;
        for l in &self.levels {
            for (m, v) in [("rmse", l.rmse), ("bias", l.bias), ("variance", l.variance), ("seconds", l.seconds)] {
                writeln!(w, "{},{},{},{}", self.axis, l.label, m, v)?;
            }
        }
        Ok(())
    }
}

/// Splits repeated estimates `estimates[rep][point]` against `reference[point]`
/// into `(rmse, bias, variance)` with `rmse² = bias² + variance`.
pub fn decompose(estimates: &[Vec<f64>], reference: &[f64]) -> (f64, f64, f64) {
    let reps = estimates.len() as f64;
    let points = reference.len() as f64;
    let (mut bias2, mut var) = (0.0, 0.0);
    for (p, r) in reference.iter().enumerate() {
        let mean = estimates.iter().map(|e| e[p]).sum::<f64>() / reps;
        bias2 += (mean - r).powi(2);
        var += estimates.iter().map(|e| (e[p] - mean).powi(2)).sum::<f64>() / reps;
    }
    let (bias2, var) = (bias2 / points, var / points);
    ((bias2 + var).sqrt(), bias2.sqrt(), var)
}

/// RMSE of `u̇_param` (or of `u·u̇_param` on the estimator axis) over
/// `points`, per level. `reference` holds the true value at each point.
/// Repetitions share seeds across levels.
pub fn rmse_sweep<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    points: &[Vector<T, D>],
    levels: &[SweepLevel<T>],
    reference: &[T],
    reference_desc: &str,
    cfg: &SweepConfig<T>,
) -> Result<AblationReport> {
    if reference.len() != points.len() || points.is_empty() {
        return Err(Error::Config("need one reference value per evaluation point".into()));
    }
    if cfg.repetitions < 2 {
        return Err(Error::Config("sweeps need at least 2 repetitions".into()));
    }
    if cfg.param >= boundary.num_params() {
        return Err(Error::Config(format!("parameter {} out of range", cfg.param)));
    }
    let axis = match levels.first() {
        Some(l) => l.axis(),
        None => return Err(Error::Config("empty sweep".into())),
    };
    if levels.iter().any(|l| l.axis() != axis) {
        return Err(Error::Config("levels of one sweep must share an axis".into()));
    }
    let reference: Vec<f64> = reference.iter().map(|r| r.as_f64()).collect();
    let mut stats = Vec::with_capacity(levels.len());
    for level in levels {
        let (mut solver, mut est) = (cfg.solver.clone(), cfg.estimator);
        level.apply(&mut solver, &mut est);
        solver.validate()?;
        let start = Instant::now();
        let estimates = (0..cfg.repetitions)
            .into_par_iter()
            .map(|r| {
                let sc = SolverConfig { seed: mix(cfg.solver.seed, r as u64), ..solver.clone() };
                sweep_once(boundary, bvp, points, &sc, &est, axis, cfg.param)
            })
            .collect::<Result<Vec<_>>>()?;
        let (rmse, bias, variance) = decompose(&estimates, &reference);
        stats.push(LevelStats {
            label: level.label(),
            rmse,
            bias,
            variance,
            walks: solver.walks,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(AblationReport { axis: axis.to_string(), reference: reference_desc.to_string(), levels: stats })
}

fn sweep_once<T: Real, const D: usize, B: Boundary<T, D> + ?Sized>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    points: &[Vector<T, D>],
    cfg: &SolverConfig<T>,
    est: &ProductEstimatorConfig,
    axis: SweepAxis,
    param: usize,
) -> Result<Vec<f64>> {
    let n = boundary.num_params();
    if axis == SweepAxis::Estimator {
        return points
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let walks = coupled_walks(boundary, bvp, cfg, x, i as u64)?;
                Ok(product_estimate(&walks, n, est)?[param].as_f64())
            })
            .collect();
    }
    estimate_derivative_grid(boundary, bvp, cfg, points)?
        .into_iter()
        .map(|e| e.map(|e| e.mean[param].as_f64()).ok_or(Error::OutsideDomain))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GradientMethod<T> {
    DiffWos,
    FiniteDifference { delta: T },
}

impl<T: Real> GradientMethod<T> {
    pub fn label(&self) -> &'static str {
        match self {
            GradientMethod::DiffWos => "diff_wos",
            GradientMethod::FiniteDifference { .. } => "finite_difference",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqualTimeEntry {
    pub method: String,
    /// RMSE over all points and parameters of the accumulated estimate.
    pub rmse: f64,
    /// Rounds of `cfg.walks` walks per point completed within the budget.
    pub rounds: usize,
    /// Walks per point per unperturbed or perturbed solve.
    pub walks: usize,
    /// Independent solves per walk: 1 for differential walks, N + 1 for
    /// finite differences over N parameters.
    pub solves_per_walk: usize,
    pub seconds: f64,
}

/// Runs each method in rounds of `cfg.walks` walks per point until `budget`
/// is spent and reports the RMSE of the averaged gradients against
/// `reference[point][param]`. Methods that finish no round are omitted.
pub fn equal_time_comparison<T: Real, const D: usize, B: Boundary<T, D> + Clone>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    points: &[Vector<T, D>],
    reference: &[Vec<T>],
    methods: &[GradientMethod<T>],
    cfg: &SolverConfig<T>,
    budget: Duration,
) -> Result<Vec<EqualTimeEntry>> {
    let n = boundary.num_params();
    if reference.len() != points.len() || reference.iter().any(|r| r.len() != n) {
        return Err(Error::Config("need a full reference gradient per point".into()));
    }
    cfg.validate()?;
    let mut report = Vec::new();
    if budget.is_zero() {
        return Ok(report);
    }
    for method in methods {
        let start = Instant::now();
        let mut sum = vec![vec![0.0f64; n]; points.len()];
        let mut rounds = 0;
        while start.elapsed() < budget {
            let sc = SolverConfig { seed: mix(cfg.seed, rounds as u64), ..cfg.clone() };
            let grads = gradient_round(boundary, bvp, points, method, &sc)?;
            for (s, g) in sum.iter_mut().zip(&grads) {
                for (a, b) in s.iter_mut().zip(g) {
                    *a += b;
                }
            }
            rounds += 1;
        }
        if rounds == 0 {
            continue;
        }
        let mut sq = 0.0;
        for (s, r) in sum.iter().zip(reference) {
            for (a, b) in s.iter().zip(r) {
                sq += (a / rounds as f64 - b.as_f64()).powi(2);
            }
        }
        report.push(EqualTimeEntry {
            method: method.label().to_string(),
            rmse: (sq / (points.len() * n) as f64).sqrt(),
            rounds,
            walks: cfg.walks,
            solves_per_walk: match method {
                GradientMethod::DiffWos => 1,
                GradientMethod::FiniteDifference { .. } => n + 1,
            },
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

fn gradient_round<T: Real, const D: usize, B: Boundary<T, D> + Clone>(
    boundary: &B,
    bvp: &Bvp<T, D>,
    points: &[Vector<T, D>],
    method: &GradientMethod<T>,
    cfg: &SolverConfig<T>,
) -> Result<Vec<Vec<f64>>> {
    match *method {
        GradientMethod::DiffWos => estimate_derivative_grid(boundary, bvp, cfg, points)?
            .into_iter()
            .map(|e| e.map(|e| e.mean.iter().map(|v| v.as_f64()).collect()).ok_or(Error::OutsideDomain))
            .collect(),
        GradientMethod::FiniteDifference { delta } => points
            .iter()
            .enumerate()
            .map(|(i, x)| {
                fd_reference_gradient(boundary, bvp, cfg, x, delta, i as u64)?
                    .into_iter()
                    .map(|e| e.map(|e| e.mean.as_f64()).ok_or(Error::OutsideDomain))
                    .collect()
            })
            .collect(),
    }
}

pub fn write_equal_time_csv<W: Write>(mut w: W, entries: &[EqualTimeEntry]) -> std::io::Result<()> {
    writeln!(w, "method,rmse,rounds,walks,solves_per_walk,seconds")?;
    for e in entries {
        writeln!(w, "{},{},{},{},{},{:.6}", e.method, e.rmse, e.rounds, e.walks, e.solves_per_walk, e.seconds)?;
    }
    Ok(())
}

/// Disk of radius `radius` at `center` with restricted data `g = x₁² + x₂`.
/// Parameter 1 translates the disk along y.
pub fn translated_disk_scene<T: Real>(center: Vector<T, 2>, radius: T) -> Result<(SphereSet<T, 2>, Bvp<T, 2>)> {
    let disk = SphereSet::ball(center, radius, T::zero())?;
    let g = AmbientField::Quadratic {
        matrix: [[T::one(), T::zero()], [T::zero(), T::zero()]],
        linear: Vector::new(T::zero(), T::one()),
        constant: T::zero(),
    };
    Ok((disk, Bvp::laplace(DirichletData::Restricted(g))))
}

/// Solution and y-translation derivative of [`translated_disk_scene`]:
/// `u = R²/2 + ((x₁−c₁)² − (x₂−c₂)²)/2 + 2c₁(x₁−c₁) + c₁² + x₂`, `u̇ = x₂ − c₂`.
pub fn translated_disk_solution<T: Real>(center: Vector<T, 2>, radius: T, x: &Vector<T, 2>) -> (T, T) {
    let (a, b) = (x[0] - center[0], x[1] - center[1]);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let u = half * radius * radius + half * (a * a - b * b) + two * center[0] * a + center[0] * center[0] + x[1];
    (u, b)
}
