use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use shapewalk::config::GeometryConfig;
use shapewalk::harness::{rmse_sweep, SweepConfig, SweepLevel};
use shapewalk::optimizer::write_log;
use shapewalk::rng::mix;
use shapewalk::{
    estimate_derivative_grid, estimate_functional, estimate_grid, fd_reference_gradient, functional_gradient, optimize,
    Boundary, Error, Grid, NormalDerivativeMethod, ProductEstimator, Scene, SceneConfig, Vec2,
};

#[derive(Parser)]
#[command(name = "shapewalk", version, about = "Walk-on-spheres solver and shape optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem on the output grid (channels: mean, std error).
    Solve(Common),
    /// Shape derivative fields, one channel per selected parameter.
    Grad(Common),
    /// Compare the functional gradient against central differences of J.
    Fdcheck {
        #[command(flatten)]
        common: Common,
        /// Independent repetitions for error bars.
        #[arg(long, default_value_t = 8)]
        reps: usize,
        /// Finite-difference step relative to the extent.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// RMSE sweep of one hyperparameter against a finite-difference reference.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated levels (numbers, estimator or method names).
        #[arg(long)]
        levels: String,
        #[arg(long, default_value_t = 16)]
        reps: usize,
        /// Walks per point for the reference derivative.
        #[arg(long, default_value_t = 100_000)]
        reference_walks: usize,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Run the optimizer and write the log and final scene.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Where to write the optimized scene config.
        #[arg(long)]
        scene_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Epsilon,
    Offset,
    Estimator,
    Method,
    Wpp,
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    wpp: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid resolution as `NX,NY` or `NXxNY`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Parameter selection such as `0,3,5-8`.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Uncorrelated,
    Correlated,
    Ustat,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Backward,
    OffsetBall,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::Unsupported(_) => {
                Failure::Config(e.into())
            }
            _ => Failure::Numerical(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(e) => e.into(),
            Err(e) => Failure::Config(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(c) => solve(&c),
        Command::Grad(c) => grad(&c),
        Command::Fdcheck { common, reps, delta } => fdcheck(&common, reps, delta),
        Command::Ablate { common, axis, levels, reps, reference_walks, delta } => {
            ablate(&common, axis, &levels, reps, reference_walks, delta)
        }
        Command::Optimize { common, scene_out } => run_optimize(&common, scene_out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load(c: &Common) -> std::result::Result<(SceneConfig, Scene), Failure> {
    let (cfg, mut scene) =
        SceneConfig::open(&c.config).with_context(|| format!("loading {}", c.config.display()))?;
    if let Some(s) = c.seed {
        scene.solver.seed = s;
    }
    if let Some(w) = c.wpp {
        if w == 0 {
            return Err(Failure::Config(anyhow!("--wpp must be positive")));
        }
        scene.solver.walks = w;
    }
    if let Some(g) = &c.grid {
        scene.output.grid = parse_grid(g)?;
    }
    if let Some(e) = c.estimator {
        scene.estimator.kind = match e {
            EstimatorArg::Uncorrelated => ProductEstimator::Uncorrelated,
            EstimatorArg::Correlated => ProductEstimator::Correlated,
            EstimatorArg::Ustat => ProductEstimator::Ustat,
        };
    }
    if let Some(m) = c.method {
        scene.solver.method = match m {
            MethodArg::Backward => NormalDerivativeMethod::Backward,
            MethodArg::OffsetBall => NormalDerivativeMethod::OffsetBall,
        };
    }
    Ok((cfg, scene))
}

fn parse_grid(s: &str) -> anyhow::Result<[usize; 2]> {
    let parts: Vec<&str> = s.split([',', 'x']).collect();
    match parts.as_slice() {
        [a, b] => {
            let g = [a.trim().parse()?, b.trim().parse()?];
            if g[0] == 0 || g[1] == 0 {
                bail!("grid must be at least 1x1");
            }
            Ok(g)
        }
        _ => bail!("grid must look like NX,NY"),
    }
}

fn parse_params(s: Option<&str>, n: usize) -> anyhow::Result<Vec<usize>> {
    let Some(s) = s else {
        return Ok((0..n).collect());
    };
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => out.extend(a.parse::<usize>()?..=b.parse::<usize>()?),
            None => out.push(part.parse()?),
        }
    }
    if let Some(k) = out.iter().find(|&&k| k >= n) {
        bail!("parameter {k} out of range (scene has {n})");
    }
    if out.is_empty() {
        bail!("empty parameter selection");
    }
    Ok(out)
}

fn empty_grid(scene: &Scene, channels: usize) -> anyhow::Result<Grid> {
    let (lo, hi) = scene.grid_bounds();
    let [nx, ny] = scene.output.grid;
    Ok(Grid::zeros(nx, ny, channels, lo, hi)?)
}

fn out_path(c: &Common, scene: &Scene, fallback: &str) -> PathBuf {
    c.out.clone().unwrap_or_else(|| scene.output.field.as_ref().map_or_else(|| fallback.into(), |p| scene.output_path(p)))
}

fn solve(c: &Common) -> Outcome {
    let (_, scene) = load(c)?;
    let mut grid = empty_grid(&scene, 2)?;
    let points = grid.centers();
    let est = estimate_grid(&scene.shape, &scene.bvp, &scene.solver, &points)?;
    let outside = scene.spec.exterior_value.unwrap_or(f64::NAN);
    let nx = grid.nx();
    for (idx, e) in est.iter().enumerate() {
        let (i, j) = (idx % nx, idx / nx);
        match e {
            Some(e) => {
                grid.set(i, j, 0, e.mean);
                grid.set(i, j, 1, e.std_error());
            }
            None => {
                grid.set(i, j, 0, outside);
                grid.set(i, j, 1, 0.0);
            }
        }
    }
    let path = out_path(c, &scene, "solution.txt");
    grid.write_path(&path)?;
    let inside = est.iter().flatten().count();
    let truncated: usize = est.iter().flatten().map(|e| e.truncated).sum();
    println!("wrote {} ({} points inside, {} truncated walks)", path.display(), inside, truncated);
    Ok(())
}

fn grad(c: &Common) -> Outcome {
    let (_, scene) = load(c)?;
    let selected = parse_params(c.params.as_deref(), scene.shape.num_params())?;
    let mut grid = empty_grid(&scene, selected.len())?;
    let points = grid.centers();
    let est = estimate_derivative_grid(&scene.shape, &scene.bvp, &scene.solver, &points)?;
    let nx = grid.nx();
    let mut failures = 0;
    for (idx, e) in est.iter().enumerate() {
        let (i, j) = (idx % nx, idx / nx);
        for (ch, &k) in selected.iter().enumerate() {
            let v = match e {
                Some(_) if scene.optimizer.frozen.contains(&k) => 0.0,
                Some(e) => e.mean[k],
                None => 0.0,
            };
            grid.set(i, j, ch, v);
        }
        failures += e.as_ref().map_or(0, |e| e.offset_failures);
    }
    let path = out_path(c, &scene, "derivative.txt");
    grid.write_path(&path)?;
    println!("wrote {} ({} channels, {} offset failures)", path.display(), selected.len(), failures);
    Ok(())
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, (var / n).sqrt())
}

fn fdcheck(c: &Common, reps: usize, delta: f64) -> Outcome {
    let (_, scene) = load(c)?;
    if reps < 2 {
        return Err(Failure::Config(anyhow!("--reps must be at least 2")));
    }
    let params = scene.shape.params();
    let selected = parse_params(c.params.as_deref(), params.len())?;
    let h = delta * scene.shape.extent();
    let mut diff = vec![Vec::new(); selected.len()];
    let mut fd = vec![Vec::new(); selected.len()];
    for r in 0..reps {
        let cfg = shapewalk::SolverConfig { seed: mix(scene.solver.seed, r as u64), ..scene.solver.clone() };
        let g = functional_gradient(&scene.shape, &scene.bvp, &scene.spec, &cfg, &scene.estimator)?;
        for (s, &k) in selected.iter().enumerate() {
            diff[s].push(g.gradient[k]);
            let mut j = [0.0; 2];
            for (side, sign) in [(0, 1.0), (1, -1.0)] {
                let mut moved = scene.shape.clone();
                let mut p = params.clone();
                p[k] += sign * h;
                moved.set_params(&p)?;
                j[side] = estimate_functional(&moved, &scene.bvp, &scene.spec, &cfg)?.value;
            }
            fd[s].push((j[0] - j[1]) / (2.0 * h));
        }
    }
    let mut rows = vec!["param,gradient,gradient_se,fd,fd_se,z,agree".to_string()];
    let mut max_z: f64 = 0.0;
    let mut agree = 0;
    for (s, &k) in selected.iter().enumerate() {
        let (a, sa) = mean_se(&diff[s]);
        let (b, sb) = mean_se(&fd[s]);
        let se = (sa * sa + sb * sb).sqrt();
        let z = if se > 0.0 { (a - b) / se } else if a == b { 0.0 } else { f64::INFINITY };
        let ok = z.abs() <= 3.0;
        agree += ok as usize;
        max_z = max_z.max(z.abs());
        rows.push(format!("{k},{a},{sa},{b},{sb},{z},{}", ok as u8));
    }
    let report = rows.join("\n") + "\n";
    match &c.out {
        Some(p) => std::fs::write(p, &report)?,
        None => print!("{report}"),
    }
    eprintln!("{agree}/{} parameters agree within 3 sigma, max |z| = {max_z:.3}", selected.len());
    Ok(())
}

fn ablate(c: &Common, axis: Axis, levels: &str, reps: usize, reference_walks: usize, delta: f64) -> Outcome {
    let (_, scene) = load(c)?;
    let selected = parse_params(c.params.as_deref(), scene.shape.num_params())?;
    let param = selected[0];
    let extent = scene.shape.extent();
    let levels = levels
        .split(',')
        .map(str::trim)
        .map(|l| parse_level(axis, l, extent))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let grid = empty_grid(&scene, 1)?;
    let points: Vec<Vec2> = grid.centers().into_iter().filter(|x| scene.shape.contains(x)).collect();
    if points.is_empty() {
        return Err(Failure::Config(anyhow!("no grid points inside the domain")));
    }
    let ref_cfg = shapewalk::SolverConfig { walks: reference_walks, ..scene.solver.clone() };
    let h = delta * extent;
    let mut reference = Vec::with_capacity(points.len());
    let mut dropped = Vec::new();
    for (i, x) in points.iter().enumerate() {
        match fd_reference_gradient(&scene.shape, &scene.bvp, &ref_cfg, x, h, i as u64)?.swap_remove(param) {
            Some(e) => reference.push(e.mean),
            None => dropped.push(i),
        }
    }
    let points: Vec<Vec2> =
        points.into_iter().enumerate().filter(|(i, _)| !dropped.contains(i)).map(|(_, x)| x).collect();
    let cfg = SweepConfig { solver: scene.solver.clone(), estimator: scene.estimator, repetitions: reps, param };
    let desc = format!("central differences, {reference_walks} walks, step {h:e}");
    let report = rmse_sweep(&scene.shape, &scene.bvp, &points, &levels, &reference, &desc, &cfg)?;
    match &c.out {
        Some(p) => report.write_csv(BufWriter::new(File::create(p)?))?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn parse_level(axis: Axis, s: &str, extent: f64) -> anyhow::Result<SweepLevel<f64>> {
    Ok(match axis {
        Axis::Epsilon => SweepLevel::Epsilon(s.parse::<f64>()? * extent),
        Axis::Offset => SweepLevel::Offset(s.parse::<f64>()? * extent),
        Axis::Wpp => SweepLevel::Wpp(s.parse()?),
        Axis::Estimator => SweepLevel::Estimator(match s {
            "uncorrelated" => ProductEstimator::Uncorrelated,
            "correlated" => ProductEstimator::Correlated,
            "ustat" => ProductEstimator::Ustat,
            _ => bail!("unknown estimator {s}"),
        }),
        Axis::Method => SweepLevel::Method(match s {
            "backward" => NormalDerivativeMethod::Backward,
            "offset_ball" => NormalDerivativeMethod::OffsetBall,
            _ => bail!("unknown method {s}"),
        }),
    })
}

fn run_optimize(c: &Common, scene_out: Option<PathBuf>) -> Outcome {
    let (cfg, scene) = load(c)?;
    let mut shape = scene.shape.clone();
    let mut opt = scene.optimizer.clone();
    if let Some(w) = c.wpp {
        opt.wpp0 = w;
        opt.wpp_final = w;
    }
    let seed = scene.solver.seed;
    let result = optimize(&mut shape, &scene.bvp, &scene.spec, &scene.solver, &scene.estimator, &opt, seed)?;
    let log = c.out.clone().or_else(|| scene.output.log.as_ref().map(|p| scene.output_path(p)));
    match &log {
        Some(p) => write_log(BufWriter::new(File::create(p)?), &result.records)?,
        None => write_log(std::io::stdout().lock(), &result.records)?,
    }
    let scene_path = scene_out.or_else(|| scene.output.scene.as_ref().map(|p| scene.output_path(p)));
    if let Some(p) = scene_path {
        let done = SceneConfig { geometry: GeometryConfig::from_shape(&shape), ..cfg };
        write_text(&p, &done.to_toml()?)?;
    }
    if let (Some(first), Some(last)) = (result.records.first(), result.records.last()) {
        eprintln!(
            "loss {:.6e} -> {:.6e} over {} iterations ({} rejected steps)",
            first.loss,
            last.loss,
            result.records.len(),
            result.rejected_steps
        );
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())
}
