//! Acceptance battery: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance` runs all criteria; numeric arguments select
//! a subset, e.g. `cargo test --test acceptance -- 4 7`.

use std::panic::AssertUnwindSafe;
use std::time::{Duration, Instant};

use shapewalk::diff::{coupled_walks, CoupledEstimate};
use shapewalk::harness::{
    equal_time_comparison, rmse_sweep, translated_disk_scene, translated_disk_solution, GradientMethod, SweepConfig,
    SweepLevel,
};
use shapewalk::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let selected: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let filtered = args.iter().any(|a| !a.starts_with('-'));
    let criteria: [Criterion; 11] = [
        (1, "harmonic forward solve", c1_harmonic),
        (2, "screened forward solve", c2_screened),
        (3, "source term", c3_source),
        (4, "differential estimator accuracy", c4_annulus),
        (5, "gradient vs finite differences", c5_gradient_suite),
        (6, "U-statistic product estimator", c6_ustat),
        (7, "ablation trends", c7_ablation),
        (8, "equal-time finite-difference comparison", c8_equal_time),
        (9, "end-to-end recovery", c9_recovery),
        (10, "noisy vs accurate SGD", c10_noisy_sgd),
        (11, "implicit pipeline topology change", c11_implicit),
    ];
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if filtered && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = std::panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn v2(x: f64, y: f64) -> Vec2 {
    Vector::new(x, y)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn sample_variance(v: &[f64]) -> f64 {
    let (m, se) = mean_se(v);
    let _ = m;
    se * se * v.len() as f64
}

fn c1_harmonic() -> Outcome {
    let disk = Spheres2::ball(v2(0.0, 0.0), 1.0, 0.0).unwrap();
    let bvp = Problem2::laplace(DirichletData::Restricted(AmbientField::linear(v2(1.0, 0.0), 0.0)));
    let cfg = Solver::new(1e-3, 1e-2);
    let x = v2(0.3, 0.4);
    let start = Instant::now();
    let values: Vec<f64> = (0..10_000)
        .map(|w| wos_solve(&disk, &bvp, &cfg, &x, &mut RngStream::for_walk(0, 0, w)).unwrap().value)
        .collect();
    let elapsed = start.elapsed();
    let (mean, se) = mean_se(&values);
    let pass = (mean - 0.3).abs() <= 0.02 && elapsed < Duration::from_secs(10);
    outcome(pass, format!("mean {mean:.4} ± {se:.4} vs 0.3 (tol 0.02), single thread {:.2}s (limit 10s)", elapsed.as_secs_f64()))
}

fn c2_screened() -> Outcome {
    let ball = Spheres3::ball(Vector::new3(0.0, 0.0, 0.0), 1.0, 0.0).unwrap();
    let bvp = Problem3::new(4.0, SourceField::Zero, DirichletData::Constant(1.0)).unwrap();
    let cfg = Solver::new(1e-3, 1e-2).with_walks(10_000).with_seed(2);
    let e = estimate_point(&ball, &bvp, &cfg, &Vector::new3(0.5, 0.0, 0.0), 0).unwrap();
    // radial solution sinh(κr) / (r sinh κ) with κ = √σ
    let k = 2.0f64;
    let oracle = (k * 0.5).sinh() / (0.5 * k.sinh());
    let pass = (e.mean - oracle).abs() <= 0.02;
    outcome(pass, format!("mean {:.4} ± {:.4} vs {oracle:.4} (tol 0.02)", e.mean, e.std_error()))
}

fn c3_source() -> Outcome {
    let disk = Spheres2::ball(v2(0.0, 0.0), 1.0, 0.0).unwrap();
    let bvp = Problem2::new(0.0, SourceField::Constant(4.0), DirichletData::Constant(0.0)).unwrap();
    let cfg = Solver::new(1e-3, 1e-2).with_walks(10_000).with_seed(3);
    let e = estimate_point(&disk, &bvp, &cfg, &v2(0.0, 0.0), 0).unwrap();
    // u = |x|² − 1
    let pass = (e.mean + 1.0).abs() <= 0.03;
    outcome(pass, format!("center {:.4} ± {:.4} vs -1 (tol 0.03)", e.mean, e.std_error()))
}

fn c4_annulus() -> Outcome {
    let (a, b, r) = (1.0f64, 2.0f64, 1.5f64);
    let annulus = Spheres2::annulus(v2(0.0, 0.0), a, b, 1.0, 0.0).unwrap();
    let bvp = Problem2::laplace(DirichletData::Mapped);
    // u = ln(b/r) / ln(b/a), so du/da = ln(b/r) / (a ln²(b/a))
    let oracle = (b / r).ln() / (a * (b / a).ln().powi(2));
    let radius = 5;
    let x = v2(r, 0.0);
    let mut cfg = Solver::new(1e-3, 1e-2).with_walks(100_000).with_seed(4);
    cfg.forward_walks = 16;
    let e = estimate_derivative_point(&annulus, &bvp, &cfg, &x, 0).unwrap();
    let (m, se) = (e.mean[radius], e.std_error(radius));
    let fd_cfg = Solver::new(1e-3, 1e-2).with_walks(1_000_000).with_seed(40);
    let fd = fd_reference_gradient(&annulus, &bvp, &fd_cfg, &x, 5e-3, 0).unwrap()[radius].unwrap();
    let rel = (m - oracle).abs() / oracle;
    let joint = (se * se + fd.std_error().powi(2)).sqrt();
    let z = (m - fd.mean) / joint;
    let pass = rel <= 0.05 && z.abs() <= 3.0;
    outcome(
        pass,
        format!(
            "diff {m:.4} ± {se:.4} vs analytic {oracle:.4} ({:.1}% off, tol 5%); FD {:.4} ± {:.4}, z = {z:.2} (tol 3)",
            100.0 * rel,
            fd.mean,
            fd.std_error()
        ),
    )
}

struct Agreement {
    param: usize,
    gradient: (f64, f64),
    fd: (f64, f64),
}

impl Agreement {
    fn z(&self) -> f64 {
        (self.gradient.0 - self.fd.0) / (self.gradient.1.powi(2) + self.fd.1.powi(2)).sqrt()
    }
}

/// Gradient and common-random-number central differences of `J`, one pair per repetition.
fn gradient_vs_fd<B: Boundary<f64, 2> + Clone>(
    shape: &B,
    bvp: &Problem2,
    spec: &Functional2,
    solver: &Solver,
    params: &[usize],
    h: f64,
    reps: usize,
) -> Vec<Agreement> {
    let p0 = shape.params();
    let est = ProductEstimatorConfig::default();
    let mut grads = vec![Vec::new(); params.len()];
    let mut fds = vec![Vec::new(); params.len()];
    for r in 0..reps {
        let cfg = Solver { seed: rng::mix(solver.seed, r as u64), ..solver.clone() };
        let g = functional_gradient(shape, bvp, spec, &cfg, &est).unwrap();
        for (i, &k) in params.iter().enumerate() {
            grads[i].push(g.gradient[k]);
            let mut j = [0.0; 2];
            for (side, sign) in [(0, 1.0), (1, -1.0)] {
                let mut moved = shape.clone();
                let mut p = p0.clone();
                p[k] += sign * h;
                moved.set_params(&p).unwrap();
                j[side] = estimate_functional(&moved, bvp, spec, &cfg).unwrap().value;
            }
            fds[i].push((j[0] - j[1]) / (2.0 * h));
        }
    }
    params
        .iter()
        .enumerate()
        .map(|(i, &param)| Agreement { param, gradient: mean_se(&grads[i]), fd: mean_se(&fds[i]) })
        .collect()
}

/// `J = ∫_Ω ½ (u − r)²` over a translated disk, by midpoint quadrature in polar coordinates.
fn disk_functional(center: Vec2, radius: f64, reference: f64) -> f64 {
    let (nr, nt) = (400, 800);
    let (dr, dt) = (radius / nr as f64, std::f64::consts::TAU / nt as f64);
    let mut sum = 0.0;
    for i in 0..nr {
        let rho = (i as f64 + 0.5) * dr;
        for j in 0..nt {
            let th = (j as f64 + 0.5) * dt;
            let x = center + v2(th.cos(), th.sin()) * rho;
            let (u, _) = translated_disk_solution(center, radius, &x);
            sum += 0.5 * (u - reference).powi(2) * rho;
        }
    }
    sum * dr * dt
}

fn c5_gradient_suite() -> Outcome {
    let mut solver = Solver::new(1e-3, 1e-2).with_walks(8).with_seed(5);
    solver.forward_walks = 16;
    let mut spec = Functional2::squared(Reference::Constant(0.5), Mask::All);
    spec.region = Some((v2(0.0, 0.0), v2(1.0, 1.0)));
    spec.interior_samples = 256;
    spec.boundary_samples = 256;
    let (h, reps) = (1e-2, 32);
    let mut lines = Vec::new();
    let mut pass = true;
    let record = |name: &str, rows: Vec<Agreement>, pass: &mut bool, lines: &mut Vec<String>| {
        let text: Vec<String> = rows.iter().map(|a| format!("p{} z={:.2}", a.param, a.z())).collect();
        *pass &= rows.iter().all(|a| a.z().abs() <= 3.0);
        lines.push(format!("{name} [{}]", text.join(" ")));
        rows
    };

    let center = v2(0.5, 0.5);
    let (disk, bvp) = translated_disk_scene(center, 0.3).unwrap();
    let rows = record("disk", gradient_vs_fd(&disk, &bvp, &spec, &solver, &[0, 1, 2], h, 2 * reps), &mut pass, &mut lines);
    let q = 1e-4;
    let oracle = [
        (disk_functional(center + v2(q, 0.0), 0.3, 0.5) - disk_functional(center - v2(q, 0.0), 0.3, 0.5)) / (2.0 * q),
        (disk_functional(center + v2(0.0, q), 0.3, 0.5) - disk_functional(center - v2(0.0, q), 0.3, 0.5)) / (2.0 * q),
        (disk_functional(center, 0.3 + q, 0.5) - disk_functional(center, 0.3 - q, 0.5)) / (2.0 * q),
    ];
    let rel: Vec<f64> = rows.iter().zip(oracle).map(|(a, o)| (a.gradient.0 - o).abs() / o.abs()).collect();
    pass &= rel.iter().all(|r| *r <= 0.05);
    lines.push(format!(
        "disk vs quadrature [{}]",
        rel.iter().map(|r| format!("{:.1}%", 100.0 * r)).collect::<Vec<_>>().join(" ")
    ));

    let poly = Polyline::regular(center, 0.35, 8).unwrap();
    let bvp = Problem2::new(2.0, SourceField::Constant(1.0), DirichletData::Restricted(AmbientField::linear(v2(1.0, 0.5), 0.0)))
        .unwrap();
    record("screened polyline", gradient_vs_fd(&poly, &bvp, &spec, &solver, &[0, 3, 9], h, reps), &mut pass, &mut lines);

    let annulus = Spheres2::annulus(center, 0.15, 0.4, 1.0, 0.0).unwrap();
    let bvp = Problem2::laplace(DirichletData::Mapped);
    let mut low = spec.clone();
    low.reference = Reference::Constant(0.2);
    record("annulus", gradient_vs_fd(&annulus, &bvp, &low, &solver, &[0, 1, 2, 3, 4, 5], h, reps), &mut pass, &mut lines);

    let bezier = Bezier::circle(center, 0.35, 6).unwrap().with_values(vec![0.0, 1.0, 0.5, 0.2, 0.8, 0.3]).unwrap();
    let n = bezier.num_params();
    record("bezier", gradient_vs_fd(&bezier, &bvp, &spec, &solver, &[0, 5, n - 2], h, reps), &mut pass, &mut lines);

    outcome(pass, format!("3σ joint CI, {reps}+ reps: {}", lines.join("; ")))
}

struct ProductStats {
    ustat: (f64, f64),
    correlated: (f64, f64),
    var_ustat: f64,
    var_uncorrelated: f64,
}

fn product_stats(reps: &[Vec<CoupledEstimate<f64>>]) -> ProductStats {
    let run = |kind| {
        let cfg = ProductEstimatorConfig { kind, batch: 8 };
        reps.iter().map(|s| product_estimate(s, 1, &cfg).unwrap()[0]).collect::<Vec<f64>>()
    };
    let (u, c, n) = (run(ProductEstimator::Ustat), run(ProductEstimator::Correlated), run(ProductEstimator::Uncorrelated));
    ProductStats { ustat: mean_se(&u), correlated: mean_se(&c), var_ustat: sample_variance(&u), var_uncorrelated: sample_variance(&n) }
}

fn c6_ustat() -> Outcome {
    let reps = 10_000;
    let n = 8;
    // û = X, u̇ = X + Z/2 with X ~ N(1, 1), Z ~ N(0, 1): E[û]E[u̇] = 1, Cov = 1
    let synthetic: Vec<Vec<CoupledEstimate<f64>>> = (0..reps)
        .map(|r| {
            let mut rng = RngStream::new(6, r as u64);
            (0..n)
                .map(|_| {
                    let x = 1.0 + rng.normal::<f64>();
                    let d = x + 0.5 * rng.normal::<f64>();
                    CoupledEstimate {
                        value: x,
                        derivative: SparseVec::from_dense(vec![d]),
                        steps: 0,
                        truncated: false,
                        offset_failed: false,
                    }
                })
                .collect()
        })
        .collect();
    let s = product_stats(&synthetic);

    let (center, radius) = (v2(0.0, 0.0), 1.0);
    let (disk, bvp) = translated_disk_scene(center, radius).unwrap();
    let x = v2(0.3, 0.4);
    let (u, du) = translated_disk_solution(center, radius, &x);
    let mut cfg = Solver::new(1e-3, 1e-2).with_walks(n);
    cfg.forward_walks = 16;
    // E[u̇̂] from an independent long run, so the reference carries the estimator's own O(c) bias
    let long = Solver { walks: 200_000, seed: 1 << 40, ..cfg.clone() };
    let d = estimate_derivative_point(&disk, &bvp, &long, &x, 0).unwrap();
    let truth = (u * d.mean[1], u * d.std_error(1));
    let wos: Vec<Vec<CoupledEstimate<f64>>> = (0..reps)
        .map(|r| {
            let c = Solver { seed: r as u64, ..cfg.clone() };
            coupled_walks(&disk, &bvp, &c, &x, 0)
                .unwrap()
                .into_iter()
                .map(|w| CoupledEstimate { derivative: SparseVec::from_dense(vec![w.derivative.get(1)]), ..w })
                .collect()
        })
        .collect();
    let w = product_stats(&wos);

    let check = |p: &ProductStats, (truth, truth_se): (f64, f64)| {
        let joint = |se: f64| (se * se + truth_se * truth_se).sqrt();
        let unbiased = (p.ustat.0 - truth).abs() <= 3.0 * joint(p.ustat.1);
        let efficient = p.var_ustat <= p.var_uncorrelated;
        let biased = (p.correlated.0 - truth).abs() > 3.0 * joint(p.correlated.1);
        (unbiased && efficient && biased, format!(
            "ustat {:.4} ± {:.4} vs {truth:.4} ± {truth_se:.4}, var ustat/uncorrelated {:.3}, correlated {:.4} ± {:.4}",
            p.ustat.0,
            p.ustat.1,
            p.var_ustat / p.var_uncorrelated,
            p.correlated.0,
            p.correlated.1
        ))
    };
    let (ps, ds) = check(&s, (1.0, 0.0));
    let (pw, dw) = check(&w, truth);
    outcome(ps && pw, format!("synthetic: {ds}; WoS: {dw} (analytic u u̇ = {:.4})", u * du))
}

fn c7_ablation() -> Outcome {
    let disk = Spheres2::ball(v2(0.0, 0.0), 1.0, 0.0).unwrap();
    // harmonic data: u = g for every shape, so u̇ = 0 under translation
    let bvp = Problem2::laplace(DirichletData::Restricted(AmbientField::harmonic(6, 1.0 / 6.0)));
    let points: Vec<Vec2> = (0..8)
        .map(|i| {
            let (t, r) = (0.3 + 0.785 * i as f64, 0.5 + 0.45 * i as f64 / 7.0);
            v2(r * t.cos(), r * t.sin())
        })
        .collect();
    let reference = vec![0.0; points.len()];
    let mut solver = Solver::new(1e-3, 1e-2).with_walks(1024).with_seed(7);
    solver.forward_walks = 16;
    let cfg = SweepConfig { solver, estimator: ProductEstimatorConfig::default(), repetitions: 16, param: 1 };
    let sweep = |levels: &[SweepLevel<f64>]| rmse_sweep(&disk, &bvp, &points, levels, &reference, "exact zero", &cfg).unwrap();

    let eps = sweep(&[1e-4, 1e-3, 1e-2, 1e-1].map(SweepLevel::Epsilon));
    // a bias estimate from R repetitions carries a noise floor √(variance / R)
    let floor = |l: &harness::LevelStats| (l.variance / cfg.repetitions as f64).sqrt();
    let eps_ok = eps.levels.windows(2).all(|w| w[1].bias >= w[0].bias - 2.0 * floor(&w[0]))
        && eps.levels[3].bias > eps.levels[0].bias;
    let eps_text: Vec<String> = eps.levels.iter().map(|l| format!("{:.4}±{:.4}", l.bias, floor(l))).collect();

    let off = sweep(&[1e-3, 1e-2, 1e-1].map(SweepLevel::Offset));
    let off_ok = off.levels[1].rmse < off.levels[0].rmse && off.levels[1].rmse < off.levels[2].rmse;
    let off_text: Vec<String> = off.levels.iter().map(|l| format!("{:.4}", l.rmse)).collect();

    let methods = sweep(&[SweepLevel::Method(NormalDerivativeMethod::Backward), SweepLevel::Method(NormalDerivativeMethod::OffsetBall)]);
    let (back, ball) = (methods.levels[0].rmse, methods.levels[1].rmse);
    let pass = eps_ok && off_ok && back <= ball;
    outcome(
        pass,
        format!(
            "eps bias [1e-4..1e-1] {}; offset RMSE [ε,10ε,100ε] {}; backward RMSE {back:.4} vs offset-ball {ball:.4} ({:.0}% lower)",
            eps_text.join(" "),
            off_text.join(" "),
            100.0 * (1.0 - back / ball)
        ),
    )
}

fn c8_equal_time() -> Outcome {
    let poly = Polyline::regular(v2(0.5, 0.5), 0.4, 25).unwrap();
    let bvp = Problem2::laplace(DirichletData::Restricted(AmbientField::linear(v2(1.0, 1.0), 0.0)));
    let points: Vec<Vec2> = (0..4)
        .map(|i| {
            let t = 1.0 + 1.6 * i as f64;
            v2(0.5 + 0.25 * t.cos(), 0.5 + 0.25 * t.sin())
        })
        .collect();
    // linear data is its own harmonic extension, so every shape derivative vanishes
    let reference = vec![vec![0.0; poly.num_params()]; points.len()];
    let cfg = Solver::new(1e-3, 1e-2).with_walks(16).with_seed(8);
    let methods = [GradientMethod::DiffWos, GradientMethod::FiniteDifference { delta: 1e-2 }];
    let r = equal_time_comparison(&poly, &bvp, &points, &reference, &methods, &cfg, Duration::from_secs(2)).unwrap();
    let pass = r.len() == 2 && r[0].rmse < r[1].rmse;
    let text: Vec<String> =
        r.iter().map(|e| format!("{} RMSE {:.4} ({} rounds, {} solves/walk)", e.method, e.rmse, e.rounds, e.solves_per_walk)).collect();
    outcome(pass, format!("N = {}: {}", poly.num_params(), text.join("; ")))
}

const TRANSLATE_SCENE: &str = r#"
[geometry]
kind = "spheres"
spheres = [{ center = [0.5, 0.5], radius = 0.3 }]

[bvp]
dirichlet = { kind = "field", field = { kind = "quadratic", matrix = [[1.0, 0.0], [0.0, 0.0]], linear = [0.0, 1.0] } }

[functional]
mask = { kind = "box", lo = [0.0, 0.0], hi = [1.0, 1.0] }
exterior_value = 0.0
interior_samples = 128

[optimizer]
lr = 0.005
iterations = 200
wpp0 = 2
wpp_final = 64
frozen = [2]
"#;

/// Solution grid of the disk at a displaced pose, as written by `solve`.
fn translate_target() -> Grid {
    let text = TRANSLATE_SCENE.replace("center = [0.5, 0.5]", "center = [0.56, 0.44]");
    let scene = SceneConfig::parse(&text).unwrap().build(std::path::Path::new(".")).unwrap();
    let n = 128;
    let mut grid = Grid::zeros(n, n, 1, v2(0.0, 0.0), v2(1.0, 1.0)).unwrap();
    let cfg = Solver { walks: 256, seed: 7, ..scene.solver.clone() };
    let est = estimate_grid(&scene.shape, &scene.bvp, &cfg, &grid.centers()).unwrap();
    for (idx, e) in est.iter().enumerate() {
        grid.set(idx % n, idx / n, 0, e.as_ref().map_or(0.0, |e| e.mean));
    }
    grid
}

fn translate_scene(target: &Grid) -> Scene {
    let mut scene = SceneConfig::parse(TRANSLATE_SCENE).unwrap().build(std::path::Path::new(".")).unwrap();
    scene.spec.reference = Reference::Grid { grid: target.clone(), channel: 0 };
    scene
}

/// High-sample estimate of `J` with fixed draws, independent of the optimizer's walks.
fn audit_loss<B: Boundary<f64, 2>>(shape: &B, scene: &Scene) -> f64 {
    let spec = Functional2 { interior_samples: 4096, ..scene.spec.clone() };
    let cfg = Solver { walks: 256, seed: 99, ..scene.solver.clone() };
    estimate_functional(shape, &scene.bvp, &spec, &cfg).unwrap().value
}

fn c9_recovery() -> Outcome {
    let start = Instant::now();
    let target = translate_target();
    let scene = translate_scene(&target);
    let initial = audit_loss(&scene.shape, &scene);
    let mut truth = scene.shape.clone();
    truth.set_params(&[0.56, 0.44, 0.3]).unwrap();
    let floor = audit_loss(&truth, &scene) / initial;
    let mut ratios = Vec::new();
    let mut centers = Vec::new();
    for seed in 0..5 {
        let mut shape = scene.shape.clone();
        optimize(&mut shape, &scene.bvp, &scene.spec, &scene.solver, &scene.estimator, &scene.optimizer, seed).unwrap();
        ratios.push(audit_loss(&shape, &scene) / initial);
        let p = shape.params();
        centers.push(format!("({:.3}, {:.3})", p[0], p[1]));
    }
    let elapsed = start.elapsed();
    let pass = ratios.iter().all(|r| *r <= 0.05) && elapsed < Duration::from_secs(600);
    let text: Vec<String> = ratios.iter().map(|r| format!("{:.2}%", 100.0 * r)).collect();
    outcome(
        pass,
        format!(
            "final/initial loss [{}] (limit 5%, {:.2}% at the true pose), centers {} vs (0.56, 0.44), {:.0}s (limit 600s)",
            text.join(" "),
            100.0 * floor,
            centers.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

struct Run {
    loss: f64,
    steps: u64,
    seconds: f64,
    iterations: usize,
}

fn fixed_wpp_run(scene: &Scene, wpp: usize, iterations: usize, seed: u64) -> (Run, Vec<IterationRecord>) {
    let cfg = Optimizer { wpp0: wpp, wpp_final: wpp, iterations, ..scene.optimizer.clone() };
    let mut shape = scene.shape.clone();
    let r = optimize(&mut shape, &scene.bvp, &scene.spec, &scene.solver, &scene.estimator, &cfg, seed).unwrap();
    let last = r.records.last().unwrap();
    let run = Run { loss: audit_loss(&shape, scene), steps: last.steps, seconds: last.seconds, iterations };
    (run, r.records)
}

fn c10_noisy_sgd() -> Outcome {
    let target = translate_target();
    let scene = translate_scene(&target);
    let budget_iterations = 10;
    let (mut equal_cost, mut equal_iter) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..5 {
        let (accurate, _) = fixed_wpp_run(&scene, 128, budget_iterations, seed);
        let (short, _) = fixed_wpp_run(&scene, 2, budget_iterations, seed);
        // same seed and schedule, so a shorter run is a prefix of a longer one
        let (_, records) = fixed_wpp_run(&scene, 2, 128 * budget_iterations, seed);
        let matched = records.iter().position(|r| r.steps >= accurate.steps).map_or(records.len(), |t| t + 1);
        let (noisy, _) = fixed_wpp_run(&scene, 2, matched, seed);
        equal_cost += (noisy.loss < accurate.loss) as usize;
        equal_iter += (accurate.loss < short.loss) as usize;
        lines.push(format!(
            "seed {seed}: wpp128 T={} J={:.2e} ({} steps, {:.2}s) | wpp2 T={} J={:.2e} ({} steps, {:.2}s) | wpp2 T={} J={:.2e}",
            accurate.iterations,
            accurate.loss,
            accurate.steps,
            accurate.seconds,
            noisy.iterations,
            noisy.loss,
            noisy.steps,
            noisy.seconds,
            short.iterations,
            short.loss
        ));
    }
    let pass = equal_cost >= 3 && equal_iter >= 3;
    outcome(
        pass,
        format!(
            "equal cost: wpp2 lower on {equal_cost}/5 seeds; equal iterations: wpp128 lower on {equal_iter}/5 seeds; {}",
            lines.join("; ")
        ),
    )
}

/// Fraction of the open segment between the two poles that lies inside Ω.
fn bridge_fraction(shape: &Monopoles2) -> f64 {
    let (a, b) = (shape.poles()[0].position, shape.poles()[1].position);
    let n = 200;
    let inside = (1..n).filter(|&i| shape.contains(&a.lerp(&b, i as f64 / n as f64))).count();
    inside as f64 / (n - 1) as f64
}

fn c11_implicit() -> Outcome {
    let pole = |x: f64| Monopole { scale: 0.1, position: v2(x, 0.0) };
    let mut shape = Monopoles2::new(-1.0, vec![pole(-0.35), pole(0.35)]).unwrap();
    // f = 4, g = 0: on a disk of radius R the solution is |x|² − R²
    let bvp = Problem2::new(0.0, SourceField::Constant(4.0), DirichletData::Constant(0.0)).unwrap();
    let (lo, hi) = (v2(-0.8, -0.8), v2(0.8, 0.8));
    let n = 128;
    let mut target = Grid::zeros(n, n, 1, lo, hi).unwrap();
    for j in 0..n {
        for i in 0..n {
            let c = target.center(i, j);
            target.set(i, j, 0, (c.dot(&c) - 0.25).min(0.0));
        }
    }
    let mut spec = Functional2::squared(Reference::Grid { grid: target, channel: 0 }, Mask::All);
    spec.exterior_value = Some(0.0);
    spec.region = Some((lo, hi));
    spec.interior_samples = 256;
    spec.boundary_samples = 256;
    let solver = Solver::new(1e-3, 1e-2).with_walks(4);
    let opt = Optimizer { lr: 0.01, iterations: 200, wpp0: 2, wpp_final: 32, frozen: vec![0], ..Optimizer::default() };
    let audit = |s: &Monopoles2| {
        let spec = Functional2 { interior_samples: 4096, ..spec.clone() };
        estimate_functional(s, &bvp, &spec, &Solver { walks: 64, seed: 99, ..solver.clone() }).unwrap().value
    };
    let (initial, bridge0) = (audit(&shape), bridge_fraction(&shape));
    let est = ProductEstimatorConfig::default();
    let r = optimize(&mut shape, &bvp, &spec, &solver, &est, &opt, 11).unwrap();
    let (last, bridge1) = (audit(&shape), bridge_fraction(&shape));
    let reduction = 1.0 - last / initial;
    let merged = bridge0 < 1.0 && bridge1 == 1.0;
    let pass = merged && reduction >= 0.8;
    let p = shape.params();
    outcome(
        pass,
        format!(
            "loss {initial:.3e} -> {last:.3e} ({:.1}% reduction, limit 80%); pole segment inside Ω {:.0}% -> {:.0}%; poles ({:.3}, {:.3}) s={:.3} and ({:.3}, {:.3}) s={:.3}; {} rejected steps",
            100.0 * reduction,
            100.0 * bridge0,
            100.0 * bridge1,
            p[2],
            p[3],
            p[1],
            p[5],
            p[6],
            p[4],
            r.rejected_steps
        ),
    )
}
