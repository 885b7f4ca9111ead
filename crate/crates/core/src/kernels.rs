//! Green's functions, Poisson-kernel attenuation, and uniform sampling on
//! balls for the screened Poisson operator `Δu - σu` in two and three
//! dimensions.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::vector::Vector;

/// Argument at which the Bessel routines switch from power series to
/// quadrature.
const BESSEL_SPLIT: f64 = 3.75;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0_scaled(x) * x.abs().exp()
}

/// `exp(-|x|) I₀(x)`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= BESSEL_SPLIT {
        // Σ (x²/4)^k / (k!)²
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..60 {
            term *= q / (k * k) as f64;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        // (1/π) ∫₀^π exp(x (cos θ - 1)) dθ; the trapezoid rule is spectrally
        // accurate for this periodic integrand.
        let n = 48 + (4.0 * x.sqrt()) as usize * 8;
        let h = std::f64::consts::PI / n as f64;
        let mut s = 0.5 * (1.0 + (-2.0 * x).exp());
        for k in 1..n {
            s += (x * ((k as f64 * h).cos() - 1.0)).exp();
        }
        s / n as f64
    }
}

/// Modified Bessel function of the second kind, order zero. Requires `x > 0`.
pub fn bessel_k0(x: f64) -> f64 {
    if x <= BESSEL_SPLIT {
        // K₀ = -(ln(x/2) + γ) I₀ + Σ (x²/4)^k / (k!)² H_k
        let q = 0.25 * x * x;
        let (mut term, mut harmonic) = (1.0, 0.0);
        let mut i0 = 1.0;
        let mut tail = 0.0;
        for k in 1..60 {
            term *= q / (k * k) as f64;
            harmonic += 1.0 / k as f64;
            i0 += term;
            tail += term * harmonic;
            if term * harmonic < 1e-18 * tail.abs().max(1e-300) {
                break;
            }
        }
        -((0.5 * x).ln() + EULER_GAMMA) * i0 + tail
    } else {
        bessel_k0_scaled(x) * (-x).exp()
    }
}

/// `exp(x) K₀(x)`. Requires `x > 0`.
pub fn bessel_k0_scaled(x: f64) -> f64 {
    if x <= BESSEL_SPLIT {
        return bessel_k0(x) * x.exp();
    }
    // ∫₀^∞ exp(-x (cosh t - 1)) dt, trapezoid on a truncated range.
    let h = 0.05;
    let mut s = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let v = (-x * (t.cosh() - 1.0)).exp();
        s += v;
        if v < 1e-18 {
            break;
        }
        k += 1;
    }
    s * h
}

/// Surface measure of the sphere of radius `r` in `dim` dimensions.
pub fn sphere_area<T: Real>(dim: usize, r: T) -> T {
    match dim {
        2 => T::TAU() * r,
        3 => T::lit(4.0) * T::PI() * r * r,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Volume of the ball of radius `r` in `dim` dimensions.
pub fn ball_volume<T: Real>(dim: usize, r: T) -> T {
    match dim {
        2 => T::PI() * r * r,
        3 => T::lit(4.0 / 3.0) * T::PI() * r * r * r,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Screened Poisson kernels for a ball of radius `radius` centred at the walk
/// point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallKernel<T> {
    pub dim: usize,
    pub radius: T,
    pub sigma: T,
}

impl<T: Real> BallKernel<T> {
    pub fn new(dim: usize, radius: T, sigma: T) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("kernel dimension {dim} not in {{2, 3}}")));
        }
        if radius.is_nan() || radius <= T::zero() || sigma.is_nan() || sigma < T::zero() {
            return Err(Error::Config("ball kernel needs R > 0 and sigma >= 0".into()));
        }
        Ok(Self { dim, radius, sigma })
    }

    /// Poisson kernel divided by the uniform sphere density: the expected
    /// weight carried from the sphere back to the centre.
    pub fn attenuation(&self) -> T {
        if self.sigma == T::zero() {
            return T::one();
        }
        let x = (self.sigma.sqrt() * self.radius).as_f64();
        let a = match self.dim {
            3 => {
                if x < 1e-8 {
                    1.0
                } else {
                    // x / sinh x = 2x e^{-x} / (1 - e^{-2x})
                    2.0 * x * (-x).exp() / (-(-2.0 * x).exp_m1())
                }
            }
            _ => 1.0 / bessel_i0(x),
        };
        T::lit(a)
    }

    /// Zero-Dirichlet Green's function at distance `r` from the centre.
    pub fn greens(&self, r: T) -> Result<T> {
        if !(r > T::zero() && r < self.radius) {
            return Err(Error::Domain("Green's function radius"));
        }
        let (r, big_r, sigma) = (r.as_f64(), self.radius.as_f64(), self.sigma.as_f64());
        let g = match (self.dim, sigma == 0.0) {
            (3, true) => (1.0 / r - 1.0 / big_r) / (4.0 * std::f64::consts::PI),
            (2, true) => (big_r / r).ln() / std::f64::consts::TAU,
            (3, false) => {
                let k = sigma.sqrt();
                // sinh(k(R-r)) / sinh(kR) without overflow
                let ratio = (-k * r).exp() * (-(-2.0 * k * (big_r - r)).exp_m1())
                    / (-(-2.0 * k * big_r).exp_m1());
                ratio / (4.0 * std::f64::consts::PI * r)
            }
            _ => {
                let k = sigma.sqrt();
                let (a, b) = (k * r, k * big_r);
                let correction =
                    bessel_k0_scaled(b) * bessel_i0_scaled(a) / bessel_i0_scaled(b) * (a - 2.0 * b).exp();
                (bessel_k0(a) - correction) / std::f64::consts::TAU
            }
        };
        Ok(T::lit(g))
    }

    /// Value at the boundary radius; zero by construction.
    pub fn greens_at_boundary(&self) -> T {
        T::zero()
    }
}

/// Uniform sample on the sphere of radius `r` about `center`.
pub fn sample_sphere<T: Real, const D: usize>(rng: &mut RngStream, center: &Vector<T, D>, r: T) -> Vector<T, D> {
    *center + rng.unit_sphere::<T, D>() * r
}

/// Uniform sample in the ball of radius `r` about `center`.
pub fn sample_ball<T: Real, const D: usize>(rng: &mut RngStream, center: &Vector<T, D>, r: T) -> Vector<T, D> {
    *center + rng.unit_ball::<T, D>() * r
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule; test oracle only.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    fn i0_oracle(x: f64) -> f64 {
        simpson(|t| (x * t.cos()).exp(), 0.0, std::f64::consts::PI, 20_000) / std::f64::consts::PI
    }

    fn k0_oracle(x: f64) -> f64 {
        simpson(|t| (-x * t.cosh()).exp(), 0.0, 12.0, 200_000)
    }

    #[test]
    fn bessel_matches_quadrature_oracle() {
        for &x in &[1e-3, 0.1, 0.5, 1.0, 2.0, 3.7, 3.75, 3.8, 5.0, 10.0, 25.0] {
            let (i, io) = (bessel_i0(x), i0_oracle(x));
            assert!(((i - io) / io).abs() < 1e-8, "I0({x}) = {i}, oracle {io}");
            let (k, ko) = (bessel_k0(x), k0_oracle(x));
            assert!(((k - ko) / ko).abs() < 1e-8, "K0({x}) = {k}, oracle {ko}");
        }
    }

    #[test]
    fn attenuation_values() {
        for dim in [2, 3] {
            assert_eq!(BallKernel::new(dim, 0.7, 0.0).unwrap().attenuation(), 1.0);
        }
        let a3 = BallKernel::new(3, 1.0, 1.0).unwrap().attenuation();
        assert!((a3 - 1.0 / 1f64.sinh()).abs() < 1e-12);
        assert!((a3 - 0.85092).abs() < 1e-5);
        let a2 = BallKernel::new(2, 1.0f64, 1.0).unwrap().attenuation();
        assert!((a2 - 1.0 / 1.266_065_877_752_008_4).abs() < 1e-12);
    }

    /// Radial solution of Δu = σu regular at the origin, integrated as an ODE
    /// with RK4; the ratio u(0)/u(R) is the attenuation.
    fn radial_ode_ratio(dim: usize, sigma: f64, big_r: f64) -> f64 {
        // u'' + (d-1)/r u' = σ u, start from series u ≈ 1 + σ r²/(2d).
        let r0 = 1e-4;
        let d = dim as f64;
        let mut u = 1.0 + sigma * r0 * r0 / (2.0 * d);
        let mut v = sigma * r0 / d;
        let n = 20_000;
        let h = (big_r - r0) / n as f64;
        let f = |r: f64, u: f64, v: f64| (v, sigma * u - (d - 1.0) / r * v);
        let mut r = r0;
        for _ in 0..n {
            let (k1u, k1v) = f(r, u, v);
            let (k2u, k2v) = f(r + h / 2.0, u + h / 2.0 * k1u, v + h / 2.0 * k1v);
            let (k3u, k3v) = f(r + h / 2.0, u + h / 2.0 * k2u, v + h / 2.0 * k2v);
            let (k4u, k4v) = f(r + h, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            r += h;
        }
        1.0 / u
    }

    #[test]
    fn attenuation_matches_radial_ode() {
        for dim in [2, 3] {
            for &(s, r) in &[(1.0, 1.0), (4.0, 0.5), (9.0, 1.3)] {
                let k = BallKernel::new(dim, r, s).unwrap();
                let oracle = radial_ode_ratio(dim, s, r);
                assert!((k.attenuation() - oracle).abs() < 1e-7, "dim {dim} σ {s} R {r}");
            }
        }
    }

    #[test]
    fn greens_values() {
        let k = BallKernel::new(3, 1.0, 0.0).unwrap();
        assert!((k.greens(0.5).unwrap() - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-14);
        let k2 = BallKernel::new(2, 1.0f64, 0.0).unwrap();
        assert!(k2.greens(1.0).is_err());
        assert!(k2.greens(1.0 - 1e-12).unwrap().abs() < 1e-11);
        assert!(k2.greens(0.0).is_err());
        // singular rate matches free-space Yukawa kernel e^{-kr}/(4πr)
        let k4 = BallKernel::new(3, 1.0, 4.0).unwrap();
        let r = 1e-7;
        assert!((r * k4.greens(r).unwrap() - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-6);
        // 2D screened kernel vanishes at the boundary and behaves like -ln(r)/2π
        let k2s = BallKernel::new(2, 1.0f64, 4.0).unwrap();
        assert!(k2s.greens(1.0 - 1e-9).unwrap().abs() < 1e-8);
        let r = 1e-6;
        let g = k2s.greens(r).unwrap();
        assert!((g / (-(r.ln()) / std::f64::consts::TAU) - 1.0).abs() < 0.1);
    }

    #[test]
    fn greens_integrates_to_mean_exit_time() {
        // ∫_B G = R²/(2 dim) for σ = 0; radial quadrature oracle.
        for dim in [2usize, 3] {
            let big_r = 0.8;
            let k = BallKernel::new(dim, big_r, 0.0).unwrap();
            let integral = simpson(
                |r| {
                    if r <= 0.0 || r >= big_r {
                        0.0
                    } else {
                        k.greens(r).unwrap() * sphere_area::<f64>(dim, r)
                    }
                },
                0.0,
                big_r,
                200_000,
            );
            assert!((integral - big_r * big_r / (2.0 * dim as f64)).abs() < 1e-4, "dim {dim}: {integral}");
        }
    }

    #[test]
    fn screened_greens_integral_matches_attenuation_identity() {
        // For Δu - σu = -1 with u = 0 on ∂B: u(0) = ∫G = (1 - α)/σ.
        for dim in [2usize, 3] {
            let (big_r, sigma) = (1.0, 4.0);
            let k = BallKernel::new(dim, big_r, sigma).unwrap();
            let integral = simpson(
                |r| {
                    if r <= 0.0 || r >= big_r {
                        0.0
                    } else {
                        k.greens(r).unwrap() * sphere_area::<f64>(dim, r)
                    }
                },
                0.0,
                big_r,
                400_000,
            );
            let expect = (1.0 - k.attenuation()) / sigma;
            assert!((integral - expect).abs() < 1e-4, "dim {dim}: {integral} vs {expect}");
        }
    }

    #[test]
    fn sphere_samples_have_radius() {
        let mut rng = RngStream::new(1, 1);
        let c = Vector::<f64, 2>::new(0.3, -0.2);
        for _ in 0..1000 {
            let p = sample_sphere(&mut rng, &c, 1.0);
            assert!(((p - c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_sample_mean_is_center() {
        let mut rng = RngStream::new(2, 9);
        let c = Vector::<f64, 3>::new3(1.0, 2.0, 3.0);
        let n = 100_000;
        let mut mean = Vector::zero();
        for _ in 0..n {
            mean += sample_sphere(&mut rng, &c, 2.0);
        }
        mean = mean * (1.0 / n as f64);
        // per-coordinate std = R/√3
        let tol = 3.0 * 2.0 / 3f64.sqrt() / (n as f64).sqrt();
        for i in 0..3 {
            assert!((mean[i] - c[i]).abs() < tol);
        }
    }

    #[test]
    fn ball_radial_cdf_ks() {
        for dim in [2usize, 3] {
            let mut rng = RngStream::new(3, dim as u64);
            let n = 20_000;
            let mut radii: Vec<f64> = (0..n)
                .map(|_| match dim {
                    2 => sample_ball(&mut rng, &Vector::<f64, 2>::zero(), 1.5).norm(),
                    _ => sample_ball(&mut rng, &Vector::<f64, 3>::zero(), 1.5).norm(),
                })
                .collect();
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut dmax: f64 = 0.0;
            for (i, r) in radii.iter().enumerate() {
                let cdf = (r / 1.5).powi(dim as i32);
                dmax = dmax.max((cdf - i as f64 / n as f64).abs()).max((cdf - (i + 1) as f64 / n as f64).abs());
            }
            // KS critical value at level 0.01
            assert!(dmax < 1.628 / (n as f64).sqrt(), "dim {dim}: D = {dmax}");
        }
    }

    #[test]
    fn mean_value_identity_for_linear_data() {
        let mut rng = RngStream::new(4, 4);
        let c = Vector::<f64, 2>::new(0.25, 0.1);
        let n = 100_000;
        let k = BallKernel::new(2, 0.5, 0.0).unwrap();
        let samples: Vec<f64> = (0..n).map(|_| sample_sphere(&mut rng, &c, 0.5)[0]).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((k.attenuation() * mean - c[0]).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn screened_mean_value_on_3d_ball() {
        // u(x) = sinh(k x₁)/x-free: u = sinh(k x₁) solves Δu = k² u.
        let sigma: f64 = 4.0;
        let k = sigma.sqrt();
        let c = Vector::<f64, 3>::new3(0.3, 0.0, 0.0);
        let big_r = 0.4;
        let kernel = BallKernel::new(3, big_r, sigma).unwrap();
        let mut rng = RngStream::new(5, 5);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| kernel.attenuation() * (k * sample_sphere(&mut rng, &c, big_r)[0]).sinh())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - (k * c[0]).sinh()).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn single_step_source_estimator_mean_exit_time() {
        for dim in [2usize, 3] {
            let big_r = 1.0;
            let kernel = BallKernel::new(dim, big_r, 0.0).unwrap();
            let mut rng = RngStream::new(6, dim as u64);
            let n = 200_000;
            let vol = ball_volume::<f64>(dim, big_r);
            let samples: Vec<f64> = (0..n)
                .map(|_| {
                    let r = match dim {
                        2 => rng.unit_ball::<f64, 2>().norm(),
                        _ => rng.unit_ball::<f64, 3>().norm(),
                    };
                    if r <= 0.0 {
                        0.0
                    } else {
                        kernel.greens(r * big_r).unwrap() * vol
                    }
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let expect = big_r * big_r / (2.0 * dim as f64);
            assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "dim {dim}: {mean}");
        }
    }
}
