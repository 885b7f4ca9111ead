//! Boundary value problem data: `Δu − σu = f` in Ω, `u = g` on ∂Ω.

use crate::error::{Error, Result};
use crate::geometry::{Boundary, BoundaryQuery};
use crate::grid::GridField;
use crate::scalar::Real;
use crate::sparse::SparseVec;
use crate::vector::Vector;

/// Parameter-independent scalar field on the ambient space.
#[derive(Clone, Debug)]
pub enum AmbientField<T: Real, const D: usize> {
    /// `xᵀ A x + b·x + c`.
    Quadratic { matrix: [[T; D]; D], linear: Vector<T, D>, constant: T },
    /// `Σ cₖ Π xᵢ^pₖᵢ` over `(powers, coefficient)` terms.
    Polynomial { terms: Vec<([u32; D], T)> },
    /// Bilinear table over the first two coordinates.
    Grid { grid: GridField<T>, channel: usize },
}

impl<T: Real, const D: usize> AmbientField<T, D> {
    pub fn linear(linear: Vector<T, D>, constant: T) -> Self {
        AmbientField::Quadratic { matrix: [[T::zero(); D]; D], linear, constant }
    }

    pub fn grid(grid: GridField<T>, channel: usize) -> Result<Self> {
        if D != 2 {
            return Err(Error::Config("grid fields are planar".into()));
        }
        if channel >= grid.channels() {
            return Err(Error::Config(format!("grid has no channel {channel}")));
        }
        Ok(AmbientField::Grid { grid, channel })
    }

    /// Real part of `(x₁ + i x₂)^m`, a harmonic polynomial.
    pub fn harmonic(m: u32, scale: T) -> Self {
        let mut terms = Vec::new();
        let mut binom = 1.0f64;
        for k in 0..=m {
            if k % 2 == 0 {
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let mut powers = [0u32; D];
                powers[0] = m - k;
                powers[1] = k;
                terms.push((powers, scale * T::lit(sign * binom)));
            }
            binom = binom * f64::from(m - k) / f64::from(k + 1);
        }
        AmbientField::Polynomial { terms }
    }

    fn monomial(x: &Vector<T, D>, powers: &[u32; D], skip: Option<usize>) -> T {
        let mut v = T::one();
        for (i, &p) in powers.iter().enumerate() {
            let p = if skip == Some(i) { p - 1 } else { p };
            v = v * x[i].powi(p as i32);
        }
        v
    }

    fn planar(x: &Vector<T, D>) -> Vector<T, 2> {
        Vector::new(x[0], x[1])
    }

    pub fn value(&self, x: &Vector<T, D>) -> T {
        match self {
            AmbientField::Quadratic { matrix, linear, constant } => {
                let mut q = *constant + linear.dot(x);
                for i in 0..D {
                    for j in 0..D {
                        q = q + x[i] * matrix[i][j] * x[j];
                    }
                }
                q
            }
            AmbientField::Polynomial { terms } => {
                terms.iter().fold(T::zero(), |acc, (p, c)| acc + *c * Self::monomial(x, p, None))
            }
            AmbientField::Grid { grid, channel } => grid.sample(&Self::planar(x), *channel),
        }
    }

    pub fn gradient(&self, x: &Vector<T, D>) -> Vector<T, D> {
        match self {
            AmbientField::Quadratic { matrix, linear, .. } => {
                let mut g = *linear;
                for i in 0..D {
                    for j in 0..D {
                        g[i] = g[i] + (matrix[i][j] + matrix[j][i]) * x[j];
                    }
                }
                g
            }
            AmbientField::Polynomial { terms } => {
                let mut g = Vector::zero();
                for (p, c) in terms {
                    for i in 0..D {
                        if p[i] > 0 {
                            g[i] = g[i] + *c * T::count(p[i] as usize) * Self::monomial(x, p, Some(i));
                        }
                    }
                }
                g
            }
            AmbientField::Grid { grid, channel } => {
                let g2 = grid.gradient(&Self::planar(x), *channel);
                let mut g = Vector::zero();
                g[0] = g2.x();
                g[1] = g2.y();
                g
            }
        }
    }
}

/// Dirichlet data model.
#[derive(Clone, Debug)]
pub enum DirichletData<T: Real, const D: usize> {
    Constant(T),
    /// Restriction of an ambient field to the boundary.
    Restricted(AmbientField<T, D>),
    /// Values carried by the boundary representation (per sphere, vertex or
    /// anchor) and transported with it.
    Mapped,
}

impl<T: Real, const D: usize> DirichletData<T, D> {
    pub fn value<B: Boundary<T, D> + ?Sized>(&self, boundary: &B, q: &BoundaryQuery<T, D>) -> Result<T> {
        match self {
            DirichletData::Constant(c) => Ok(*c),
            DirichletData::Restricted(f) => Ok(f.value(&q.closest)),
            DirichletData::Mapped => boundary
                .mapped_value(q)
                .ok_or_else(|| Error::Config("boundary carries no data for mapped Dirichlet values".into())),
        }
    }

    /// Normal derivative `∂g/∂n` of the data's extension off the boundary.
    /// Mapped data is extended constantly along the normal.
    pub fn normal_derivative(&self, q: &BoundaryQuery<T, D>) -> T {
        match self {
            DirichletData::Restricted(f) => f.gradient(&q.closest).dot(&q.normal),
            _ => T::zero(),
        }
    }

    /// Derivative of the data at a fixed spatial point, excluding the
    /// normal-motion term.
    pub fn param_derivative<B: Boundary<T, D> + ?Sized>(&self, boundary: &B, q: &BoundaryQuery<T, D>) -> SparseVec<T> {
        match self {
            DirichletData::Mapped => boundary.mapped_derivative(q),
            _ => SparseVec::empty(boundary.num_params()),
        }
    }
}

#[derive(Clone, Debug)]
pub enum SourceField<T: Real> {
    Zero,
    Constant(T),
    Grid(GridField<T>),
}

impl<T: Real> SourceField<T> {
    pub fn value<const D: usize>(&self, x: &Vector<T, D>) -> T {
        match self {
            SourceField::Zero => T::zero(),
            SourceField::Constant(c) => *c,
            SourceField::Grid(g) => g.sample(&Vector::new(x[0], x[1]), 0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SourceField::Zero)
    }
}

#[derive(Clone, Debug)]
pub struct Bvp<T: Real, const D: usize> {
    pub sigma: T,
    pub source: SourceField<T>,
    pub data: DirichletData<T, D>,
}

impl<T: Real, const D: usize> Bvp<T, D> {
    pub fn new(sigma: T, source: SourceField<T>, data: DirichletData<T, D>) -> Result<Self> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::Config("screening coefficient must be finite and non-negative".into()));
        }
        Ok(Self { sigma, source, data })
    }

    /// Laplace problem with the given data.
    pub fn laplace(data: DirichletData<T, D>) -> Self {
        Self { sigma: T::zero(), source: SourceField::Zero, data }
    }
}
