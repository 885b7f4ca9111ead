//! Fixed-size vectors over a [`Real`] scalar.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<T, const D: usize>(pub [T; D]);

impl<T: Real, const D: usize> Default for Vector<T, D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real, const D: usize> Vector<T, D> {
    #[inline]
    pub fn zero() -> Self {
        Self([T::zero(); D])
    }

    /// Unit vector along axis `k`.
    #[inline]
    pub fn axis(k: usize) -> Self {
        let mut v = Self::zero();
        v.0[k] = T::one();
        v
    }

    #[inline]
    pub fn from_f64(a: [f64; D]) -> Self {
        let mut v = Self::zero();
        for (dst, src) in v.0.iter_mut().zip(a) {
            *dst = T::lit(src);
        }
        v
    }

    #[inline]
    pub fn dot(&self, rhs: &Self) -> T {
        let mut s = T::zero();
        for i in 0..D {
            s = s + self.0[i] * rhs.0[i];
        }
        s
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Returns the unit vector, or zero for a zero input.
    #[inline]
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            *self * n.recip()
        } else {
            Self::zero()
        }
    }

    #[inline]
    pub fn distance(&self, rhs: &Self) -> T {
        (*self - *rhs).norm()
    }

    #[inline]
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut v = *self;
        for c in v.0.iter_mut() {
            *c = f(*c);
        }
        v
    }

    #[inline]
    pub fn min(&self, rhs: &Self) -> Self {
        let mut v = *self;
        for i in 0..D {
            v.0[i] = v.0[i].min(rhs.0[i]);
        }
        v
    }

    #[inline]
    pub fn max(&self, rhs: &Self) -> Self {
        let mut v = *self;
        for i in 0..D {
            v.0[i] = v.0[i].max(rhs.0[i]);
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn lerp(&self, rhs: &Self, t: T) -> Self {
        *self + (*rhs - *self) * t
    }
}

impl<T: Real> Vector<T, 2> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self([x, y])
    }

    #[inline]
    pub fn x(&self) -> T {
        self.0[0]
    }

    #[inline]
    pub fn y(&self) -> T {
        self.0[1]
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(&self, rhs: &Self) -> T {
        self.0[0] * rhs.0[1] - self.0[1] * rhs.0[0]
    }

    /// Counter-clockwise rotation by 90 degrees.
    #[inline]
    pub fn perp(&self) -> Self {
        Self([-self.0[1], self.0[0]])
    }
}

impl<T: Real> Vector<T, 3> {
    #[inline]
    pub fn new3(x: T, y: T, z: T) -> Self {
        Self([x, y, z])
    }
}

impl<T: Real, const D: usize> Add for Vector<T, D> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..D {
            self.0[i] = self.0[i] + rhs.0[i];
        }
        self
    }
}

impl<T: Real, const D: usize> AddAssign for Vector<T, D> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real, const D: usize> Sub for Vector<T, D> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..D {
            self.0[i] = self.0[i] - rhs.0[i];
        }
        self
    }
}

impl<T: Real, const D: usize> SubAssign for Vector<T, D> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real, const D: usize> Mul<T> for Vector<T, D> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: T) -> Self {
        for c in self.0.iter_mut() {
            *c = *c * rhs;
        }
        self
    }
}

impl<T: Real, const D: usize> Neg for Vector<T, D> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.map(|c| -c)
    }
}

impl<T, const D: usize> Index<usize> for Vector<T, D> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T, const D: usize> IndexMut<usize> for Vector<T, D> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}
