//! Sparse parameter-space vectors.

use crate::scalar::Real;

/// Occupancy above which a sparse vector is stored densely.
pub const DENSE_OCCUPANCY: f64 = 0.25;

/// Vector over the `N` scene parameters. Sparse storage keeps sorted,
/// deduplicated `(index, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum SparseVec<T> {
    Sparse { len: usize, entries: Vec<(usize, T)> },
    Dense(Vec<T>),
}

impl<T: Real> SparseVec<T> {
    pub fn empty(len: usize) -> Self {
        SparseVec::Sparse { len, entries: Vec::new() }
    }

    /// Builds from possibly repeated pairs; repeated indices are summed and
    /// exact zeros dropped.
    pub fn from_pairs(len: usize, mut pairs: Vec<(usize, T)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            debug_assert!(i < len);
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 = last.1 + v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 != T::zero());
        if len > 0 && entries.len() as f64 > DENSE_OCCUPANCY * len as f64 {
            let mut d = vec![T::zero(); len];
            for (i, v) in entries {
                d[i] = v;
            }
            SparseVec::Dense(d)
        } else {
            SparseVec::Sparse { len, entries }
        }
    }

    pub fn from_dense(values: Vec<T>) -> Self {
        SparseVec::Dense(values)
    }

    pub fn len(&self) -> usize {
        match self {
            SparseVec::Sparse { len, .. } => *len,
            SparseVec::Dense(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        match self {
            SparseVec::Sparse { entries, .. } => entries.len(),
            SparseVec::Dense(d) => d.iter().filter(|v| **v != T::zero()).count(),
        }
    }

    pub fn get(&self, k: usize) -> T {
        match self {
            SparseVec::Sparse { entries, .. } => entries
                .binary_search_by_key(&k, |e| e.0)
                .map(|i| entries[i].1)
                .unwrap_or_else(|_| T::zero()),
            SparseVec::Dense(d) => d[k],
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, T)> + '_> {
        match self {
            SparseVec::Sparse { entries, .. } => Box::new(entries.iter().copied()),
            SparseVec::Dense(d) => Box::new(
                d.iter().copied().enumerate().filter(|(_, v)| *v != T::zero()),
            ),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        match self {
            SparseVec::Sparse { len, entries } => SparseVec::Sparse {
                len: *len,
                entries: entries.iter().map(|&(i, v)| (i, v * s)).collect(),
            },
            SparseVec::Dense(d) => SparseVec::Dense(d.iter().map(|v| *v * s).collect()),
        }
    }

    /// `out += s * self`
    pub fn add_scaled_to(&self, s: T, out: &mut [T]) {
        match self {
            SparseVec::Sparse { entries, .. } => {
                for &(i, v) in entries {
                    out[i] = out[i] + s * v;
                }
            }
            SparseVec::Dense(d) => {
                for (o, v) in out.iter_mut().zip(d) {
                    *o = *o + s * *v;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        self.add_scaled_to(T::one(), &mut out);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|(_, v)| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        let pairs = self.iter().chain(other.iter()).collect();
        Self::from_pairs(self.len().max(other.len()), pairs)
    }
}
