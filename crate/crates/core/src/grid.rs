//! Periodic cell geometry, multi-index sets and grid points.
//!
//! A grid with `N_α` points along axis `α` carries the full index set
//! `{k : -N_α/2 <= k_α < N_α/2}` and the reduced set obtained by dropping
//! the Nyquist frequencies `k_α = -N_α/2` of even axes. Both sets are
//! enumerated in storage order: axis-wise offset `k_α mod N_α`, row-major
//! with the last axis fastest, which is the native output order of FFT
//! kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Integer multi-index with up to [`MAX_DIM`] components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    coords: [i64; MAX_DIM],
    dim: usize,
}

impl MultiIndex {
    pub fn new(k: &[i64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&k.len()),
            "multi-index dimension must be 1..=3"
        );
        let mut coords = [0; MAX_DIM];
        coords[..k.len()].copy_from_slice(k);
        Self {
            coords,
            dim: k.len(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.coords[..self.dim]
    }

    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> Self {
        let mut out = *self;
        for c in out.coords.iter_mut() {
            *c = -*c;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for a in 0..self.dim {
            out.coords[a] -= other.coords[a];
        }
        out
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = i64;
    fn index(&self, a: usize) -> &i64 {
        &self.as_slice()[a]
    }
}

/// Periodic cell `Π (-Y_α/2, Y_α/2)` sampled by a regular grid of `N_α` points per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    cell: Vec<f64>,
    points: Vec<usize>,
}

impl GridSpec {
    /// Builds a two- or three-dimensional grid.
    pub fn new(cell: &[f64], points: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&points.len()) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {}",
                points.len()
            )));
        }
        Self::with_any_dim(cell, points)
    }

    /// Like [`GridSpec::new`] but also admits one-dimensional grids.
    pub fn with_any_dim(cell: &[f64], points: &[usize]) -> Result<Self> {
        let d = points.len();
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidGrid(format!("unsupported dimension {d}")));
        }
        if cell.len() != d {
            return Err(Error::InvalidGrid(format!(
                "cell has {} sides but grid has {d} axes",
                cell.len()
            )));
        }
        if let Some(y) = cell.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
            return Err(Error::InvalidGrid(format!("cell side {y} is not positive")));
        }
        if points.contains(&0) {
            return Err(Error::InvalidGrid("every axis needs at least one point".into()));
        }
        Ok(Self {
            cell: cell.to_vec(),
            points: points.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn cell(&self) -> &[f64] {
        &self.cell
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Number of grid points `|N|`.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell measure `|Y|`.
    pub fn cell_volume(&self) -> f64 {
        self.cell.iter().product()
    }

    /// True iff every `N_α` is odd, i.e. the reduced and full index sets coincide.
    pub fn is_odd(&self) -> bool {
        self.points.iter().all(|n| n % 2 == 1)
    }

    /// Grid with the same cell and `M_α` points per axis.
    pub fn with_points(&self, points: &[usize]) -> Result<Self> {
        Self::with_any_dim(&self.cell, points)
    }

    /// The `2N-1` grid on which products of two trigonometric polynomials are sampled exactly.
    pub fn doubled(&self) -> Self {
        let pts: Vec<usize> = self.points.iter().map(|n| 2 * n - 1).collect();
        Self {
            cell: self.cell.clone(),
            points: pts,
        }
    }

    pub(crate) fn strides(&self) -> [usize; MAX_DIM] {
        let mut strides = [0; MAX_DIM];
        let mut s = 1;
        for a in (0..self.dim()).rev() {
            strides[a] = s;
            s *= self.points[a];
        }
        strides
    }

    /// True iff `k` belongs to the full index set.
    pub fn contains(&self, k: &MultiIndex) -> bool {
        k.dim() == self.dim()
            && k.as_slice().iter().zip(&self.points).all(|(&c, &n)| {
                let n = n as i64;
                // -n/2 <= c < n/2, written without halving odd n
                -n <= 2 * c && 2 * c < n
            })
    }

    /// True iff `k` is in the full but not in the reduced index set.
    pub fn is_nyquist(&self, k: &MultiIndex) -> bool {
        self.contains(k)
            && k.as_slice()
                .iter()
                .zip(&self.points)
                .any(|(&c, &n)| n % 2 == 0 && 2 * c == -(n as i64))
    }

    /// Linear storage offset of a member of the full index set.
    pub fn offset(&self, k: &MultiIndex) -> Result<usize> {
        if !self.contains(k) {
            return Err(Error::IndexOutOfRange {
                index: k.as_slice().to_vec(),
                points: self.points.clone(),
            });
        }
        Ok(self.offset_wrapped(k))
    }

    /// Storage offset of `k mod N`; every integer multi-index aliases to one slot.
    pub fn offset_wrapped(&self, k: &MultiIndex) -> usize {
        let strides = self.strides();
        k.as_slice()
            .iter()
            .zip(&self.points)
            .enumerate()
            .map(|(a, (&c, &n))| (c.rem_euclid(n as i64) as usize) * strides[a])
            .sum()
    }

    /// Multi-index stored at `offset`.
    pub fn index_at(&self, offset: usize) -> MultiIndex {
        let mut coords = [0i64; MAX_DIM];
        let mut rest = offset;
        for a in (0..self.dim()).rev() {
            let n = self.points[a];
            let j = rest % n;
            rest /= n;
            coords[a] = axis_frequency(j, n);
        }
        MultiIndex {
            coords,
            dim: self.dim(),
        }
    }

    /// Iterator over `(offset, index)` pairs of the full set in storage order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, MultiIndex)> + '_ {
        (0..self.len()).map(move |o| (o, self.index_at(o)))
    }
}

/// Signed frequency stored at position `j` of an axis with `n` points.
#[inline]
pub(crate) fn axis_frequency(j: usize, n: usize) -> i64 {
    if j <= (n - 1) / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// The full index set `Z^d_N` in storage order.
pub fn full_index_set(g: &GridSpec) -> Vec<MultiIndex> {
    g.indices().map(|(_, k)| k).collect()
}

/// The reduced index set (full set without Nyquist frequencies), in storage order.
pub fn reduced_index_set(g: &GridSpec) -> Vec<MultiIndex> {
    g.indices()
        .map(|(_, k)| k)
        .filter(|k| !g.is_nyquist(k))
        .collect()
}

/// Nyquist indices: the complement of the reduced set in the full set.
pub fn nyquist_index_set(g: &GridSpec) -> Vec<MultiIndex> {
    g.indices()
        .map(|(_, k)| k)
        .filter(|k| g.is_nyquist(k))
        .collect()
}

/// Grid point `x_k = (Y_α k_α / N_α)_α`.
pub fn grid_point(g: &GridSpec, k: &MultiIndex) -> Result<Vec<f64>> {
    if !g.contains(k) {
        return Err(Error::IndexOutOfRange {
            index: k.as_slice().to_vec(),
            points: g.points().to_vec(),
        });
    }
    Ok(k.as_slice()
        .iter()
        .zip(g.cell().iter().zip(g.points()))
        .map(|(&c, (&y, &n))| y * c as f64 / n as f64)
        .collect())
}

/// Frequency vector `ξ(k) = (k_α / Y_α)_α`; defined for any integer multi-index.
pub fn frequency(g: &GridSpec, k: &MultiIndex) -> Vec<f64> {
    k.as_slice()
        .iter()
        .zip(g.cell())
        .map(|(&c, &y)| c as f64 / y)
        .collect()
}
