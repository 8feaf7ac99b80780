//! Real grid fields, their Fourier coefficients and the normalized DFT pair.
//!
//! The forward transform carries the `1/|N|` factor,
//! `v̂(k) = |N|^{-1} Σ_m ω_N^{-k·m} v(x_m)`, and the inverse is the plain
//! synthesis `v(x_k) = Σ_m ω_N^{k·m} v̂(m)`. Coefficients are stored in full
//! (no half-spectrum packing) in the storage order of [`GridSpec`].

use std::cell::RefCell;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::num_traits::Zero;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Imaginary residue (relative to the field norm) still accepted as round-off.
pub const IMAG_TOL: f64 = 1e-10;

/// Relative tolerance used when validating Hermitian symmetry.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Real `d`-vector field sampled on the grid, `data[α·|N| + offset(k)] = v_α(x_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![0.0; grid.dim() * grid.len()],
        }
    }

    /// Field equal to the vector `value` at every grid point.
    pub fn constant(grid: &GridSpec, value: &[f64]) -> Self {
        assert_eq!(value.len(), grid.dim());
        let n = grid.len();
        let mut data = Vec::with_capacity(grid.dim() * n);
        for &v in value {
            data.extend(std::iter::repeat_n(v, n));
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    /// Unit field `ê_α` everywhere.
    pub fn unit(grid: &GridSpec, axis: usize) -> Self {
        let mut e = vec![0.0; grid.dim()];
        e[axis] = 1.0;
        Self::constant(grid, &e)
    }

    /// Samples `f(x_k)` at every grid point.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let n = grid.len();
        let d = grid.dim();
        let mut data = vec![0.0; d * n];
        for (o, k) in grid.indices() {
            let x = crate::grid::grid_point(grid, &k).expect("index from grid");
            let v = f(&x);
            assert_eq!(v.len(), d);
            for a in 0..d {
                data[a * n + o] = v[a];
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn from_data(grid: &GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.dim() * grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.dim() * grid.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("field contains non-finite values".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[axis * n..(axis + 1) * n]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[axis * n..(axis + 1) * n]
    }

    /// Value `v(x_k)` at storage offset `o`.
    pub fn value_at(&self, o: usize) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.dim()).map(|a| self.data[a * n + o]).collect()
    }

    /// Discrete norm `‖v‖ = (|N|^{-1} Σ_k |v_k|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (dot(&self.data, &self.data) / self.grid.len() as f64).sqrt()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &TensorField) {
        debug_assert_eq!(self.grid, other.grid);
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += alpha * o;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Adds the constant vector `value` at every point.
    pub fn add_constant(&mut self, value: &[f64]) {
        let n = self.grid.len();
        for (a, &v) in value.iter().enumerate() {
            self.data[a * n..(a + 1) * n].iter_mut().for_each(|x| *x += v);
        }
    }

    pub fn sub(&self, other: &TensorField) -> TensorField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Fourier coefficients `v̂_α(k)` for `k` in the full index set.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
    hermitian: bool,
}

impl SpectralField {
    pub fn zeros(grid: &GridSpec, hermitian: bool) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::zero(); grid.dim() * grid.len()],
            hermitian,
        }
    }

    pub fn from_coeffs(grid: &GridSpec, coeffs: Vec<Complex64>, hermitian: bool) -> Result<Self> {
        if coeffs.len() != grid.dim() * grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                grid.dim() * grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
            hermitian,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn set_hermitian(&mut self, hermitian: bool) {
        self.hermitian = hermitian;
    }

    pub fn coeff(&self, axis: usize, k: &crate::grid::MultiIndex) -> Result<Complex64> {
        let o = self.grid.offset(k)?;
        Ok(self.coeffs[axis * self.grid.len() + o])
    }

    /// Largest deviation `|v̂(k) - conj v̂(-k)|` over the pairs whose negation
    /// lies in the full set, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.len();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (o, k) in self.grid.indices() {
            let nk = k.neg();
            if !self.grid.contains(&nk) {
                continue;
            }
            let on = self.grid.offset_wrapped(&nk);
            for a in 0..self.grid.dim() {
                let dev = (self.coeffs[a * n + o] - self.coeffs[a * n + on].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst / scale
    }

    /// Checks the Hermitian symmetry the flag asserts.
    pub fn validate_hermitian(&self) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NonRealField {
                residue: defect,
                tol: HERMITIAN_TOL,
            });
        }
        Ok(())
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

/// Unnormalized in-place multi-dimensional FFT of one scalar component.
pub(crate) fn fft_nd(points: &[usize], buf: &mut [Complex64], direction: FftDirection) {
    debug_assert_eq!(buf.len(), points.iter().product::<usize>());
    for axis in 0..points.len() {
        let n = points[axis];
        if n == 1 {
            continue;
        }
        let fft = plan(n, direction);
        let inner: usize = points[axis + 1..].iter().product();
        if inner == 1 {
            let per_task = n * (4096 / n).max(1);
            buf.par_chunks_mut(per_task).for_each(|chunk| fft.process(chunk));
            continue;
        }
        let lines = buf.len() / n;
        let group = (4096 / n).clamp(1, 64);
        let groups = lines.div_ceil(group);
        let base = |li: usize| (li / inner) * n * inner + li % inner;
        let src: &[Complex64] = buf;
        let done: Vec<Vec<Complex64>> = (0..groups)
            .into_par_iter()
            .map(|gi| {
                let start = gi * group;
                let end = (start + group).min(lines);
                let mut tmp = vec![Complex64::zero(); (end - start) * n];
                for (t, li) in (start..end).enumerate() {
                    let b = base(li);
                    for j in 0..n {
                        tmp[t * n + j] = src[b + j * inner];
                    }
                }
                fft.process(&mut tmp);
                tmp
            })
            .collect();
        for (gi, tmp) in done.into_iter().enumerate() {
            let start = gi * group;
            for (t, line) in tmp.chunks_exact(n).enumerate() {
                let b = base(start + t);
                for (j, v) in line.iter().enumerate() {
                    buf[b + j * inner] = *v;
                }
            }
        }
    }
}

/// Normalized forward DFT of a real field; the result is flagged Hermitian.
pub fn forward_dft(f: &TensorField) -> SpectralField {
    let grid = f.grid();
    let n = grid.len();
    let scale = 1.0 / n as f64;
    let mut coeffs: Vec<Complex64> = f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for chunk in coeffs.chunks_mut(n) {
        fft_nd(grid.points(), chunk, FftDirection::Forward);
        chunk.iter_mut().for_each(|c| *c *= scale);
    }
    SpectralField {
        grid: grid.clone(),
        coeffs,
        hermitian: true,
    }
}

/// Synthesis `Σ_m ω^{k·m} v̂(m)` without discarding imaginary parts.
pub fn inverse_dft_complex(s: &SpectralField) -> Vec<Complex64> {
    let n = s.grid.len();
    let mut values = s.coeffs.clone();
    for chunk in values.chunks_mut(n) {
        fft_nd(s.grid.points(), chunk, FftDirection::Inverse);
    }
    values
}

/// Relative imaginary residue `‖Im v‖ / ‖v‖` of complex grid values.
pub(crate) fn imaginary_residue(values: &[Complex64]) -> f64 {
    let (mut im, mut total) = (0.0, 0.0);
    for v in values {
        im += v.im * v.im;
        total += v.norm_sqr();
    }
    if total == 0.0 {
        0.0
    } else {
        (im / total).sqrt()
    }
}

/// Inverse DFT back to a real field.
///
/// Fails when the synthesized values carry an imaginary part above
/// [`IMAG_TOL`] relative to the field norm.
pub fn inverse_dft(s: &SpectralField) -> Result<TensorField> {
    let values = inverse_dft_complex(s);
    let residue = imaginary_residue(&values);
    if residue > IMAG_TOL {
        return Err(Error::NonRealField {
            residue,
            tol: IMAG_TOL,
        });
    }
    Ok(TensorField {
        grid: s.grid.clone(),
        data: values.into_iter().map(|v| v.re).collect(),
    })
}

/// Inverse DFT of a spectrum derived from the real field `reference` (e.g.
/// by a Fourier multiplier). The imaginary residue is measured against the
/// larger of the result and `reference`, so heavy cancellation in the
/// multiplier does not inflate round-off into a spurious error.
pub(crate) fn inverse_dft_from(s: &SpectralField, reference: &TensorField) -> Result<TensorField> {
    let values = inverse_dft_complex(s);
    let im: f64 = values.iter().map(|v| v.im * v.im).sum();
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>().max(dot(&reference.data, &reference.data));
    let residue = if total == 0.0 { 0.0 } else { (im / total).sqrt() };
    if residue > IMAG_TOL {
        return Err(Error::NonRealField {
            residue,
            tol: IMAG_TOL,
        });
    }
    Ok(TensorField {
        grid: s.grid.clone(),
        data: values.into_iter().map(|v| v.re).collect(),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch {
            left: a.points().to_vec(),
            right: b.points().to_vec(),
        });
    }
    Ok(())
}

/// `⟨u, v⟩ = |N|^{-1} Σ_k ⟨u_k, v_k⟩`.
pub fn inner_product(u: &TensorField, v: &TensorField) -> Result<f64> {
    check_same_grid(u.grid(), v.grid())?;
    Ok(dot(&u.data, &v.data) / u.grid.len() as f64)
}

/// `Σ_k ⟨û(k), v̂(k)⟩_C` with the conjugate on the second argument.
pub fn spectral_inner_product(u: &SpectralField, v: &SpectralField) -> Result<Complex64> {
    check_same_grid(u.grid(), v.grid())?;
    Ok(u.coeffs
        .iter()
        .zip(&v.coeffs)
        .map(|(a, b)| a * b.conj())
        .sum())
}

/// Mean value, i.e. the zero-frequency coefficient.
pub fn mean(u: &TensorField) -> Vec<f64> {
    let n = u.grid.len() as f64;
    (0..u.dim())
        .map(|a| u.component(a).iter().sum::<f64>() / n)
        .collect()
}

/// Total magnitude of the Nyquist coefficients relative to the spectrum norm.
pub fn nyquist_content(s: &SpectralField) -> f64 {
    let g = s.grid();
    if g.is_odd() {
        return 0.0;
    }
    let n = g.len();
    let total: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut nyq = 0.0;
    for (o, k) in g.indices() {
        if g.is_nyquist(&k) {
            for a in 0..g.dim() {
                nyq += s.coeffs[a * n + o].norm_sqr();
            }
        }
    }
    (nyq / total).sqrt()
}

/// Re-samples the trigonometric polynomial represented by `u` on the grid `target`.
///
/// The coefficients on the source grid are embedded into the larger index
/// set with zero padding, so values at coincident grid points are preserved.
pub fn interpolate_to_grid(u: &TensorField, target: &GridSpec) -> Result<TensorField> {
    let source = u.grid();
    if source.cell() != target.cell() || source.dim() != target.dim() {
        return Err(Error::GridMismatch {
            left: source.points().to_vec(),
            right: target.points().to_vec(),
        });
    }
    if source
        .points()
        .iter()
        .zip(target.points())
        .any(|(n, m)| m < n)
    {
        return Err(Error::CoarserTarget {
            from: source.points().to_vec(),
            to: target.points().to_vec(),
        });
    }
    if source == target {
        return Ok(u.clone());
    }
    let spec = forward_dft(u);
    let content = nyquist_content(&spec);
    if content > IMAG_TOL {
        return Err(Error::NyquistContent { content });
    }
    let n = source.len();
    let m = target.len();
    let mut padded = vec![Complex64::zero(); source.dim() * m];
    for (o, k) in source.indices() {
        if source.is_nyquist(&k) {
            continue;
        }
        let t = target.offset_wrapped(&k);
        for a in 0..source.dim() {
            padded[a * m + t] = spec.coeffs[a * n + o];
        }
    }
    inverse_dft(&SpectralField {
        grid: target.clone(),
        coeffs: padded,
        hermitian: true,
    })
}
