//! Guaranteed bounds: exact bilinear forms by double-grid quadrature, the
//! dense full-matrix oracle, bound assembly and Löwner-order utilities.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::num_traits::Zero;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{full_index_set, GridSpec, MultiIndex};
use crate::material::{asymmetry, inclusion_weight, spd_inverse, symmetrize, Material, PixelSpectrum};
use crate::projections::subspace_residual;
use crate::solver::{loaded_fields, AuxiliarySolution, Formulation};
use crate::spectral::{fft_nd, forward_dft, interpolate_to_grid, nyquist_content, TensorField};

/// Conformity tolerance for minimizers entering a bound.
pub const CONFORMITY_TOL: f64 = 1e-10;

/// Largest grid the dense oracle will assemble.
pub const FULL_MATRIX_CAP: usize = 1024;

/// Coefficient samples on the `2N-1` grid,
/// `A_{2N-1}(x_k) = Σ_{n ∈ Z_{2N-1}} ω^{k·n} Â(n)`, row-major `d×d` per point.
#[derive(Clone, Debug)]
pub struct DoubleGridBlocks {
    grid: GridSpec,
    blocks: Vec<f64>,
    /// Points where the truncated block is not positive definite.
    pub non_spd_points: usize,
}

impl DoubleGridBlocks {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn block(&self, o: usize) -> DMatrix<f64> {
        let d = self.grid.dim();
        DMatrix::from_row_slice(d, d, &self.blocks[o * d * d..(o + 1) * d * d])
    }
}

fn require_odd(g: &GridSpec) -> Result<()> {
    if !g.is_odd() {
        return Err(Error::EvenGrid(g.points().to_vec()));
    }
    Ok(())
}

/// Accumulates `w · Re(F⁻¹[ŝ])` into `blocks` for a scalar spectrum `ŝ`.
fn add_scalar_term(
    g2: &GridSpec,
    blocks: &mut [f64],
    weight: &DMatrix<f64>,
    coeff: impl Fn(&MultiIndex) -> Complex64 + Sync,
) {
    let d = g2.dim();
    let mut buf: Vec<Complex64> = (0..g2.len())
        .into_par_iter()
        .map(|o| coeff(&g2.index_at(o)))
        .collect();
    fft_nd(g2.points(), &mut buf, FftDirection::Inverse);
    let w: Vec<f64> = weight.transpose().as_slice().to_vec();
    blocks
        .par_chunks_mut(d * d)
        .zip(&buf)
        .for_each(|(b, s)| b.iter_mut().zip(&w).for_each(|(b, w)| *b += w * s.re));
}

/// Double-grid coefficient blocks of `A` (or of `A⁻¹` with `inverse`) for
/// the odd grid `g`. One FFT per inclusion, or one for a bitmap.
pub fn double_grid_blocks(material: &Material, g: &GridSpec, inverse: bool) -> Result<DoubleGridBlocks> {
    require_odd(g)?;
    if material.cell() != g.cell() {
        return Err(Error::Material("material and grid cells differ".into()));
    }
    let g2 = g.doubled();
    let d = g.dim();
    let mut blocks = vec![0.0; g2.len() * d * d];
    match material {
        Material::Inclusions(s) => {
            let s = if inverse { s.inverse_field()? } else { s.clone() };
            let a0: Vec<f64> = s.a0().transpose().as_slice().to_vec();
            blocks
                .chunks_mut(d * d)
                .for_each(|b| b.copy_from_slice(&a0));
            for inc in s.inclusions() {
                add_scalar_term(&g2, &mut blocks, &inc.increment, |n| inclusion_weight(inc, s.cell(), n));
            }
        }
        Material::Pixels(p) => {
            let values: Vec<f64> = if inverse {
                p.pixel_values().iter().map(|v| 1.0 / v).collect()
            } else {
                p.pixel_values()
            };
            let table = PixelSpectrum::new(p, &values);
            add_scalar_term(&g2, &mut blocks, &DMatrix::identity(d, d), |n| table.coeff(n));
        }
    }
    // the truncated field is real and symmetric; clean round-off
    blocks.par_chunks_mut(d * d).for_each(|b| {
        for i in 0..d {
            for j in i + 1..d {
                let m = 0.5 * (b[i * d + j] + b[j * d + i]);
                b[i * d + j] = m;
                b[j * d + i] = m;
            }
        }
    });
    let non_spd_points = blocks
        .par_chunks(d * d)
        .filter(|b| DMatrix::from_row_slice(d, d, b).cholesky().is_none())
        .count();
    Ok(DoubleGridBlocks {
        grid: g2,
        blocks,
        non_spd_points,
    })
}

/// `⟨B u, v⟩` on a grid for pointwise row-major blocks.
fn blocked_inner(blocks: &[f64], u: &TensorField, v: &TensorField) -> f64 {
    let d = u.dim();
    let n = u.grid().len();
    let (ud, vd) = (u.data(), v.data());
    let mut acc = 0.0;
    for o in 0..n {
        let b = &blocks[o * d * d..(o + 1) * d * d];
        for a in 0..d {
            let mut s = 0.0;
            for c in 0..d {
                s += b[a * d + c] * ud[c * n + o];
            }
            acc += s * vd[a * n + o];
        }
    }
    acc / n as f64
}

/// `⟨A u_N, v_N⟩` integrated exactly: both fields are interpolated to the
/// `2N-1` grid and paired with the double-grid blocks there.
pub fn exact_bilinear(blocks: &DoubleGridBlocks, u: &TensorField, v: &TensorField) -> Result<f64> {
    for f in [u, v] {
        if f.grid().doubled() != blocks.grid {
            return Err(Error::GridMismatch {
                left: blocks.grid.points().to_vec(),
                right: f.grid().doubled().points().to_vec(),
            });
        }
    }
    let u2 = interpolate_to_grid(u, &blocks.grid)?;
    let v2 = interpolate_to_grid(v, &blocks.grid)?;
    Ok(blocked_inner(&blocks.blocks, &u2, &v2))
}

/// Dense oracle `Σ_{l,k} v̂(l)* Â(l-k) û(k)` over the full index set.
pub fn full_matrix_bilinear(material: &Material, u: &TensorField, v: &TensorField) -> Result<f64> {
    full_matrix_bilinear_of(material, false, u, v)
}

/// As [`full_matrix_bilinear`], for `A⁻¹` when `inverse` is set.
pub fn full_matrix_bilinear_of(material: &Material, inverse: bool, u: &TensorField, v: &TensorField) -> Result<f64> {
    let g = u.grid();
    if g != v.grid() {
        return Err(Error::GridMismatch {
            left: g.points().to_vec(),
            right: v.grid().points().to_vec(),
        });
    }
    require_odd(g)?;
    if g.len() > FULL_MATRIX_CAP {
        return Err(Error::TooLarge(g.len()));
    }
    let g2 = g.doubled();
    let table = material.fourier_batch(&full_index_set(&g2), inverse)?;
    let (uh, vh) = (forward_dft(u), forward_dft(v));
    let (uc, vc) = (uh.coeffs(), vh.coeffs());
    let n = g.len();
    let d = g.dim();
    let idx = full_index_set(g);
    let total: Complex64 = idx
        .par_iter()
        .enumerate()
        .map(|(ol, l)| {
            let mut acc = Complex64::zero();
            for (ok, k) in idx.iter().enumerate() {
                let a = &table[g2.offset_wrapped(&l.sub(k))];
                for r in 0..d {
                    let mut s = Complex64::zero();
                    for c in 0..d {
                        s += a[(r, c)] * uc[c * n + ok];
                    }
                    acc += vc[r * n + ol].conj() * s;
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total.re)
}

/// `Ā` and `B̄` from conforming minimizers on an odd grid.
#[derive(Clone, Debug)]
pub struct UpperLower {
    pub a_upper: DMatrix<f64>,
    pub b_lower: DMatrix<f64>,
    pub b_lower_inv: DMatrix<f64>,
    /// Double-grid points with a non-SPD truncated block (A, then A⁻¹).
    pub non_spd_points: (usize, usize),
}

fn check_conforming(sols: &[AuxiliarySolution]) -> Result<()> {
    for s in sols {
        let content = nyquist_content(&forward_dft(&s.minimizer));
        let residual = subspace_residual(s.formulation.projection(), &s.minimizer)?.max(content);
        if residual > CONFORMITY_TOL {
            return Err(Error::NonConforming { residual });
        }
    }
    Ok(())
}

/// Gram matrix `M_αβ = ⟨B f_β, f_α⟩` on the double grid.
fn double_grid_gram(blocks: &DoubleGridBlocks, fields: &[TensorField]) -> Result<DMatrix<f64>> {
    let fine: Vec<TensorField> = fields
        .iter()
        .map(|f| interpolate_to_grid(f, &blocks.grid))
        .collect::<Result<_>>()?;
    let d = fields.len();
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = blocked_inner(&blocks.blocks, &fine[b], &fine[a]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// `Ā_αβ = a(ê_β + e^(β), ê_α + e^(α))` and the dual analogue with `A⁻¹`.
pub fn evaluate_bounds(
    material: &Material,
    grid: &GridSpec,
    primal: &[AuxiliarySolution],
    dual: &[AuxiliarySolution],
) -> Result<UpperLower> {
    require_odd(grid)?;
    check_conforming(primal)?;
    check_conforming(dual)?;
    let d = grid.dim();
    let ea = loaded_fields(grid, primal, Formulation::Primal, d)?;
    let ej = loaded_fields(grid, dual, Formulation::Dual, d)?;
    let ba = double_grid_blocks(material, grid, false)?;
    let a_upper = double_grid_gram(&ba, &ea)?;
    let a_warn = ba.non_spd_points;
    drop(ba);
    let bb = double_grid_blocks(material, grid, true)?;
    let b_lower = double_grid_gram(&bb, &ej)?;
    let b_lower_inv = symmetrize(&spd_inverse(&b_lower)?);
    Ok(UpperLower {
        a_upper,
        b_lower,
        b_lower_inv,
        non_spd_points: (a_warn, bb.non_spd_points),
    })
}

/// Row-major square matrix for serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub d: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for Matrix {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            d: m.nrows(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl From<&Matrix> for DMatrix<f64> {
    fn from(m: &Matrix) -> Self {
        DMatrix::from_row_slice(m.d, m.d, &m.data)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub row: usize,
    pub col: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Mean estimate with its guaranteed error and componentwise intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsSummary {
    pub mean: DMatrix<f64>,
    pub error: DMatrix<f64>,
    pub intervals: Vec<Interval>,
}

/// `mean = (Ā + B̄⁻¹)/2`, `D = (Ā - B̄⁻¹)/2`, diagonal intervals
/// `[B̄⁻¹_αα, Ā_αα]` and off-diagonal ones `mean_αβ ± (D_αα + D_ββ)`.
pub fn bounds_summary(a_upper: &DMatrix<f64>, b_lower_inv: &DMatrix<f64>) -> BoundsSummary {
    let mean = (a_upper + b_lower_inv) * 0.5;
    let error = (a_upper - b_lower_inv) * 0.5;
    let d = a_upper.nrows();
    let mut intervals = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            let (lo, hi) = if r == c {
                (b_lower_inv[(r, r)], a_upper[(r, r)])
            } else {
                let w = error[(r, r)] + error[(c, c)];
                (mean[(r, c)] - w, mean[(r, c)] + w)
            };
            intervals.push(Interval { row: r, col: c, lo, hi });
        }
    }
    BoundsSummary { mean, error, intervals }
}

/// `(⟨A⟩, ⟨A⁻¹⟩⁻¹)`.
pub fn voigt_reuss(material: &Material) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let voigt = symmetrize(&material.mean()?);
    let reuss = symmetrize(&spd_inverse(&symmetrize(&material.inverse_mean()?))?);
    Ok((voigt, reuss))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `L ⪯ M` up to `tol`: the smallest eigenvalue of `M - L` is at least `-tol`.
pub fn loewner_leq(l: &DMatrix<f64>, m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    for x in [l, m] {
        let asym = asymmetry(x);
        if asym > 1e-12 * x.amax().max(1.0) {
            return Err(Error::Asymmetric(asym));
        }
    }
    Ok(sym_eigenvalues(&(m - l))[0] >= -tol)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub primal_iterations: Vec<usize>,
    pub primal_residuals: Vec<f64>,
    pub dual_iterations: Vec<usize>,
    pub dual_residuals: Vec<f64>,
    /// "solved" or "reconstructed".
    pub dual_source: Option<String>,
    pub converged: bool,
    /// Eigenvalues of `A_H,N - B_H,N⁻¹`, ascending.
    pub gap_eigenvalues: Option<Vec<f64>>,
    pub asymmetry: f64,
    pub non_spd_double_grid_points: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Everything computed for one grid of a sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub grid: Vec<usize>,
    pub cell: Vec<f64>,
    /// Set when the run for this grid failed; the other fields may be partial.
    pub failure: Option<String>,
    pub a_gani: Option<Matrix>,
    pub b_gani_inv: Option<Matrix>,
    pub a_upper: Option<Matrix>,
    pub b_lower_inv: Option<Matrix>,
    pub mean: Option<Matrix>,
    pub error: Option<Matrix>,
    pub intervals: Option<Vec<Interval>>,
    pub voigt: Option<Matrix>,
    pub reuss: Option<Matrix>,
    pub diagnostics: Diagnostics,
}

impl BoundsReport {
    pub fn set_bounds(&mut self, a_upper: &DMatrix<f64>, b_lower_inv: &DMatrix<f64>) {
        let s = bounds_summary(a_upper, b_lower_inv);
        self.a_upper = Some(a_upper.into());
        self.b_lower_inv = Some(b_lower_inv.into());
        self.mean = Some((&s.mean).into());
        self.error = Some((&s.error).into());
        self.intervals = Some(s.intervals);
    }
}
