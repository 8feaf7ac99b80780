//! Helmholtz projections as Fourier multipliers.
//!
//! `Γ̂_U(k)` keeps the mean, `Γ̂_E(k) = ξ⊗ξ/|ξ|²` keeps curl-free zero-mean
//! fields and `Γ̂_J(k) = I - Γ̂_E(k)` divergence-free zero-mean fields. On
//! even grids the Nyquist frequencies get either the zero or the identity
//! multiplier; `{U, E_0, J_I}` and `{U, E_I, J_0}` each resolve the identity.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{GridSpec, MultiIndex, MAX_DIM};
use crate::spectral::{forward_dft, inverse_dft_from, SpectralField, TensorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subspace {
    /// Constant fields.
    U,
    /// Zero-mean curl-free fields.
    E,
    /// Zero-mean divergence-free fields.
    J,
}

/// Multiplier used at the Nyquist frequencies of even grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NyquistVariant {
    /// Nyquist content removed; the range is a conforming subspace.
    Zero,
    /// Nyquist content kept unchanged.
    Identity,
}

impl NyquistVariant {
    pub fn complement(self) -> Self {
        match self {
            Self::Zero => Self::Identity,
            Self::Identity => Self::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjectionKind {
    pub subspace: Subspace,
    pub nyquist: NyquistVariant,
}

impl ProjectionKind {
    pub const fn new(subspace: Subspace, nyquist: NyquistVariant) -> Self {
        Self { subspace, nyquist }
    }

    /// The conforming projection (zero Nyquist multiplier).
    pub const fn conforming(subspace: Subspace) -> Self {
        Self::new(subspace, NyquistVariant::Zero)
    }
}

/// Continuous multiplier `Γ̂(k)` of the projection onto `subspace`.
pub fn gamma_hat(subspace: Subspace, k: &MultiIndex, cell: &[f64]) -> DMatrix<f64> {
    let d = k.dim();
    if k.is_zero() {
        return match subspace {
            Subspace::U => DMatrix::identity(d, d),
            Subspace::E | Subspace::J => DMatrix::zeros(d, d),
        };
    }
    let xi: Vec<f64> = k
        .as_slice()
        .iter()
        .zip(cell)
        .map(|(&c, &y)| c as f64 / y)
        .collect();
    let norm2: f64 = xi.iter().map(|v| v * v).sum();
    let e = DMatrix::from_fn(d, d, |a, b| xi[a] * xi[b] / norm2);
    match subspace {
        Subspace::U => DMatrix::zeros(d, d),
        Subspace::E => e,
        Subspace::J => DMatrix::identity(d, d) - e,
    }
}

/// Fully discrete multiplier at `k`; Nyquist indices get `0` or `I` according to the variant.
pub fn discrete_multiplier(pk: ProjectionKind, g: &GridSpec, k: &MultiIndex) -> Result<DMatrix<f64>> {
    g.offset(k)?;
    let d = g.dim();
    if pk.subspace != Subspace::U && g.is_nyquist(k) {
        return Ok(match pk.nyquist {
            NyquistVariant::Zero => DMatrix::zeros(d, d),
            NyquistVariant::Identity => DMatrix::identity(d, d),
        });
    }
    Ok(gamma_hat(pk.subspace, k, g.cell()))
}

/// Applies the multiplier of `pk` in place to a full spectrum laid out like [`SpectralField`].
pub(crate) fn apply_multiplier(pk: ProjectionKind, g: &GridSpec, coeffs: &mut [Complex64]) {
    let n = g.len();
    let d = g.dim();
    debug_assert_eq!(coeffs.len(), d * n);
    let points = g.points();
    let strides = g.strides();
    // per-axis frequency values and Nyquist flags, indexed by storage position
    let axes: Vec<Vec<(f64, bool)>> = (0..d)
        .map(|a| {
            (0..points[a])
                .map(|j| {
                    let c = crate::grid::axis_frequency(j, points[a]);
                    let nyq = points[a].is_multiple_of(2) && 2 * c == -(points[a] as i64);
                    (c as f64 / g.cell()[a], nyq)
                })
                .collect()
        })
        .collect();

    let kernel = |o: usize, v: &mut [Complex64; MAX_DIM]| {
        let mut xi = [0.0; MAX_DIM];
        let mut nyq = false;
        let mut norm2 = 0.0;
        for a in 0..d {
            let (f, q) = axes[a][(o / strides[a]) % points[a]];
            xi[a] = f;
            nyq |= q;
            norm2 += f * f;
        }
        let zero = norm2 == 0.0;
        match pk.subspace {
            Subspace::U => {
                if !zero {
                    v[..d].fill(Complex64::zero());
                }
            }
            Subspace::E | Subspace::J if zero => v[..d].fill(Complex64::zero()),
            _ if nyq => {
                if pk.nyquist == NyquistVariant::Zero {
                    v[..d].fill(Complex64::zero());
                }
            }
            Subspace::E | Subspace::J => {
                let mut proj = Complex64::zero();
                for a in 0..d {
                    proj += v[a] * xi[a];
                }
                proj /= norm2;
                for a in 0..d {
                    let e = proj * xi[a];
                    v[a] = if pk.subspace == Subspace::E { e } else { v[a] - e };
                }
            }
        }
    };

    match d {
        1 => coeffs.par_iter_mut().enumerate().for_each(|(o, c0)| {
            let mut v = [*c0, Complex64::zero(), Complex64::zero()];
            kernel(o, &mut v);
            *c0 = v[0];
        }),
        2 => {
            let (c0, c1) = coeffs.split_at_mut(n);
            c0.par_iter_mut()
                .zip(c1.par_iter_mut())
                .enumerate()
                .for_each(|(o, (a0, a1))| {
                    let mut v = [*a0, *a1, Complex64::zero()];
                    kernel(o, &mut v);
                    *a0 = v[0];
                    *a1 = v[1];
                })
        }
        _ => {
            let (c0, rest) = coeffs.split_at_mut(n);
            let (c1, c2) = rest.split_at_mut(n);
            c0.par_iter_mut()
                .zip(c1.par_iter_mut())
                .zip(c2.par_iter_mut())
                .enumerate()
                .for_each(|(o, ((a0, a1), a2))| {
                    let mut v = [*a0, *a1, *a2];
                    kernel(o, &mut v);
                    *a0 = v[0];
                    *a1 = v[1];
                    *a2 = v[2];
                })
        }
    }
}

/// Projects a spectrum without leaving the Fourier domain.
pub fn project_spectrum(pk: ProjectionKind, s: &SpectralField) -> SpectralField {
    let mut out = s.clone();
    apply_multiplier(pk, s.grid(), out.coeffs_mut());
    out
}

/// `F⁻¹ Ĝ F f`; fails if the result is not real to round-off.
pub fn apply_projection(pk: ProjectionKind, f: &TensorField) -> Result<TensorField> {
    let mut s = forward_dft(f);
    apply_multiplier(pk, f.grid(), s.coeffs_mut());
    inverse_dft_from(&s, f)
}

/// Splits `f` into constant, curl-free and divergence-free parts.
///
/// `e_variant` selects the Nyquist multiplier of the curl-free projection;
/// the divergence-free part uses the complementary one so the three parts
/// always sum to `f`. With [`NyquistVariant::Zero`] the Nyquist content
/// ends up in the divergence-free part.
pub fn helmholtz_split(
    f: &TensorField,
    e_variant: NyquistVariant,
) -> Result<(TensorField, TensorField, TensorField)> {
    let s = forward_dft(f);
    let part = |pk: ProjectionKind| inverse_dft_from(&project_spectrum(pk, &s), f);
    Ok((
        part(ProjectionKind::conforming(Subspace::U))?,
        part(ProjectionKind::new(Subspace::E, e_variant))?,
        part(ProjectionKind::new(Subspace::J, e_variant.complement()))?,
    ))
}

/// `‖f - G f‖ / ‖f‖` for the projection `pk` (zero for the zero field).
pub fn subspace_residual(pk: ProjectionKind, f: &TensorField) -> Result<f64> {
    let nrm = f.norm();
    if nrm == 0.0 {
        return Ok(0.0);
    }
    let p = apply_projection(pk, f)?;
    Ok(f.sub(&p).norm() / nrm)
}
