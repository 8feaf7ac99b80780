//! Matrix-free GaNi: projected conjugate gradients for the primal and dual
//! auxiliary problems and the resulting homogenized matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{asymmetry, spd_inverse, symmetrize, MaterialGrid};
use crate::projections::{apply_multiplier, ProjectionKind, Subspace};
use crate::spectral::{forward_dft, inner_product, inverse_dft_from, TensorField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    /// Stop once `‖r‖ ≤ tol·‖E‖` with `‖E‖ = 1`.
    pub tol: f64,
    pub max_iter: usize,
    pub record_history: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            record_history: false,
        }
    }
}

impl SolveSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Solver(format!(
                "need tol > 0 and max_iter >= 1, got tol = {} and max_iter = {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Curl-free correctors, coefficients `A`.
    Primal,
    /// Divergence-free correctors, coefficients `A⁻¹`.
    Dual,
}

impl Formulation {
    /// The conforming projection onto the corrector space.
    pub fn projection(self) -> ProjectionKind {
        match self {
            Formulation::Primal => ProjectionKind::conforming(Subspace::E),
            Formulation::Dual => ProjectionKind::conforming(Subspace::J),
        }
    }

    fn blocks(self, m: &MaterialGrid) -> &[f64] {
        match self {
            Formulation::Primal => m.blocks(),
            Formulation::Dual => m.inverse_blocks(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AuxiliarySolution {
    pub axis: usize,
    pub formulation: Formulation,
    /// `e_N^(α)` or `j_N^(α)`.
    pub minimizer: TensorField,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// Pointwise `y(x_k) = B(x_k) x(x_k)` with row-major `d×d` blocks.
pub(crate) fn apply_blocks(blocks: &[f64], x: &TensorField) -> TensorField {
    let d = x.dim();
    let n = x.grid().len();
    let mut y = TensorField::zeros(x.grid());
    let src = x.data();
    y.data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(a, ya)| {
            for (o, v) in ya.iter_mut().enumerate() {
                let b = &blocks[o * d * d + a * d..o * d * d + (a + 1) * d];
                *v = (0..d).map(|c| b[c] * src[c * n + o]).sum();
            }
        });
    y
}

fn check_grid(m: &MaterialGrid, x: &TensorField) -> Result<()> {
    if m.grid() != x.grid() {
        return Err(Error::GridMismatch {
            left: m.grid().points().to_vec(),
            right: x.grid().points().to_vec(),
        });
    }
    Ok(())
}

/// `y = G[A_N x]`. The divergence-free projection pairs with the inverse
/// blocks `A_N⁻¹`; the other projections use `A_N`.
pub fn gani_matvec(m: &MaterialGrid, pk: ProjectionKind, x: &TensorField) -> Result<TensorField> {
    check_grid(m, x)?;
    let blocks = match pk.subspace {
        Subspace::J => m.inverse_blocks(),
        _ => m.blocks(),
    };
    project(pk, &apply_blocks(blocks, x))
}

fn project(pk: ProjectionKind, f: &TensorField) -> Result<TensorField> {
    let mut s = forward_dft(f);
    apply_multiplier(pk, f.grid(), s.coeffs_mut());
    inverse_dft_from(&s, f)
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: TensorField,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for a self-adjoint positive operator on a subspace.
pub fn conjugate_gradients(
    matvec: impl Fn(&TensorField) -> Result<TensorField>,
    b: &TensorField,
    x0: &TensorField,
    s: &SolveSettings,
) -> Result<CgOutcome> {
    conjugate_gradients_observed(matvec, b, x0, s, |_| {})
}

/// As [`conjugate_gradients`], calling `observe` on every iterate including `x0`.
pub fn conjugate_gradients_observed(
    matvec: impl Fn(&TensorField) -> Result<TensorField>,
    b: &TensorField,
    x0: &TensorField,
    s: &SolveSettings,
    mut observe: impl FnMut(&TensorField),
) -> Result<CgOutcome> {
    s.validate()?;
    let mut x = x0.clone();
    observe(&x);
    let mut r = b.clone();
    if x0.norm() > 0.0 {
        r.axpy(-1.0, &matvec(x0)?);
    }
    let mut rr = inner_product(&r, &r)?;
    let mut history = Vec::new();
    if s.record_history {
        history.push(rr.sqrt());
    }
    let mut p = r.clone();
    let mut it = 0;
    while rr.sqrt() > s.tol && it < s.max_iter {
        let q = matvec(&p)?;
        let pq = inner_product(&p, &q)?;
        if !(pq > 0.0) {
            return Err(Error::Solver(format!(
                "operator is not positive on the search direction (pᵀCp = {pq:e})"
            )));
        }
        let alpha = rr / pq;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &q);
        let rr_new = inner_product(&r, &r)?;
        p.scale(rr_new / rr);
        p.axpy(1.0, &r);
        rr = rr_new;
        it += 1;
        observe(&x);
        if s.record_history {
            history.push(rr.sqrt());
        }
    }
    Ok(CgOutcome {
        x,
        history,
        iterations: it,
        residual: rr.sqrt(),
        converged: rr.sqrt() <= s.tol,
    })
}

/// Corrector for the unit loading `ê_α`: solves `G A (ê_α + x) = 0` for
/// `x` in the range of the conforming projection, starting from zero.
pub fn solve_auxiliary(
    m: &MaterialGrid,
    axis: usize,
    formulation: Formulation,
    s: &SolveSettings,
) -> Result<AuxiliarySolution> {
    let g = m.grid();
    if axis >= g.dim() {
        return Err(Error::Solver(format!("axis {axis} out of range for d = {}", g.dim())));
    }
    let pk = formulation.projection();
    let blocks = formulation.blocks(m);
    let mut b = project(pk, &apply_blocks(blocks, &TensorField::unit(g, axis)))?;
    b.scale(-1.0);
    let out = conjugate_gradients(
        |x| project(pk, &apply_blocks(blocks, x)),
        &b,
        &TensorField::zeros(g),
        s,
    )?;
    Ok(AuxiliarySolution {
        axis,
        formulation,
        minimizer: out.x,
        residual_history: out.history,
        iterations: out.iterations,
        final_residual: out.residual,
        converged: out.converged,
    })
}

/// All `d` correctors of one formulation, solved concurrently.
pub fn solve_all(m: &MaterialGrid, formulation: Formulation, s: &SolveSettings) -> Result<Vec<AuxiliarySolution>> {
    (0..m.grid().dim())
        .into_par_iter()
        .map(|a| solve_auxiliary(m, a, formulation, s))
        .collect()
}

#[derive(Clone, Debug)]
pub struct Homogenized {
    pub matrix: DMatrix<f64>,
    /// Largest entry of `|M - Mᵀ|` before symmetrization.
    pub asymmetry: f64,
}

/// `M_αβ = ⟨A_N(ê_β + x^(β)), ê_α + x^(α)⟩` with `A_N⁻¹` for the dual formulation.
pub fn gani_homogenized(m: &MaterialGrid, sols: &[AuxiliarySolution], formulation: Formulation) -> Result<Homogenized> {
    let d = m.grid().dim();
    let loaded = loaded_fields(m.grid(), sols, formulation, d)?;
    for f in &loaded {
        check_grid(m, f)?;
    }
    let blocks = formulation.blocks(m);
    let fluxes: Vec<TensorField> = loaded.iter().map(|f| apply_blocks(blocks, f)).collect();
    let mut mat = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            mat[(a, b)] = inner_product(&fluxes[b], &loaded[a])?;
        }
    }
    Ok(Homogenized {
        asymmetry: asymmetry(&mat),
        matrix: symmetrize(&mat),
    })
}

/// `ê_α + x^(α)` ordered by axis.
pub(crate) fn loaded_fields(
    g: &crate::grid::GridSpec,
    sols: &[AuxiliarySolution],
    formulation: Formulation,
    d: usize,
) -> Result<Vec<TensorField>> {
    (0..d)
        .map(|a| {
            let s = sols
                .iter()
                .find(|s| s.axis == a && s.formulation == formulation)
                .ok_or_else(|| Error::Solver(format!("missing {formulation:?} solution for axis {a}")))?;
            let mut f = s.minimizer.clone();
            if f.grid() != g {
                return Err(Error::GridMismatch {
                    left: g.points().to_vec(),
                    right: f.grid().points().to_vec(),
                });
            }
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            f.add_constant(&e);
            Ok(f)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ReconstructedDual {
    pub axis: usize,
    /// `j_N^(β)` after projection onto the divergence-free subspace.
    pub minimizer: TensorField,
    /// `‖(I - G^J) j‖ / ‖j‖` of the candidate before projection.
    pub projection_defect: f64,
    /// `‖G^J A_N⁻¹(ê_β + j)‖` of the projected field.
    pub optimality_residual: f64,
}

/// Dual correctors from primal ones on odd grids:
/// `ê_β + j^(β) = A_N Σ_α E_α (ê_α + e^(α))` with `E = A_H,N⁻¹ ê_β`.
pub fn reconstruct_dual(
    primal: &[AuxiliarySolution],
    m: &MaterialGrid,
    a_h: &DMatrix<f64>,
) -> Result<Vec<ReconstructedDual>> {
    let g = m.grid();
    if !g.is_odd() {
        return Err(Error::EvenGrid(g.points().to_vec()));
    }
    let d = g.dim();
    let a_inv = spd_inverse(a_h)?;
    let fluxes: Vec<TensorField> = loaded_fields(g, primal, Formulation::Primal, d)?
        .iter()
        .map(|f| apply_blocks(m.blocks(), f))
        .collect();
    let pj = Formulation::Dual.projection();
    (0..d)
        .map(|b| {
            let mut cand = TensorField::zeros(g);
            for (a, flux) in fluxes.iter().enumerate() {
                cand.axpy(a_inv[(a, b)], flux);
            }
            let mut e = vec![0.0; d];
            e[b] = -1.0;
            cand.add_constant(&e);
            let j = project(pj, &cand)?;
            let nrm = cand.norm();
            let projection_defect = if nrm == 0.0 { 0.0 } else { cand.sub(&j).norm() / nrm };
            e[b] = 1.0;
            let mut loaded = j.clone();
            loaded.add_constant(&e);
            let optimality_residual = gani_matvec(m, pj, &loaded)?.norm();
            Ok(ReconstructedDual {
                axis: b,
                minimizer: j,
                projection_defect,
                optimality_residual,
            })
        })
        .collect()
}

/// Wraps reconstructed duals as auxiliary solutions for downstream use.
pub fn reconstructed_as_solutions(duals: Vec<ReconstructedDual>) -> Vec<AuxiliarySolution> {
    duals
        .into_iter()
        .map(|r| AuxiliarySolution {
            axis: r.axis,
            formulation: Formulation::Dual,
            minimizer: r.minimizer,
            residual_history: Vec::new(),
            iterations: 0,
            final_residual: r.optimality_residual,
            converged: true,
        })
        .collect()
}
