//! Coefficient fields: matrix-inclusion composites with exact Fourier
//! coefficients, pixel bitmaps, and point sampling on GaNi grids.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::grid::{grid_point, GridSpec, MultiIndex};
use crate::spectral::fft_nd;

/// Symmetry tolerance for sampled blocks.
const SYM_TOL: f64 = 1e-14;

/// Shape of a single inclusion, centered at the origin.
#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    /// Rectangle/cuboid with side lengths `h`. `closed` decides whether
    /// points on the boundary count as inside when sampling.
    Rect { h: Vec<f64>, closed: bool },
}

impl Topology {
    pub fn rect(h: &[f64]) -> Self {
        Topology::Rect {
            h: h.to_vec(),
            closed: false,
        }
    }

    pub fn closed_rect(h: &[f64]) -> Self {
        Topology::Rect {
            h: h.to_vec(),
            closed: true,
        }
    }

    /// Characteristic function at the periodic offset `dx` from the center.
    fn contains(&self, dx: &[f64], cell: &[f64]) -> bool {
        match self {
            Topology::Rect { h, closed } => dx.iter().zip(h).zip(cell).all(|((&d, &h), &y)| {
                if h >= y {
                    return true;
                }
                let d = wrap(d, y).abs();
                if *closed {
                    d <= h / 2.0
                } else {
                    d < h / 2.0
                }
            }),
        }
    }
}

/// Periodic representative of `d` in `[-y/2, y/2)`.
fn wrap(d: f64, y: f64) -> f64 {
    d - y * (d / y + 0.5).floor()
}

/// One phase `A(j)·f(j)(x - x(j))` of a matrix-inclusion composite.
#[derive(Clone, Debug, PartialEq)]
pub struct Inclusion {
    pub increment: DMatrix<f64>,
    pub topology: Topology,
    pub center: Vec<f64>,
}

/// `A(x) = A(0) + Σ_j A(j) f(j)(x - x(j))`.
#[derive(Clone, Debug, PartialEq)]
pub struct InclusionSpec {
    cell: Vec<f64>,
    a0: DMatrix<f64>,
    inclusions: Vec<Inclusion>,
}

impl InclusionSpec {
    /// Validates shapes, symmetry, `A(0)` positivity and `0 < h ≤ Y`.
    ///
    /// Positivity where inclusions overlap is only checked on sampling.
    pub fn new(cell: &[f64], a0: DMatrix<f64>, inclusions: Vec<Inclusion>) -> Result<Self> {
        let problems = Self::problems(cell, &a0, &inclusions);
        if !problems.is_empty() {
            return Err(Error::Material(problems.join("; ")));
        }
        Ok(Self {
            cell: cell.to_vec(),
            a0,
            inclusions,
        })
    }

    /// Every violated precondition, for batch reporting.
    pub fn problems(cell: &[f64], a0: &DMatrix<f64>, inclusions: &[Inclusion]) -> Vec<String> {
        let d = cell.len();
        let mut out = Vec::new();
        if !(2..=3).contains(&d) {
            out.push(format!("dimension must be 2 or 3, got {d}"));
        }
        if cell.iter().any(|y| !(*y > 0.0) || !y.is_finite()) {
            out.push(format!("cell sides must be positive, got {cell:?}"));
        }
        if a0.shape() != (d, d) {
            out.push(format!("A0 must be {d}x{d}"));
        } else if !is_spd(a0) {
            out.push("A0 is not symmetric positive definite".into());
        }
        for (j, inc) in inclusions.iter().enumerate() {
            if inc.increment.shape() != (d, d) {
                out.push(format!("inclusion {j}: increment must be {d}x{d}"));
            } else if asymmetry(&inc.increment) > SYM_TOL * inc.increment.amax().max(1.0) {
                out.push(format!("inclusion {j}: increment is not symmetric"));
            } else if a0.shape() == (d, d) && !is_spd(&(a0 + &inc.increment)) {
                out.push(format!("inclusion {j}: A0 + A{j} is not positive definite"));
            }
            if inc.center.len() != d {
                out.push(format!("inclusion {j}: center must have {d} coordinates"));
            }
            match &inc.topology {
                Topology::Rect { h, .. } => {
                    if h.len() != d {
                        out.push(format!("inclusion {j}: rect needs {d} side lengths"));
                    } else if h.iter().zip(cell).any(|(h, y)| !(*h > 0.0) || h > y) {
                        out.push(format!(
                            "inclusion {j}: rect sides {h:?} must satisfy 0 < h <= Y = {cell:?}"
                        ));
                    }
                }
            }
        }
        out
    }

    /// Homogeneous material `A(x) = A0`.
    pub fn homogeneous(cell: &[f64], a0: DMatrix<f64>) -> Result<Self> {
        Self::new(cell, a0, Vec::new())
    }

    pub fn cell(&self) -> &[f64] {
        &self.cell
    }

    pub fn dim(&self) -> usize {
        self.cell.len()
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn inclusions(&self) -> &[Inclusion] {
        &self.inclusions
    }

    fn value_at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut a = self.a0.clone();
        let mut dx = vec![0.0; x.len()];
        for inc in &self.inclusions {
            for ((d, x), c) in dx.iter_mut().zip(x).zip(&inc.center) {
                *d = x - c;
            }
            if inc.topology.contains(&dx, &self.cell) {
                a += &inc.increment;
            }
        }
        a
    }

    /// True if two inclusions share a set of positive measure.
    pub fn has_overlap(&self) -> bool {
        for (i, a) in self.inclusions.iter().enumerate() {
            for b in &self.inclusions[i + 1..] {
                let (Topology::Rect { h: ha, .. }, Topology::Rect { h: hb, .. }) =
                    (&a.topology, &b.topology);
                let overlap = (0..self.dim()).all(|k| {
                    let dist = wrap(a.center[k] - b.center[k], self.cell[k]).abs();
                    dist < (ha[k] + hb[k]) / 2.0
                });
                if overlap {
                    return true;
                }
            }
        }
        false
    }

    /// The inverse field, itself a matrix-inclusion composite with phases
    /// `A0⁻¹` and `(A0 + Aj)⁻¹ - A0⁻¹`. Needs disjoint inclusions.
    pub fn inverse_field(&self) -> Result<Self> {
        if self.has_overlap() {
            return Err(Error::Material(
                "inverse coefficients need non-overlapping inclusions".into(),
            ));
        }
        let a0_inv = spd_inverse(&self.a0)?;
        let inclusions = self
            .inclusions
            .iter()
            .map(|inc| {
                Ok(Inclusion {
                    increment: symmetrize(&(spd_inverse(&(&self.a0 + &inc.increment))? - &a0_inv)),
                    topology: inc.topology.clone(),
                    center: inc.center.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cell: self.cell.clone(),
            a0: a0_inv,
            inclusions,
        })
    }
}

/// Scalar two-phase bitmap `A(x) = [a_m + (a_i - a_m) f(x)]·I`.
///
/// Pixel `p` covers `Π [-Y/2 + p Y/M, -Y/2 + (p+1) Y/M)`; values are stored
/// row-major with the last axis fastest (a 2D bitmap's rows run along axis 0).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelGridMaterial {
    cell: Vec<f64>,
    shape: Vec<usize>,
    indicator: Vec<f64>,
    a_matrix: f64,
    a_inclusion: f64,
}

impl PixelGridMaterial {
    pub fn new(
        cell: &[f64],
        shape: &[usize],
        indicator: Vec<f64>,
        a_matrix: f64,
        a_inclusion: f64,
    ) -> Result<Self> {
        if cell.len() != shape.len() || !(2..=3).contains(&cell.len()) {
            return Err(Error::Material(format!(
                "cell {cell:?} and bitmap shape {shape:?} must share dimension 2 or 3"
            )));
        }
        if shape.contains(&0) || indicator.len() != shape.iter().product::<usize>() {
            return Err(Error::Material(format!(
                "bitmap of shape {shape:?} cannot hold {} values",
                indicator.len()
            )));
        }
        if indicator.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Material("indicator values must lie in [0, 1]".into()));
        }
        if !(a_matrix > 0.0 && a_inclusion > 0.0) {
            return Err(Error::Material("phase coefficients must be positive".into()));
        }
        Ok(Self {
            cell: cell.to_vec(),
            shape: shape.to_vec(),
            indicator,
            a_matrix,
            a_inclusion,
        })
    }

    pub fn cell(&self) -> &[f64] {
        &self.cell
    }

    pub fn dim(&self) -> usize {
        self.cell.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn indicator(&self) -> &[f64] {
        &self.indicator
    }

    pub fn phases(&self) -> (f64, f64) {
        (self.a_matrix, self.a_inclusion)
    }

    /// Scalar conductivity of every pixel.
    pub fn pixel_values(&self) -> Vec<f64> {
        self.indicator
            .iter()
            .map(|f| self.a_matrix + (self.a_inclusion - self.a_matrix) * f)
            .collect()
    }

    /// Linear pixel index containing the grid point `k` of `g`.
    ///
    /// The grid point sits at `(2k + N) M / (2N)` pixel widths from the
    /// lower cell corner; on a pixel boundary the lower pixel wins.
    fn pixel_of(&self, g: &GridSpec, k: &MultiIndex) -> usize {
        let mut idx = 0;
        for (a, &m) in self.shape.iter().enumerate() {
            let n = g.points()[a] as i128;
            let num = (2 * k[a] as i128 + n) * m as i128;
            let den = 2 * n;
            let p = if num % den == 0 { num / den - 1 } else { num.div_euclid(den) };
            idx = idx * m + p.rem_euclid(m as i128) as usize;
        }
        idx
    }
}

/// Periodic 3×3 average with weights 4/16 (center), 2/16 (edges), 1/16 (corners).
pub fn smooth_pixels(p: &PixelGridMaterial) -> Result<PixelGridMaterial> {
    if p.dim() != 2 {
        return Err(Error::Material("smoothing is defined for 2D bitmaps only".into()));
    }
    let (rows, cols) = (p.shape[0], p.shape[1]);
    let w = [1.0, 2.0, 1.0];
    let mut out = vec![0.0; rows * cols];
    out.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (di, wi) in w.iter().enumerate() {
                let ii = (i + rows + di - 1) % rows;
                for (dj, wj) in w.iter().enumerate() {
                    let jj = (j + cols + dj - 1) % cols;
                    acc += wi * wj * p.indicator[ii * cols + jj];
                }
            }
            *v = (acc / 16.0).clamp(0.0, 1.0);
        }
    });
    Ok(PixelGridMaterial {
        indicator: out,
        ..p.clone()
    })
}

/// Either supported coefficient model.
#[derive(Clone, Debug, PartialEq)]
pub enum Material {
    Inclusions(InclusionSpec),
    Pixels(PixelGridMaterial),
}

impl Material {
    pub fn cell(&self) -> &[f64] {
        match self {
            Material::Inclusions(s) => s.cell(),
            Material::Pixels(p) => p.cell(),
        }
    }

    pub fn dim(&self) -> usize {
        self.cell().len()
    }

    /// Fourier coefficients `Â(m)` for a batch of indices.
    ///
    /// With `inverse` the coefficients of `A⁻¹` are returned instead.
    pub fn fourier_batch(&self, ms: &[MultiIndex], inverse: bool) -> Result<Vec<DMatrix<Complex64>>> {
        match self {
            Material::Inclusions(s) => {
                let s = if inverse { s.inverse_field()? } else { s.clone() };
                Ok(ms.par_iter().map(|m| inclusion_fourier(&s, m)).collect())
            }
            Material::Pixels(p) => {
                let values = if inverse {
                    p.pixel_values().iter().map(|v| 1.0 / v).collect()
                } else {
                    p.pixel_values()
                };
                let table = PixelSpectrum::new(p, &values);
                let d = p.dim();
                Ok(ms
                    .par_iter()
                    .map(|m| DMatrix::from_diagonal_element(d, d, table.coeff(m)))
                    .collect())
            }
        }
    }

    /// Arithmetic mean `⟨A⟩`.
    pub fn mean(&self) -> Result<DMatrix<f64>> {
        let m0 = MultiIndex::zero(self.dim());
        Ok(self.fourier_batch(&[m0], false)?[0].map(|c| c.re))
    }

    /// Arithmetic mean `⟨A⁻¹⟩`.
    pub fn inverse_mean(&self) -> Result<DMatrix<f64>> {
        let m0 = MultiIndex::zero(self.dim());
        Ok(self.fourier_batch(&[m0], true)?[0].map(|c| c.re))
    }
}

/// `(1/|Y|) Π_α h_α sinc(h_α m_α / Y_α)` with `sinc(t) = sin(πt)/(πt)`.
pub fn rect_topology_fourier(h: &[f64], cell: &[f64], m: &MultiIndex) -> f64 {
    let vol: f64 = cell.iter().product();
    h.iter()
        .zip(cell)
        .zip(m.as_slice())
        .map(|((&h, &y), &k)| h * sinc(h * k as f64 / y))
        .product::<f64>()
        / vol
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// `φ_{-m}(x) = exp(-2πi ξ(m)·x)`.
fn shift_factor(m: &MultiIndex, x: &[f64], cell: &[f64]) -> Complex64 {
    let phase: f64 = m
        .as_slice()
        .iter()
        .zip(x)
        .zip(cell)
        .map(|((&k, &x), &y)| k as f64 * x / y)
        .sum();
    Complex64::from_polar(1.0, -2.0 * PI * phase)
}

fn topology_fourier(t: &Topology, cell: &[f64], m: &MultiIndex) -> f64 {
    match t {
        Topology::Rect { h, .. } => rect_topology_fourier(h, cell, m),
    }
}

/// `Â(m) = A(0) δ_{0m} + Σ_j A(j) f̂(j)(m) φ_{-m}(x(j))`.
pub fn inclusion_fourier(spec: &InclusionSpec, m: &MultiIndex) -> DMatrix<Complex64> {
    let mut out = if m.is_zero() {
        spec.a0.map(|v| Complex64::new(v, 0.0))
    } else {
        DMatrix::zeros(spec.dim(), spec.dim())
    };
    for inc in &spec.inclusions {
        let w = inclusion_weight(inc, &spec.cell, m);
        out += inc.increment.map(|v| w * v);
    }
    out
}

/// `f̂(j)(m) φ_{-m}(x(j))`, the scalar weight of one inclusion's increment.
pub fn inclusion_weight(inc: &Inclusion, cell: &[f64], m: &MultiIndex) -> Complex64 {
    topology_fourier(&inc.topology, cell, m) * shift_factor(m, &inc.center, cell)
}

/// Fourier coefficients `Â(m)` of any material.
pub fn material_fourier(material: &Material, m: &MultiIndex) -> Result<DMatrix<Complex64>> {
    Ok(material.fourier_batch(std::slice::from_ref(m), false)?.remove(0))
}

/// Pixel DFT together with the per-mode rectangle factor, for bitmap
/// coefficients `Σ_p v_p χ_p`.
pub(crate) struct PixelSpectrum {
    cell: Vec<f64>,
    shape: Vec<usize>,
    dft: Vec<Complex64>,
}

impl PixelSpectrum {
    pub(crate) fn new(p: &PixelGridMaterial, values: &[f64]) -> Self {
        let mut dft: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&p.shape, &mut dft, FftDirection::Forward);
        Self {
            cell: p.cell.clone(),
            shape: p.shape.clone(),
            dft,
        }
    }

    /// `f̂(m) = ŝ(m) · exp(-2πi Σ m_α(-1/2 + 1/(2M_α))) · DFT[v](m mod M)`,
    /// where `ŝ` is the coefficient of one pixel centered at the origin.
    pub(crate) fn coeff(&self, m: &MultiIndex) -> Complex64 {
        let h: Vec<f64> = self.cell.iter().zip(&self.shape).map(|(y, &n)| y / n as f64).collect();
        let mut phase = 0.0;
        let mut o = 0;
        for (a, &n) in self.shape.iter().enumerate() {
            let k = m[a];
            phase += k as f64 * (-0.5 + 0.5 / n as f64);
            o = o * n + k.rem_euclid(n as i64) as usize;
        }
        let rect = rect_topology_fourier(&h, &self.cell, m);
        self.dft[o] * Complex64::from_polar(rect, -2.0 * PI * phase)
    }
}

/// Point samples `A(x_k)` and `A(x_k)⁻¹` on a GaNi grid, `d×d` blocks row-major.
#[derive(Clone, Debug)]
pub struct MaterialGrid {
    grid: GridSpec,
    blocks: Vec<f64>,
    inverse_blocks: Vec<f64>,
}

impl MaterialGrid {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn inverse_blocks(&self) -> &[f64] {
        &self.inverse_blocks
    }

    pub fn block(&self, o: usize) -> DMatrix<f64> {
        let d = self.grid.dim();
        DMatrix::from_row_slice(d, d, &self.blocks[o * d * d..(o + 1) * d * d])
    }

    pub fn inverse_block(&self, o: usize) -> DMatrix<f64> {
        let d = self.grid.dim();
        DMatrix::from_row_slice(d, d, &self.inverse_blocks[o * d * d..(o + 1) * d * d])
    }

    /// Builds the grid directly from per-point blocks (row-major `d×d` each).
    pub fn from_blocks(grid: &GridSpec, blocks: Vec<f64>) -> Result<Self> {
        let d = grid.dim();
        if blocks.len() != grid.len() * d * d {
            return Err(Error::Material(format!(
                "expected {} block entries, got {}",
                grid.len() * d * d,
                blocks.len()
            )));
        }
        let inverse_blocks = blocks
            .par_chunks(d * d)
            .enumerate()
            .map(|(o, b)| {
                let a = DMatrix::from_row_slice(d, d, b);
                let not_spd = || Error::NotSpd {
                    point: grid_point(grid, &grid.index_at(o)).unwrap_or_default(),
                };
                if asymmetry(&a) > SYM_TOL * a.amax().max(1.0) {
                    return Err(not_spd());
                }
                let inv = spd_inverse(&a).map_err(|_| not_spd())?;
                Ok(symmetrize(&inv).transpose().as_slice().to_vec())
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        Ok(Self {
            grid: grid.clone(),
            blocks,
            inverse_blocks,
        })
    }
}

/// Samples `A` at the grid points of `g`.
pub fn sample_material(material: &Material, g: &GridSpec) -> Result<MaterialGrid> {
    if material.cell() != g.cell() {
        return Err(Error::Material(format!(
            "material cell {:?} differs from grid cell {:?}",
            material.cell(),
            g.cell()
        )));
    }
    let d = g.dim();
    let blocks: Vec<f64> = match material {
        Material::Inclusions(s) => (0..g.len())
            .into_par_iter()
            .flat_map_iter(|o| {
                let x = grid_point(g, &g.index_at(o)).expect("storage index");
                let a = s.value_at(&x);
                a.transpose().as_slice().to_vec()
            })
            .collect(),
        Material::Pixels(p) => {
            let values = p.pixel_values();
            (0..g.len())
                .into_par_iter()
                .flat_map_iter(|o| {
                    let c = values[p.pixel_of(g, &g.index_at(o))];
                    DMatrix::from_diagonal_element(d, d, c).as_slice().to_vec()
                })
                .collect()
        }
    };
    MaterialGrid::from_blocks(g, blocks)
}

pub(crate) fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub(crate) fn is_spd(a: &DMatrix<f64>) -> bool {
    a.is_square() && asymmetry(a) <= SYM_TOL * a.amax().max(1.0) && a.clone().cholesky().is_some()
}

pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Singular)
}

/// Reads an ASCII PGM (P2) bitmap; indicator = value / maxval.
pub fn load_pgm(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    parse_pgm(&std::fs::read_to_string(path)?)
}

pub fn parse_pgm(text: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Bitmap("expected ASCII PGM magic 'P2'".into()));
    }
    let mut header = [0usize; 3];
    for h in header.iter_mut() {
        *h = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Bitmap("truncated PGM header".into()))?;
    }
    let [cols, rows, maxval] = header;
    if cols == 0 || rows == 0 || maxval == 0 {
        return Err(Error::Bitmap("PGM dimensions and maxval must be positive".into()));
    }
    let values = tokens
        .map(|t| {
            t.parse::<usize>()
                .ok()
                .filter(|v| *v <= maxval)
                .map(|v| v as f64 / maxval as f64)
                .ok_or_else(|| Error::Bitmap(format!("bad PGM sample '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != rows * cols {
        return Err(Error::Bitmap(format!(
            "PGM declares {rows}x{cols} but holds {} samples",
            values.len()
        )));
    }
    Ok((vec![rows, cols], values))
}

/// Reads a CSV of 0/1 values, one bitmap row per line.
pub fn load_csv_bitmap(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    parse_csv_bitmap(&std::fs::read_to_string(path)?)
}

pub fn parse_csv_bitmap(text: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| match t.trim() {
                "0" => Ok(0.0),
                "1" => Ok(1.0),
                other => Err(Error::Bitmap(format!("line {}: expected 0 or 1, got '{other}'", i + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Bitmap(format!(
                    "line {}: {} values, expected {c} (bitmap must be rectangular)",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Bitmap("empty bitmap".into()))?;
    Ok((vec![rows, cols], values))
}
