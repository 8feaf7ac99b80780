#![allow(dead_code)]

use homobound::bounds::{evaluate_bounds, UpperLower};
use homobound::grid::GridSpec;
use homobound::material::{sample_material, Inclusion, InclusionSpec, Material, PixelGridMaterial, Topology};
use homobound::solver::{gani_homogenized, solve_all, AuxiliarySolution, Formulation, SolveSettings};
use homobound::spectral::TensorField;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CELL: [f64; 2] = [2.0, 2.0];

/// Centered square of side `side` with `A = (1 + ρ f) I` on `Y = (2, 2)`.
pub fn square(rho: f64, side: f64, closed: bool) -> Material {
    let h = [side, side];
    Material::Inclusions(
        InclusionSpec::new(
            &CELL,
            DMatrix::identity(2, 2),
            vec![Inclusion {
                increment: DMatrix::identity(2, 2) * rho,
                topology: if closed { Topology::closed_rect(&h) } else { Topology::rect(&h) },
                center: vec![0.0, 0.0],
            }],
        )
        .unwrap(),
    )
}

/// `|x_α| < 3/5`.
pub fn topology_s(rho: f64) -> Material {
    square(rho, 1.2, false)
}

/// `|x_α| < 3/4`.
pub fn topology_s1(rho: f64) -> Material {
    square(rho, 1.5, false)
}

/// `|x_α| ≤ 3/4`.
pub fn topology_s2(rho: f64) -> Material {
    square(rho, 1.5, true)
}

/// `a = a2` on `0 < x_1 < 1`, `a1` elsewhere: layers normal to axis 0.
pub fn laminate(a1: f64, a2: f64) -> Material {
    Material::Inclusions(
        InclusionSpec::new(
            &CELL,
            DMatrix::identity(2, 2) * a1,
            vec![Inclusion {
                increment: DMatrix::identity(2, 2) * (a2 - a1),
                topology: Topology::rect(&[1.0, 2.0]),
                center: vec![0.5, 0.0],
            }],
        )
        .unwrap(),
    )
}

pub fn grid(n: usize) -> GridSpec {
    GridSpec::new(&CELL, &[n, n]).unwrap()
}

pub fn random_field(g: &GridSpec, rng: &mut ChaCha8Rng) -> TensorField {
    TensorField::from_data(g, (0..g.dim() * g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub struct Run {
    pub primal: Vec<AuxiliarySolution>,
    pub dual: Vec<AuxiliarySolution>,
    pub a_gani: DMatrix<f64>,
    pub b_gani: DMatrix<f64>,
}

pub fn gani(material: &Material, g: &GridSpec, tol: f64) -> Run {
    let mg = sample_material(material, g).unwrap();
    let s = SolveSettings::with_tol(tol);
    let primal = solve_all(&mg, Formulation::Primal, &s).unwrap();
    let dual = solve_all(&mg, Formulation::Dual, &s).unwrap();
    assert!(primal.iter().chain(&dual).all(|s| s.converged));
    Run {
        a_gani: gani_homogenized(&mg, &primal, Formulation::Primal).unwrap().matrix,
        b_gani: gani_homogenized(&mg, &dual, Formulation::Dual).unwrap().matrix,
        primal,
        dual,
    }
}

pub fn bounds(material: &Material, g: &GridSpec, run: &Run) -> UpperLower {
    evaluate_bounds(material, g, &run.primal, &run.dual).unwrap()
}

/// Periodic disc packing on a `size × size` bitmap, smoothed afterwards by the caller.
pub fn synthetic_bitmap(seed: u64, size: usize, discs: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ind = vec![0.0; size * size];
    for _ in 0..discs {
        let (ci, cj) = (rng.gen_range(0..size) as i64, rng.gen_range(0..size) as i64);
        let r = rng.gen_range(size as f64 / 40.0..size as f64 / 10.0);
        let ri = r.ceil() as i64;
        for di in -ri..=ri {
            for dj in -ri..=ri {
                if ((di * di + dj * dj) as f64) <= r * r {
                    let i = (ci + di).rem_euclid(size as i64) as usize;
                    let j = (cj + dj).rem_euclid(size as i64) as usize;
                    ind[i * size + j] = 1.0;
                }
            }
        }
    }
    ind
}

/// Foam-like bitmap: solid phase (0.49) with disc-shaped pores (0.029).
pub fn foam(seed: u64, size: usize) -> PixelGridMaterial {
    let solid = synthetic_bitmap(seed, size, 60).iter().map(|p| 1.0 - p).collect();
    PixelGridMaterial::new(&[1.0, 1.0], &[size, size], solid, 0.029, 0.49).unwrap()
}
