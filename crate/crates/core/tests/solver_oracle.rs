mod common;

use std::f64::consts::PI;

use homobound::material::sample_material;
use homobound::solver::{gani_homogenized, solve_all, Formulation, SolveSettings};
use nalgebra::{DMatrix, DVector};

/// Dense `G^E` on an odd 2D grid, assembled from explicit exponentials
/// (no FFT): `G = F⁻¹ diag(Γ̂_E) F` acting on the stacked components.
fn dense_curl_free_projection(n: usize, y: f64) -> DMatrix<f64> {
    let pts = n * n;
    let freq = |j: usize| if j <= (n - 1) / 2 { j as f64 } else { j as f64 - n as f64 };
    let mut g = DMatrix::zeros(2 * pts, 2 * pts);
    for p in 0..pts {
        let (p0, p1) = (p / n, p % n);
        for q in 0..pts {
            let (q0, q1) = (q / n, q % n);
            let mut acc = [[0.0; 2]; 2];
            for k0 in 0..n {
                for k1 in 0..n {
                    if k0 == 0 && k1 == 0 {
                        continue;
                    }
                    let xi = [freq(k0) / y, freq(k1) / y];
                    let nn = xi[0] * xi[0] + xi[1] * xi[1];
                    let phase = 2.0 * PI * (freq(k0) * (p0 as f64 - q0 as f64) + freq(k1) * (p1 as f64 - q1 as f64)) / n as f64;
                    let c = phase.cos() / pts as f64;
                    for a in 0..2 {
                        for b in 0..2 {
                            acc[a][b] += c * xi[a] * xi[b] / nn;
                        }
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    g[(a * pts + p, b * pts + q)] = acc[a][b];
                }
            }
        }
    }
    g
}

#[test]
fn cg_matches_dense_direct_solve() {
    let n = 15;
    let g = common::grid(n);
    let mg = sample_material(&common::topology_s(10.0), &g).unwrap();
    let pts = g.len();
    let proj = dense_curl_free_projection(n, 2.0);
    let coef = DVector::from_fn(2 * pts, |i, _| mg.block(i % pts)[(0, 0)]);
    let a = DMatrix::from_diagonal(&coef);
    // G A G on range(G), identity on its complement
    let sys = &proj * &a * &proj + (DMatrix::identity(2 * pts, 2 * pts) - &proj);
    let lu = sys.lu();
    let mut dense = DMatrix::zeros(2, 2);
    let mut loaded = Vec::new();
    for al in 0..2 {
        let e = DVector::from_fn(2 * pts, |i, _| if i / pts == al { 1.0 } else { 0.0 });
        let x = lu.solve(&(-(&proj * (&a * &e)))).unwrap();
        loaded.push(e + x);
    }
    for al in 0..2 {
        for be in 0..2 {
            dense[(al, be)] = loaded[al].dot(&(&a * &loaded[be])) / pts as f64;
        }
    }
    let sols = solve_all(&mg, Formulation::Primal, &SolveSettings::with_tol(1e-10)).unwrap();
    let cg = gani_homogenized(&mg, &sols, Formulation::Primal).unwrap().matrix;
    assert!((cg - &dense).amax() < 1e-8, "dense {dense}");
}

#[test]
fn even_grid_gap_is_positive_semidefinite() {
    for mat in [common::topology_s1(10.0), common::topology_s2(10.0), common::topology_s1(1e3), common::topology_s2(1e3)] {
        for n in [4, 8] {
            let run = common::gani(&mat, &common::grid(n), 1e-10);
            let gap = &run.a_gani - run.b_gani.clone().try_inverse().unwrap();
            assert!(gap.symmetric_eigen().eigenvalues.min() >= -1e-8);
        }
    }
}

#[test]
fn odd_grid_duality_small() {
    for rho in [10.0, 1e3] {
        let run = common::gani(&common::topology_s(rho), &common::grid(5), 1e-10);
        assert!((run.a_gani * run.b_gani - DMatrix::identity(2, 2)).norm() <= 1e-6);
    }
}
