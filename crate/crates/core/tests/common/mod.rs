#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use oscmeas::engine::length_grid;
use oscmeas::linalg::{expm_hermitian, CMatrix, CVector};
use oscmeas::measure::FiniteSystem;
use oscmeas::oscillation::{DetectionModel, MassEigenstate, MixingMatrix, OscillationScenario};
use rand::Rng;

pub fn ur2f() -> (OscillationScenario, DetectionModel) {
    let states = vec![
        MassEigenstate::stable(0.1, 10.0).unwrap(),
        MassEigenstate::stable(0.2, 10.0).unwrap(),
    ];
    let scenario = OscillationScenario::new(states, MixingMatrix::rotation(FRAC_PI_4), 50.0, 0).unwrap();
    let detection = DetectionModel::new(0.0, vec![100.0], 1.0, 1.0).unwrap();
    (scenario, detection)
}

/// Three periods of `2π/0.003` from `L = 6σ`, 60 points per period.
pub fn ur2f_grid() -> Vec<f64> {
    length_grid(300.0, 300.0 + 3.0 * 2.0 * PI / 0.003, 181)
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    let mut h = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        h[(r, r)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for c in r + 1..dim {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(r, c)] = z;
            h[(c, r)] = z.conj();
        }
    }
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    h * Complex64::new(scale / norm, 0.0)
}

pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    expm_hermitian(&random_hermitian(rng, dim, 3.0), 1.0)
}

/// Random system with `‖H‖_F ≤ 1`, detection rank in `[1, dim)`, and
/// outcome projectors spanning the detection subspace in a random basis.
pub fn random_system<R: Rng>(rng: &mut R, max_dim: usize) -> FiniteSystem {
    let dim = rng.gen_range(2..=max_dim);
    let rank = rng.gen_range(1..dim);
    let outcomes = rng.gen_range(1..=rank);
    let w = random_unitary(rng, dim);
    let column_projector = |cols: &[usize]| -> CMatrix {
        let mut p = CMatrix::zeros(dim, dim);
        for &k in cols {
            let v = w.column(k);
            p += v * v.adjoint();
        }
        p
    };
    let mut cuts: Vec<usize> = (1..rank).collect();
    while cuts.len() > outcomes - 1 {
        cuts.remove(rng.gen_range(0..cuts.len()));
    }
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(rank);
    let projectors: Vec<CMatrix> = bounds
        .windows(2)
        .map(|b| column_projector(&(b[0]..b[1]).collect::<Vec<_>>()))
        .collect();
    let detection = column_projector(&(0..rank).collect::<Vec<_>>());
    let mut psi = CVector::zeros(dim);
    for k in rank..dim {
        let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        psi += w.column(k) * a;
    }
    let psi = &psi / Complex64::new(psi.norm(), 0.0);
    let scale = rng.gen_range(0.1..1.0);
    let h = random_hermitian(rng, dim, scale);
    FiniteSystem::new(h, detection, projectors, psi).unwrap()
}
