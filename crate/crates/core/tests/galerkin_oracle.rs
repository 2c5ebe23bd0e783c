//! Dense Galerkin oracle at n = 8: the 3-D operator is assembled as a
//! Kronecker sum of 1-D second-derivative matrices built from explicit sine
//! synthesis and inverted with nalgebra's LU.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sbp_core::sampling::random_field;
use sbp_core::*;

/// `−d²/dx²` on the interior sine nodes of `[0, l]` with `n` intervals.
fn neg_d2(l: f64, n: usize) -> DMatrix<f64> {
    let ns = n - 1;
    let x = |j: usize| l * (j + 1) as f64 / n as f64;
    let s = DMatrix::from_fn(ns, ns, |j, k| ((k + 1) as f64 * PI * x(j) / l).sin());
    let lam = DMatrix::from_diagonal(&DVector::from_fn(ns, |k, _| ((k + 1) as f64 * PI / l).powi(2)));
    let inv = s.clone().lu().try_inverse().expect("synthesis matrix is invertible");
    &s * lam * inv
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `−Δ` on the tensor sine nodes in row-major (x, y, z) order.
fn neg_laplacian(l: [f64; 3], n: usize) -> DMatrix<f64> {
    let ns = n - 1;
    let id = DMatrix::<f64>::identity(ns, ns);
    let (dx, dy, dz) = (neg_d2(l[0], n), neg_d2(l[1], n), neg_d2(l[2], n));
    kron(&kron(&dx, &id), &id) + kron(&kron(&id, &dy), &id) + kron(&kron(&id, &id), &dz)
}

fn flat(a: &Array3<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().cloned())
}

#[test]
fn navier_solve_matches_dense_oracle() {
    let n = 8;
    let l = [1.0, 1.3, 0.8];
    let g = make_grid(BoxDomain::new(l).unwrap(), n).unwrap();
    let k = neg_laplacian(l, n);
    for a in [1.0f64, 0.6] {
        let a_mat = &k + &k * &k * (a * a);
        let lu = a_mat.lu();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let f = random_field(&g, BoundaryClass::DirichletSine, 7, &mut rng).unwrap();
            let phi = Biharmonic::new(a).unwrap().solve_navier(&f).unwrap();
            let oracle = lu.solve(&flat(f.values())).unwrap();
            let got = flat(phi.values());
            let err = (&got - &oracle).amax() / oracle.amax();
            assert!(err < 1e-10, "a = {a}: relative error {err:e}");
        }
    }
}

#[test]
fn quadratic_energy_matches_dense_oracle() {
    let n = 8;
    let l = [1.0, 1.0, 1.0];
    let g = make_grid(BoxDomain::unit_cube(), n).unwrap();
    let k = neg_laplacian(l, n);
    let spec = ProblemSpec::navier(Charge64::uncoupled(g.clone()), 2.5, 1.0)
        .unwrap()
        .without_nonlinearity();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..4 {
        let u = random_field(&g, BoundaryClass::DirichletSine, 7, &mut rng).unwrap();
        let v = flat(u.values());
        let oracle = 0.5 * g.native_weight() * v.dot(&(&k * &v));
        let j = energy::energy_j(&u, &spec).unwrap();
        assert!((j - oracle).abs() <= 1e-10 * oracle.abs(), "{j} vs {oracle}");
        let phi = ScalarField::zeros(g.clone(), BoundaryClass::DirichletSine);
        let f = energy::energy_f(&u, &phi, &spec).unwrap();
        assert!((f - oracle).abs() <= 1e-10 * oracle.abs());
    }
}

#[test]
fn single_modes_follow_the_symbol() {
    let g = make_grid(BoxDomain::unit_cube(), 16).unwrap();
    let modes = [(1, 1, 1), (2, 1, 1), (1, 2, 1), (2, 2, 1), (3, 1, 2)];
    for (i, j, k) in modes {
        let f = ScalarField::from_fn(g.clone(), BoundaryClass::DirichletSine, |x: f64, y: f64, z: f64| {
            (i as f64 * PI * x).sin() * (j as f64 * PI * y).sin() * (k as f64 * PI * z).sin()
        })
        .unwrap();
        let lam = PI * PI * (i * i + j * j + k * k) as f64;
        let phi = operators::solve_navier(&f).unwrap();
        let c = phi.coefficients().unwrap()[[i - 1, j - 1, k - 1]];
        let expect = 1.0 / (lam + lam * lam);
        assert!((c / expect - 1.0).abs() < 1e-12, "mode {i}{j}{k}");
    }
}
