use sbp_core::grid::{make_grid, BoxDomain};
use sbp_core::operators::{Biharmonic, BoundaryFlux};

/// Closed-form solution when constant data sit on the `x = 0` face only:
/// `w = χ′` solves `−w′ + a²w‴ = c` with `w(0) = −h₁`, `w″(0) = −h₂`,
/// `w(L) = w″(L) = 0`, so `w = −cs + K₀ + K₁e^{s/a} + K₂e^{−s/a}`.
fn oracle(l: f64, a: f64, h1: f64, h2: f64) -> impl Fn(f64) -> f64 {
    let c = (a * a * h2 - h1) / l;
    let (ep, em) = ((l / a).exp(), (-l / a).exp());
    // K₁ + K₂ = −a²h₂, K₁e^{L/a} + K₂e^{−L/a} = 0
    let k1 = -a * a * h2 * em / (em - ep);
    let k2 = -a * a * h2 - k1;
    let k0 = -h1 - k1 - k2;
    let prim = move |s: f64| -c * s * s / 2.0 + k0 * s + a * k1 * (s / a).exp() - a * k2 * (-s / a).exp();
    // subtract the mean over [0, L]
    let mean = {
        let int = |s: f64| -c * s * s * s / 6.0 + k0 * s * s / 2.0 + a * a * k1 * (s / a).exp() + a * a * k2 * (-s / a).exp();
        (int(l) - int(0.0)) / l
    };
    move |s| prim(s) - mean
}

fn max_error(n: usize, a: f64, l: f64, h1: f64, h2: f64) -> f64 {
    let dom = BoxDomain::new([l, 1.0, 1.0]).unwrap();
    let g = make_grid(dom, n).unwrap();
    let flux = BoundaryFlux::single_face(dom, 0, 0, h1, h2).unwrap();
    let s = Biharmonic::new(a).unwrap().solve_chi(&flux, &g, None).unwrap();
    let exact = oracle(l, a, h1, h2);
    (0..41)
        .map(|i| {
            let x = l * i as f64 / 40.0;
            (s.eval([x, 0.37, 0.61]) - exact(x)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn oracle_satisfies_its_boundary_conditions() {
    let (a, h1, h2) = (0.8, 0.5, 1.0);
    let f = oracle(1.0, a, h1, h2);
    let d = 1e-3;
    // outward normal at x = 0 is −x
    assert!((-(-3.0 * f(0.0) + 4.0 * f(d) - f(2.0 * d)) / (2.0 * d) - h1).abs() < 1e-5);
    let end = (3.0 * f(1.0) - 4.0 * f(1.0 - d) + f(1.0 - 2.0 * d)) / (2.0 * d);
    assert!(end.abs() < 1e-5);
}

#[test]
fn polynomial_lift_is_exact_for_flux_only_data() {
    assert!(max_error(8, 1.0, 1.0, 1.0, 0.0) < 1e-12);
}

#[test]
fn chi_converges_spectrally_with_curvature_flux() {
    // On the unit cube the n = 8 error already sits at roundoff; a longer
    // first axis leaves a measurable remainder.
    for l in [2.0, 3.0] {
        let e8 = max_error(8, 1.0, l, 0.5, 1.0);
        let e32 = max_error(32, 1.0, l, 0.5, 1.0);
        assert!(e8 < 1e-8, "l={l}: {e8:e}");
        assert!(e8 / e32 >= 100.0, "l={l}: {e8:e} / {e32:e}");

    }
}
