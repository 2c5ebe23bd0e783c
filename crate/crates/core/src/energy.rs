//! Full and reduced functionals, their gradients, and Lagrange multipliers.

use std::sync::Arc;

use ndarray::{Array3, Zip};

use crate::charge::ChargeProfile;
use crate::error::{Error, Result};
use crate::field::{energy_norm, inner_l2, norm_h10, BoundaryClass, ScalarField};
use crate::grid::Grid;
use crate::operators::{Biharmonic, ChiSolution};
use crate::reduction::{reduce, Regime};
use crate::scalar::Real;

/// Tolerance on `|u|₂ = 1` and `∫q u² = α` for multiplier recovery.
pub const MANIFOLD_TOL: f64 = 1e-8;

/// Largest accepted condition number of the constraint Gram matrix.
pub const GRAM_COND_MAX: f64 = 1e12;

/// Tolerance on the mean of a supplied `χ`.
pub const CHI_MEAN_TOL: f64 = 1e-10;

/// Boundary case of the potential.
#[derive(Debug, Clone)]
pub enum Case<T> {
    Navier,
    Neumann {
        /// `χ` on the padded quadrature grid.
        chi: ScalarField<T>,
        alpha: T,
    },
}

/// Model parameters of one problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T> {
    p: T,
    op: Biharmonic<T>,
    case: Case<T>,
    q: ChargeProfile<T>,
    nonlinearity: bool,
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if p > T::lit(2.0) && p < T::lit(10.0 / 3.0) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p = {p} outside (2, 10/3)")))
    }
}

impl<T: Real> ProblemSpec<T> {
    pub fn navier(q: ChargeProfile<T>, p: T, a: T) -> Result<Self> {
        check_p(p)?;
        Ok(Self {
            p,
            op: Biharmonic::new(a)?,
            case: Case::Navier,
            q,
            nonlinearity: true,
        })
    }

    /// Neumann case with `χ` from the flux solver; `α` is taken from the solution.
    pub fn neumann(q: ChargeProfile<T>, p: T, a: T, chi: &ChiSolution<T>) -> Result<Self> {
        check_p(p)?;
        let op = Biharmonic::new(a)?;
        if !chi.field.grid().same_as(q.grid()) {
            return Err(Error::GridMismatch);
        }
        if chi.report.mean.abs() > T::lit(CHI_MEAN_TOL) {
            return Err(Error::InvalidParameter(format!("chi mean {}", chi.report.mean)));
        }
        Ok(Self {
            p,
            op,
            case: Case::Neumann {
                chi: chi.field.clone(),
                alpha: chi.alpha,
            },
            q,
            nonlinearity: true,
        })
    }

    /// Neumann case with a precomputed `χ`, which must have zero mean on the padded grid.
    pub fn neumann_with_field(q: ChargeProfile<T>, p: T, a: T, chi: &ScalarField<T>, alpha: T) -> Result<Self> {
        check_p(p)?;
        let op = Biharmonic::new(a)?;
        if !chi.grid().same_as(q.grid()) {
            return Err(Error::GridMismatch);
        }
        let field = ScalarField::from_nodal(q.grid().clone(), BoundaryClass::Nodal, chi.quad_values())?;
        let mean = field.mean();
        if mean.abs() > T::lit(CHI_MEAN_TOL) * T::one().max(field.max_abs()) {
            return Err(Error::InvalidParameter(format!("chi mean {mean} is not zero")));
        }
        if !alpha.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            p,
            op,
            case: Case::Neumann { chi: field, alpha },
            q,
            nonlinearity: true,
        })
    }

    /// Drops the `|u|ᵖ` term.
    pub fn without_nonlinearity(mut self) -> Self {
        self.nonlinearity = false;
        self
    }

    pub fn with_nonlinearity(mut self, on: bool) -> Self {
        self.nonlinearity = on;
        self
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn a(&self) -> T {
        self.op.a()
    }

    pub fn operator(&self) -> &Biharmonic<T> {
        &self.op
    }

    pub fn case(&self) -> &Case<T> {
        &self.case
    }

    pub fn q(&self) -> &ChargeProfile<T> {
        &self.q
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.q.grid()
    }

    pub fn nonlinearity(&self) -> bool {
        self.nonlinearity
    }

    pub fn regime(&self) -> Regime {
        match self.case {
            Case::Navier => Regime::Navier,
            Case::Neumann { .. } => Regime::Neumann,
        }
    }

    pub fn alpha(&self) -> Option<T> {
        match &self.case {
            Case::Navier => None,
            Case::Neumann { alpha, .. } => Some(*alpha),
        }
    }

    pub fn chi(&self) -> Option<&ScalarField<T>> {
        match &self.case {
            Case::Navier => None,
            Case::Neumann { chi, .. } => Some(chi),
        }
    }
}

/// Multipliers of a constrained critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers<T> {
    pub omega: T,
    /// Charge-constraint multiplier (Neumann only).
    pub mu: Option<T>,
    /// `‖u‖² + ‖φ‖²`, the relation that ignores the `|u|ᵖ` term (Navier only).
    pub omega_without_p: Option<T>,
    /// `ω − μα` (Neumann only).
    pub omega_minus_mu_alpha: Option<T>,
}

/// Terms of the reduced functional at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts<T> {
    /// `½‖u‖²`
    pub kinetic: T,
    /// `¼‖Φ(u)‖²`
    pub field: T,
    /// `½∫q χ u²` (zero for Navier)
    pub chi: T,
    /// `(1/p)∫|u|ᵖ` (zero when the nonlinearity is disabled)
    pub nonlinear: T,
}

/// `J(u)`, its gradient and the potential, computed together.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub j: T,
    pub grad: ScalarField<T>,
    pub phi: ScalarField<T>,
    pub parts: EnergyParts<T>,
}

fn check_u<T: Real>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<()> {
    if u.class() != BoundaryClass::DirichletSine {
        return Err(Error::UnsupportedClass(u.class()));
    }
    if !u.grid().same_as(spec.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `∫|u|ᵖ` on the padded grid.
pub fn lp_power<T: Real>(u: &ScalarField<T>, p: T) -> T {
    u.quad_values().iter().fold(T::zero(), |s, v| s + v.abs().powf(p)) * u.grid().quad_weight()
}

/// `|u|ᵖ⁻²u`, zero where `u = 0`.
fn power_nonlinearity<T: Real>(v: T, p: T) -> T {
    if v == T::zero() {
        T::zero()
    } else {
        v.abs().powf(p - T::lit(2.0)) * v
    }
}

fn quad_sum<T: Real>(a: &Array3<T>, b: &Array3<T>, c: &Array3<T>, w: T) -> T {
    let mut acc = T::zero();
    Zip::from(a).and(b).and(c).for_each(|&x, &y, &z| acc += x * y * z);
    acc * w
}

/// Evaluates `J`, `∇J` and `Φ(u)` in one pass.
pub fn evaluate<T: Real>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<Evaluation<T>> {
    check_u(u, spec)?;
    let grid = u.grid();
    let w = grid.quad_weight();
    let phi = reduce(u, spec.q(), spec.regime(), spec.operator())?;
    let uq = u.quad_values();
    let pq = phi.quad_values();
    let qq = spec.q().quad_values();
    let chi_q = spec.chi().map(|c| c.values());

    let h = norm_h10(u)?;
    let phin = energy_norm(&phi, spec.a())?;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let chi_term = match chi_q {
        Some(c) => half * quad_sum(qq, c, &uq.mapv(|v| v * v), w),
        None => T::zero(),
    };
    let nonlinear = if spec.nonlinearity() {
        lp_power(u, spec.p()) / spec.p()
    } else {
        T::zero()
    };
    let parts = EnergyParts {
        kinetic: half * h * h,
        field: quarter * phin * phin,
        chi: chi_term,
        nonlinear,
    };
    let j = parts.kinetic + parts.field + parts.chi - parts.nonlinear;

    // Nodal part of the gradient: q(Φ + χ)u − |u|ᵖ⁻²u on the padded grid.
    let mut nodal = uq.clone();
    let p = spec.p();
    let nl = spec.nonlinearity();
    Zip::indexed(&mut nodal).for_each(|idx, v| {
        let uv = *v;
        let pot = pq[idx] + chi_q.map_or(T::zero(), |c| c[idx]);
        let mut g = qq[idx] * pot * uv;
        if nl {
            g -= power_nonlinearity(uv, p);
        }
        *v = g;
    });
    let mut gc = grid.quad_to_sine(&nodal);
    Zip::from(&mut gc)
        .and(u.coefficients()?)
        .and(grid.sine_eigen())
        .for_each(|g, &c, &l| *g += l * c);
    let grad = ScalarField::from_coefficients(grid.clone(), BoundaryClass::DirichletSine, gc)?;
    Ok(Evaluation { j, grad, phi, parts })
}

/// The two-field functional `F(u, φ)` evaluated term by term.
pub fn energy_f<T: Real>(u: &ScalarField<T>, phi: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<T> {
    check_u(u, spec)?;
    let expected = spec.regime().potential_class();
    if phi.class() != expected {
        return Err(Error::UnsupportedClass(phi.class()));
    }
    let w = u.grid().quad_weight();
    let uq = u.quad_values();
    let u2 = uq.mapv(|v| v * v);
    let pq = phi.quad_values();
    let qq = spec.q().quad_values();
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let h = norm_h10(u)?;
    let pn = energy_norm(phi, spec.a())?;
    let mut f = half * h * h + half * quad_sum(qq, &pq, &u2, w) - quarter * pn * pn;
    if spec.nonlinearity() {
        f -= lp_power(u, spec.p()) / spec.p();
    }
    if let Case::Neumann { chi, alpha } = spec.case() {
        f += half * quad_sum(qq, chi.values(), &u2, w);
        f -= *alpha / (T::lit(2.0) * u.grid().volume()) * pq.sum() * w;
    }
    Ok(f)
}

/// `J(u)`. The Navier value uses the condensed form; the Neumann value is `F(u, Φ(u))`.
pub fn energy_j<T: Real>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<T> {
    match spec.regime() {
        Regime::Navier => Ok(evaluate(u, spec)?.j),
        Regime::Neumann => {
            let phi = reduce(u, spec.q(), Regime::Neumann, spec.operator())?;
            energy_f(u, &phi, spec)
        }
    }
}

/// The `L²` representative of `J′(u)` in the sine class.
pub fn grad_j<T: Real>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<ScalarField<T>> {
    Ok(evaluate(u, spec)?.grad)
}

/// `ω = ⟨∇J(u), u⟩` on the unit sphere.
pub fn multiplier_navier<T: Real>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<Multipliers<T>> {
    let ev = evaluate(u, spec)?;
    multiplier_navier_from(u, &ev, spec)
}

pub(crate) fn multiplier_navier_from<T: Real>(
    u: &ScalarField<T>,
    ev: &Evaluation<T>,
    spec: &ProblemSpec<T>,
) -> Result<Multipliers<T>> {
    let n2 = inner_l2(u, u)?;
    if (n2.sqrt() - T::one()).abs() > T::lit(MANIFOLD_TOL) {
        return Err(Error::OffManifold((n2.sqrt() - T::one()).to_f64_lossy()));
    }
    let h = norm_h10(u)?;
    let pn = energy_norm(&ev.phi, spec.a())?;
    Ok(Multipliers {
        omega: inner_l2(&ev.grad, u)?,
        mu: None,
        omega_without_p: Some(h * h + pn * pn),
        omega_minus_mu_alpha: None,
    })
}

/// Solves the symmetric 2×2 Gram system `G (ω, −μ)ᵀ = b` and checks its conditioning.
pub(crate) fn gram_solve<T: Real>(g: [[T; 2]; 2], b: [T; 2]) -> Result<[T; 2]> {
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let disc = ((g[0][0] - g[1][1]).powi(2) + T::lit(4.0) * g[0][1] * g[1][0]).max(T::zero()).sqrt();
    let lmax = (tr + disc) * T::lit(0.5);
    // det/lmax avoids the cancellation in (tr − disc)/2.
    let lmin = if lmax > T::zero() { det / lmax } else { T::zero() };
    let cond = if lmin > T::zero() { lmax / lmin } else { T::infinity() };
    if !(cond <= T::lit(GRAM_COND_MAX)) {
        return Err(Error::DegenerateConstraints(cond.to_f64_lossy()));
    }
    Ok([
        (b[0] * g[1][1] - g[0][1] * b[1]) / det,
        (g[0][0] * b[1] - g[1][0] * b[0]) / det,
    ])
}

/// `(ω, μ)` with `∇J(u) ≈ ωu − μ q u` on `M`.
pub fn multipliers_neumann<T: Real>(u: &ScalarField<T>, spec: &ProblemSpec<T>) -> Result<Multipliers<T>> {
    let ev = evaluate(u, spec)?;
    multipliers_neumann_from(u, &ev.grad, spec)
}

pub(crate) fn multipliers_neumann_from<T: Real>(
    u: &ScalarField<T>,
    grad: &ScalarField<T>,
    spec: &ProblemSpec<T>,
) -> Result<Multipliers<T>> {
    let alpha = spec
        .alpha()
        .ok_or_else(|| Error::InvalidSpec("Neumann multipliers need the Neumann case".into()))?;
    let uu = inner_l2(u, u)?;
    let c2 = spec.q().charge_native(u)? - alpha;
    let drift = (uu.sqrt() - T::one()).abs().max(c2.abs());
    if drift > T::lit(MANIFOLD_TOL) {
        return Err(Error::OffManifold(drift.to_f64_lossy()));
    }
    let w = spec.q().times_native(u)?;
    let uw = inner_l2(u, &w)?;
    let ww = inner_l2(&w, &w)?;
    let x = gram_solve([[uu, uw], [uw, ww]], [inner_l2(grad, u)?, inner_l2(grad, &w)?])?;
    let (omega, mu) = (x[0], -x[1]);
    Ok(Multipliers {
        omega,
        mu: Some(mu),
        omega_without_p: None,
        omega_minus_mu_alpha: Some(omega - mu * alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, BoxDomain};
    use crate::sampling::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn first_mode(g: &Arc<Grid<f64>>) -> ScalarField<f64> {
        ScalarField::from_fn(g.clone(), BoundaryClass::DirichletSine, |x, y, z| {
            (2.0f64).powf(1.5) * (PI * x).sin() * (PI * y).sin() * (PI * z).sin()
        })
        .unwrap()
    }

    #[test]
    fn linear_benchmark_values() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let spec = ProblemSpec::navier(ChargeProfile::uncoupled(g.clone()), 2.5, 1.0)
            .unwrap()
            .without_nonlinearity();
        let u = first_mode(&g);
        assert!((energy_j(&u, &spec).unwrap() - 1.5 * PI * PI).abs() < 1e-12);
        let m = multiplier_navier(&u, &spec).unwrap();
        assert!((m.omega - 3.0 * PI * PI).abs() < 1e-12);
        assert!((m.omega - m.omega_without_p.unwrap()).abs() < 1e-8);
        let grad = grad_j(&u, &spec).unwrap();
        let expect = u.scaled(3.0 * PI * PI);
        let err = (grad.coefficients().unwrap() - expect.coefficients().unwrap())
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        assert!(err < 1e-12);
        let z = ScalarField::zeros(g, BoundaryClass::DirichletSine);
        assert_eq!(grad_j(&z, &spec).unwrap().max_abs(), 0.0);
        assert!(matches!(multiplier_navier(&u.scaled(1.1), &spec), Err(Error::OffManifold(_))));
    }

    #[test]
    fn evenness_and_f_consistency() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let q = ChargeProfile::two_well(g.clone(), 2.0, 0.25).unwrap();
        let spec = ProblemSpec::<f64>::navier(q, 2.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
        let a = evaluate(&u, &spec).unwrap();
        let b = evaluate(&u.scaled(-1.0), &spec).unwrap();
        assert_eq!(a.j.to_bits(), b.j.to_bits());
        assert_eq!(a.grad.values(), &b.grad.values().mapv(|v| -v));
        assert_eq!(a.j, energy_j(&u, &spec).unwrap());
        let f = energy_f(&u, &a.phi, &spec).unwrap();
        assert!((f - a.j).abs() < 1e-10 * a.j.abs().max(1.0));
        assert_eq!(
            energy_f(&ScalarField::zeros(g.clone(), BoundaryClass::DirichletSine), &ScalarField::zeros(g, BoundaryClass::DirichletSine), &spec).unwrap(),
            0.0
        );
    }

    #[test]
    fn directional_derivative_matches_gradient() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let q = ChargeProfile::two_well(g.clone(), 2.0, 0.25).unwrap();
        let spec = ProblemSpec::<f64>::navier(q, 2.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let u = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
            let v = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
            let eps = 1e-5;
            let jp = energy_j(&u.combine(1.0, &v, eps).unwrap(), &spec).unwrap();
            let jm = energy_j(&u.combine(1.0, &v, -eps).unwrap(), &spec).unwrap();
            let fd: f64 = (jp - jm) / (2.0 * eps);
            let an: f64 = inner_l2(&grad_j(&u, &spec).unwrap(), &v).unwrap();
            assert!((fd - an).abs() <= 1e-5 * an.abs(), "{fd} {an}");
        }
    }

    #[test]
    fn constant_charge_gram_is_degenerate() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let q = ChargeProfile::constant(g.clone(), 2.0).unwrap();
        let chi = ScalarField::zeros(g.clone(), BoundaryClass::Nodal);
        let spec = ProblemSpec::neumann_with_field(q, 2.5, 1.0, &chi, 2.0).unwrap();
        let u = first_mode(&g);
        assert!(matches!(multipliers_neumann(&u, &spec), Err(Error::DegenerateConstraints(_))));
    }

    #[test]
    fn neumann_gradient_and_f_consistency() {
        use crate::operators::{solve_chi, BoundaryFlux};
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let flux = BoundaryFlux::single_face(*g.domain(), 0, 1, 0.0, 1.5).unwrap();
        let chi = solve_chi(&flux, &g).unwrap();
        let q = ChargeProfile::separable_cosine(g.clone(), 1.0, 2.0, [1, 0, 0]).unwrap();
        let spec = ProblemSpec::<f64>::neumann(q, 2.8, 1.0, &chi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
        let v = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
        let ev = evaluate(&u, &spec).unwrap();
        let j = energy_j(&u, &spec).unwrap();
        assert!((j - ev.j).abs() < 1e-10 * j.abs().max(1.0), "{j} {}", ev.j);
        let eps = 1e-5;
        let jp = energy_j(&u.combine(1.0, &v, eps).unwrap(), &spec).unwrap();
        let jm = energy_j(&u.combine(1.0, &v, -eps).unwrap(), &spec).unwrap();
        let fd: f64 = (jp - jm) / (2.0 * eps);
        let an: f64 = inner_l2(&ev.grad, &v).unwrap();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} {an}");
    }

    #[test]
    fn exponent_window_is_enforced() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        assert!(ProblemSpec::navier(ChargeProfile::uncoupled(g.clone()), 3.5, 1.0).is_err());
        assert!(ProblemSpec::navier(ChargeProfile::uncoupled(g), 2.0, 1.0).is_err());
    }
}
