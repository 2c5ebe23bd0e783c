//! The reduction map `u ↦ Φ(u)` and its identities.

use ndarray::Zip;

use crate::charge::ChargeProfile;
use crate::error::{Error, Result};
use crate::field::{energy_norm, multiply_dealiased, norm_h10, BoundaryClass, ScalarField};
use crate::operators::Biharmonic;
use crate::scalar::Real;

/// Boundary regime of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `φ = Δφ = 0`; potential in the sine class.
    Navier,
    /// `∂ₙφ = ∂ₙΔφ = 0`, `∫φ = 0`; potential in the cosine class without its constant mode.
    Neumann,
}

impl Regime {
    pub fn potential_class(self) -> BoundaryClass {
        match self {
            Regime::Navier => BoundaryClass::DirichletSine,
            Regime::Neumann => BoundaryClass::NeumannCosine,
        }
    }
}

fn check_u<T: Real>(u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<()> {
    if u.class() != BoundaryClass::DirichletSine {
        return Err(Error::UnsupportedClass(u.class()));
    }
    if !u.grid().same_as(q.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `q u²` on the padded grid.
pub fn charge_density<T: Real>(u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<ScalarField<T>> {
    let u2 = multiply_dealiased(u, u)?;
    multiply_dealiased(&u2, &q.as_field())
}

/// `Φ(u)` for the operator `op` in the given regime.
pub fn reduce<T: Real>(
    u: &ScalarField<T>,
    q: &ChargeProfile<T>,
    regime: Regime,
    op: &Biharmonic<T>,
) -> Result<ScalarField<T>> {
    check_u(u, q)?;
    match regime {
        Regime::Navier => op.solve_navier(&charge_density(u, q)?),
        Regime::Neumann => op.extend_l(&multiply_dealiased(u, u)?, q),
    }
}

/// `Φ(u) = (−Δ + Δ²)⁻¹(q u²)` with Navier conditions.
pub fn reduce_dirichlet<T: Real>(u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<ScalarField<T>> {
    reduce(u, q, Regime::Navier, &Biharmonic::unit())
}

/// `Φ(u) = L(q u²)`, zero mean, homogeneous Neumann conditions.
pub fn reduce_neumann<T: Real>(u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<ScalarField<T>> {
    reduce(u, q, Regime::Neumann, &Biharmonic::unit())
}

/// `∫q u² φ` on the padded grid.
pub fn coupling<T: Real>(u: &ScalarField<T>, q: &ChargeProfile<T>, phi: &ScalarField<T>) -> Result<T> {
    let rho = charge_density(u, q)?;
    let pv = phi.quad_values();
    let mut acc = T::zero();
    Zip::from(rho.values()).and(&pv).for_each(|&r, &p| acc += r * p);
    Ok(acc * u.grid().quad_weight())
}

/// `E(φ) = ½∫|∇φ|² + (a²/2)∫|Δφ|² − ∫q u² φ`.
pub fn e_functional_with<T: Real>(
    phi: &ScalarField<T>,
    u: &ScalarField<T>,
    q: &ChargeProfile<T>,
    op: &Biharmonic<T>,
) -> Result<T> {
    check_u(u, q)?;
    let e = energy_norm(phi, op.a())?;
    Ok(T::lit(0.5) * e * e - coupling(u, q, phi)?)
}

pub fn e_functional<T: Real>(phi: &ScalarField<T>, u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<T> {
    e_functional_with(phi, u, q, &Biharmonic::unit())
}

/// `|∫q u² Φ − ‖Φ‖²| / (1 + ‖Φ‖²)`.
pub fn reduction_identity_residual<T: Real>(
    u: &ScalarField<T>,
    q: &ChargeProfile<T>,
    regime: Regime,
    op: &Biharmonic<T>,
) -> Result<T> {
    let phi = reduce(u, q, regime, op)?;
    let n2 = energy_norm(&phi, op.a())?.powi(2);
    let c = coupling(u, q, &phi)?;
    Ok((c - n2).abs() / (T::one() + n2))
}

/// `‖Φ(u)‖ / ‖u‖²`.
pub fn phi_bound_ratio<T: Real>(
    u: &ScalarField<T>,
    q: &ChargeProfile<T>,
    regime: Regime,
    op: &Biharmonic<T>,
) -> Result<T> {
    let h = norm_h10(u)?;
    if h == T::zero() {
        return Err(Error::DegenerateInput("u = 0".into()));
    }
    let phi = reduce(u, q, regime, op)?;
    Ok(energy_norm(&phi, op.a())? / (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::inner_l2;
    use crate::grid::{make_grid, BoxDomain, Grid};
    use crate::sampling::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(n: usize) -> (Arc<Grid<f64>>, ChargeProfile<f64>) {
        let g = make_grid(BoxDomain::unit_cube(), n).unwrap();
        let q = ChargeProfile::two_well(g.clone(), 1.5, 0.3).unwrap();
        (g, q)
    }

    #[test]
    fn zero_and_evenness() {
        let (g, q) = setup(8);
        let z = ScalarField::zeros(g.clone(), BoundaryClass::DirichletSine);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
        for regime in [Regime::Navier, Regime::Neumann] {
            let op = Biharmonic::unit();
            assert_eq!(reduce(&z, &q, regime, &op).unwrap().max_abs(), 0.0);
            let a = reduce(&u, &q, regime, &op).unwrap();
            let b = reduce(&u.scaled(-1.0), &q, regime, &op).unwrap();
            assert_eq!(a.values(), b.values());
            assert_eq!(reduction_identity_residual(&z, &q, regime, &op).unwrap(), 0.0);
        }
    }

    #[test]
    fn weak_form_against_random_tests() {
        let (g, q) = setup(16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_field(&g, BoundaryClass::DirichletSine, 6, &mut rng).unwrap();
        let phi = reduce_dirichlet(&u, &q).unwrap();
        for _ in 0..10 {
            let v = random_field(&g, BoundaryClass::DirichletSine, 8, &mut rng).unwrap();
            // (Φ, v)_ℍ = ∫∇Φ∇v + ∫ΔΦΔv, assembled from coefficients.
            let lhs = inner_l2(&crate::operators::apply_operator(&phi).unwrap(), &v).unwrap();
            let rhs = coupling(&u, &q, &v).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-3), "{lhs} {rhs}");
        }
    }

    #[test]
    fn e_at_minimizer_is_minus_half_norm() {
        let (g, q) = setup(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
        let phi = reduce_dirichlet(&u, &q).unwrap();
        let e = e_functional(&phi, &u, &q).unwrap();
        let n2 = energy_norm(&phi, 1.0).unwrap().powi(2);
        assert!((e + 0.5 * n2).abs() <= 1e-8 * n2);
        assert!(e < 0.0);
        for _ in 0..20 {
            let d = random_field(&g, BoundaryClass::DirichletSine, 7, &mut rng).unwrap();
            let comp = phi.combine(1.0, &d, 1e-3).unwrap();
            assert!(e <= e_functional(&comp, &u, &q).unwrap());
        }
    }

    #[test]
    fn ratio_is_scale_invariant_and_zero_for_uncoupled() {
        let (g, q) = setup(8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_field(&g, BoundaryClass::DirichletSine, 5, &mut rng).unwrap();
        let op = Biharmonic::unit();
        let r1 = phi_bound_ratio(&u, &q, Regime::Navier, &op).unwrap();
        let r2 = phi_bound_ratio(&u.scaled(-3.5), &q, Regime::Navier, &op).unwrap();
        assert!((r1 - r2).abs() < 1e-10 * r1);
        let zero = ChargeProfile::uncoupled(g.clone());
        assert_eq!(phi_bound_ratio(&u, &zero, Regime::Neumann, &op).unwrap(), 0.0);
        let z = ScalarField::zeros(g, BoundaryClass::DirichletSine);
        assert!(matches!(phi_bound_ratio(&z, &q, Regime::Navier, &op), Err(Error::DegenerateInput(_))));
    }
}
