//! The fourth-order operator `−Δ + a²Δ²` on the sine and cosine classes.

mod chi;

pub use chi::{BoundaryFlux, ChiReport, ChiSolution, FaceData, Monomial, COMPATIBILITY_TOL, MAX_FACE_DEGREE};

use std::sync::Arc;

use ndarray::{Array3, Zip};

use crate::charge::ChargeProfile;
use crate::error::{Error, Result};
use crate::field::{multiply_dealiased, norm_l2, project, BoundaryClass, ScalarField};
use crate::grid::Grid;
use crate::scalar::Real;

/// Relative size of the mean below which a Neumann source counts as compatible.
pub const MEAN_TOL: f64 = 1e-8;

/// `−Δ + a²Δ²`, diagonal in both spectral classes with symbol `λ + a²λ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biharmonic<T> {
    a: T,
}

impl<T: Real> Biharmonic<T> {
    pub fn new(a: T) -> Result<Self> {
        if a > T::zero() && a.is_finite() {
            Ok(Self { a })
        } else {
            Err(Error::InvalidParameter(format!("a must be positive, got {a}")))
        }
    }

    /// The operator with `a = 1`.
    pub fn unit() -> Self {
        Self { a: T::one() }
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn symbol(&self, lambda: T) -> T {
        lambda + self.a * self.a * lambda * lambda
    }

    fn eigen<'g>(&self, f: &'g ScalarField<T>) -> Result<&'g Array3<T>> {
        match f.class() {
            BoundaryClass::DirichletSine => Ok(f.grid().sine_eigen()),
            BoundaryClass::NeumannCosine => Ok(f.grid().cosine_eigen()),
            BoundaryClass::Nodal => Err(Error::UnsupportedClass(f.class())),
        }
    }

    /// Applies the operator spectrally.
    pub fn apply(&self, phi: &ScalarField<T>) -> Result<ScalarField<T>> {
        let lam = self.eigen(phi)?;
        let mut c = phi.coefficients()?.clone();
        Zip::from(&mut c).and(lam).for_each(|ck, &l| *ck = *ck * self.symbol(l));
        ScalarField::from_coefficients(phi.grid().clone(), phi.class(), c)
    }

    /// Navier problem `(−Δ + a²Δ²)φ = rhs`, `φ = Δφ = 0` on the boundary.
    ///
    /// Non-sine inputs are first projected onto the sine class.
    pub fn solve_navier(&self, rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
        let r = project(rhs, BoundaryClass::DirichletSine)?;
        let mut c = r.coefficients()?.clone();
        Zip::from(&mut c)
            .and(r.grid().sine_eigen())
            .for_each(|ck, &l| *ck = *ck / self.symbol(l));
        ScalarField::from_coefficients(r.grid().clone(), BoundaryClass::DirichletSine, c)
    }

    /// Zero-mean solution of the homogeneous Neumann problem
    /// `∂ₙφ = ∂ₙΔφ = 0`. The source must have zero mean.
    pub fn solve_neumann_zero_mean(&self, rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
        let r = project(rhs, BoundaryClass::NeumannCosine)?;
        let c0 = r.coefficients()?[[0, 0, 0]];
        let scale = norm_l2(&r);
        if c0.abs() * r.grid().volume().sqrt() > T::lit(MEAN_TOL) * scale {
            return Err(Error::CompatibilityViolation(format!(
                "source mean {:e} against norm {:e}",
                c0.to_f64_lossy(),
                scale.to_f64_lossy()
            )));
        }
        let mut c = r.coefficients()?.clone();
        c[[0, 0, 0]] = T::zero();
        Zip::from(&mut c)
            .and(r.grid().cosine_eigen())
            .for_each(|ck, &l| {
                if l > T::zero() {
                    *ck = *ck / self.symbol(l)
                }
            });
        ScalarField::from_coefficients(r.grid().clone(), BoundaryClass::NeumannCosine, c)
    }

    /// `L(w)`: the zero-mean Neumann solution with source `q·w − mean(q·w)`.
    pub fn extend_l(&self, w: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<ScalarField<T>> {
        let qw = multiply_dealiased(w, &q.as_field())?;
        let mean = qw.mean();
        let centred = qw.map_nodal(|v| v - mean)?;
        self.solve_neumann_zero_mean(&centred)
    }
}

/// `(−Δ + Δ²)φ` for a spectral field.
pub fn apply_operator<T: Real>(phi: &ScalarField<T>) -> Result<ScalarField<T>> {
    Biharmonic::unit().apply(phi)
}

pub fn solve_navier<T: Real>(rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
    Biharmonic::unit().solve_navier(rhs)
}

pub fn solve_neumann_zero_mean<T: Real>(rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
    Biharmonic::unit().solve_neumann_zero_mean(rhs)
}

pub fn extend_l<T: Real>(w: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<ScalarField<T>> {
    Biharmonic::unit().extend_l(w, q)
}

/// Solves the inhomogeneous flux problem for `χ` with `a = 1`.
pub fn solve_chi<T: Real>(flux: &BoundaryFlux<T>, grid: &Arc<Grid<T>>) -> Result<ChiSolution<T>> {
    Biharmonic::unit().solve_chi(flux, grid, None)
}
