//! The charge datum `q(x)`.

use std::sync::Arc;

use ndarray::{Array3, Zip};

use crate::error::{Error, Result};
use crate::field::{BoundaryClass, ScalarField};
use crate::grid::Grid;
use crate::scalar::Real;

/// `q` sampled at the sine nodes and on the padded quadrature grid.
///
/// Extrema and level-set statistics are taken over the sine nodes, which are
/// also the nodes of the charge constraint.
#[derive(Debug, Clone)]
pub struct ChargeProfile<T> {
    grid: Arc<Grid<T>>,
    sine: Array3<T>,
    quad: Array3<T>,
    q_min: T,
    q_max: T,
}

impl<T: Real> ChargeProfile<T> {
    fn build(grid: Arc<Grid<T>>, f: impl Fn(T, T, T) -> T) -> Result<Self> {
        let sine = ScalarField::from_fn(grid.clone(), BoundaryClass::DirichletSine, &f)?
            .values()
            .clone();
        let quad = ScalarField::from_fn(grid.clone(), BoundaryClass::Nodal, &f)?
            .values()
            .clone();
        let (q_min, q_max) = sine
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Ok(Self {
            grid,
            sine,
            quad,
            q_min,
            q_max,
        })
    }

    /// Samples `f`; a profile vanishing at every node is rejected.
    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T, T, T) -> T) -> Result<Self> {
        let q = Self::build(grid, f)?;
        if q.is_zero() {
            return Err(Error::InvalidParameter("charge profile vanishes identically".into()));
        }
        Ok(q)
    }

    /// `q ≡ 0`, which decouples the potential; used by the linear benchmark.
    pub fn uncoupled(grid: Arc<Grid<T>>) -> Self {
        Self::build(grid, |_, _, _| T::zero()).expect("zero profile is finite")
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Result<Self> {
        Self::from_fn(grid, move |_, _, _| c)
    }

    /// `offset + amp·Π cos(k_d π x_d / L_d)`; a zero wavenumber drops its factor.
    pub fn separable_cosine(grid: Arc<Grid<T>>, offset: T, amp: T, modes: [usize; 3]) -> Result<Self> {
        let l = grid.domain().lengths();
        let kf = modes.map(T::from_usize_lossy);
        Self::from_fn(grid, move |x, y, z| {
            let f = |d: usize, x: T| (T::PI() * kf[d] * x / l[d]).cos();
            offset + amp * f(0, x) * f(1, y) * f(2, z)
        })
    }

    /// Opposite-sign Gaussian wells centred at a quarter and three quarters of
    /// the first axis: `amp·(e^{−|x−c₁|²/w²} − e^{−|x−c₂|²/w²})`.
    pub fn two_well(grid: Arc<Grid<T>>, amp: T, width: T) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(Error::InvalidParameter(format!("well width must be positive, got {width}")));
        }
        let l = grid.domain().lengths();
        let half = T::lit(0.5);
        let c1 = [l[0] * T::lit(0.25), l[1] * half, l[2] * half];
        let c2 = [l[0] * T::lit(0.75), l[1] * half, l[2] * half];
        let w2 = width * width;
        Self::from_fn(grid, move |x, y, z| {
            let g = |c: [T; 3]| {
                let r2 = (x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2);
                (-r2 / w2).exp()
            };
            amp * (g(c1) - g(c2))
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn sine_values(&self) -> &Array3<T> {
        &self.sine
    }

    pub fn quad_values(&self) -> &Array3<T> {
        &self.quad
    }

    pub fn q_min(&self) -> T {
        self.q_min
    }

    pub fn q_max(&self) -> T {
        self.q_max
    }

    pub fn is_zero(&self) -> bool {
        self.sine.iter().chain(self.quad.iter()).all(|&v| v == T::zero())
    }

    /// `q_max − q_min ≤ tol·max|q|`.
    pub fn is_constant(&self, tol: T) -> bool {
        let scale = self.q_max.abs().max(self.q_min.abs());
        self.q_max - self.q_min <= tol * scale
    }

    /// Fraction of sine nodes with `|q − α| < δ`.
    pub fn level_set_fraction(&self, alpha: T, delta: T) -> T {
        let hits = self.sine.iter().filter(|&&v| (v - alpha).abs() < delta).count();
        T::from_usize_lossy(hits) / T::from_usize_lossy(self.sine.len())
    }

    /// Largest violation of `q(x) = q(R_d x)` for the reflection `x_d ↦ L_d − x_d`
    /// over both node sets.
    pub fn reflection_defect(&self, axis: usize) -> T {
        let defect = |a: &Array3<T>| {
            let mut r = a.clone();
            r.invert_axis(ndarray::Axis(axis));
            let mut m = T::zero();
            Zip::from(a).and(&r).for_each(|&x, &y| m = m.max((x - y).abs()));
            m
        };
        defect(&self.sine).max(defect(&self.quad))
    }

    /// The sine-class field with nodal values `q·u` at the sine nodes.
    pub fn times_native(&self, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        if u.class() != BoundaryClass::DirichletSine {
            return Err(Error::UnsupportedClass(u.class()));
        }
        if !self.grid.same_as(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let mut v = u.values().clone();
        Zip::from(&mut v).and(&self.sine).for_each(|x, &q| *x = *x * q);
        ScalarField::from_nodal(self.grid.clone(), BoundaryClass::DirichletSine, v)
    }

    /// `∫q u²` with the sine-node rule.
    pub fn charge_native(&self, u: &ScalarField<T>) -> Result<T> {
        if u.class() != BoundaryClass::DirichletSine {
            return Err(Error::UnsupportedClass(u.class()));
        }
        if !self.grid.same_as(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let mut acc = T::zero();
        Zip::from(u.values()).and(&self.sine).for_each(|&x, &q| acc += q * x * x);
        Ok(acc * self.grid.native_weight())
    }

    /// The nodal field `q` on the padded grid.
    pub fn as_field(&self) -> ScalarField<T> {
        ScalarField::from_nodal(self.grid.clone(), BoundaryClass::Nodal, self.quad.clone())
            .expect("finite profile")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, BoxDomain};

    #[test]
    fn extrema_and_level_sets() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let q = ChargeProfile::separable_cosine(g.clone(), 0.0, 1.0, [1, 0, 0]).unwrap();
        assert!(q.q_min() < -0.9 && q.q_max() > 0.9);
        assert!(q.level_set_fraction(0.0, 1e-12) > 0.1); // the x = 1/2 plane of nodes
        let c = ChargeProfile::constant(g.clone(), 1.0).unwrap();
        assert_eq!(c.level_set_fraction(1.0, 1e-9), 1.0);
        assert!(c.is_constant(1e-12));
        assert!(ChargeProfile::constant(g.clone(), 0.0).is_err());
        assert!(ChargeProfile::uncoupled(g).is_zero());
    }

    #[test]
    fn reflection_symmetry() {
        let g = make_grid(BoxDomain::new([1.0, 2.0, 1.0]).unwrap(), 10).unwrap();
        let q = ChargeProfile::two_well(g.clone(), 1.0, 0.2).unwrap();
        assert!(q.reflection_defect(1) < 1e-14);
        assert!(q.reflection_defect(2) < 1e-14);
        assert!(q.reflection_defect(0) > 0.1);
        let e = ChargeProfile::separable_cosine(g, 0.5, 1.0, [2, 0, 0]).unwrap();
        assert!(e.reflection_defect(0) < 1e-14);
    }

    #[test]
    fn native_charge_matches_sum() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let q = ChargeProfile::constant(g.clone(), 2.0).unwrap();
        let u = ScalarField::from_fn(g, BoundaryClass::DirichletSine, |x, y, z| {
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin() * (std::f64::consts::PI * z).sin()
        })
        .unwrap();
        assert!((q.charge_native(&u).unwrap() - 0.25).abs() < 1e-14);
        let w = q.times_native(&u).unwrap();
        assert!((crate::field::inner_l2(&w, &u).unwrap() - 0.25).abs() < 1e-14);
    }
}
