//! The inhomogeneous flux problem
//! `−Δχ + a²Δ²χ = α_a/|Ω|`, `∂ₙχ = h₁`, `∂ₙΔχ = h₂`, `∫χ = 0`
//! with `α_a = a²∮h₂ − ∮h₁`, solved by a polynomial lift plus a cosine remainder.

use std::sync::Arc;

use ndarray::{Array1, Array3};

use super::Biharmonic;
use crate::error::{Error, Result};
use crate::field::{BoundaryClass, ScalarField};
use crate::grid::{BoxDomain, Grid};
use crate::poly::{Poly, SepPoly, SepTerm};
use crate::quadrature::gauss_legendre_on;
use crate::scalar::Real;

/// Absolute tolerance (scaled by `max(1, |α|)`) for a claimed `α`.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Highest total degree accepted in face data.
pub const MAX_FACE_DEGREE: usize = 3;

/// `coef · t₁ⁱ · t₂ʲ`, where `t₁, t₂` are the face's tangential coordinates
/// in increasing axis order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial<T> {
    pub coef: T,
    pub i: usize,
    pub j: usize,
}

/// Flux data on one face.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaceData<T> {
    pub h1: Vec<Monomial<T>>,
    pub h2: Vec<Monomial<T>>,
}

impl<T: Real> FaceData<T> {
    pub fn constant(h1: T, h2: T) -> Self {
        let m = |c: T| {
            if c == T::zero() {
                Vec::new()
            } else {
                vec![Monomial { coef: c, i: 0, j: 0 }]
            }
        };
        Self { h1: m(h1), h2: m(h2) }
    }
}

fn tangential(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn face_poly<T: Real>(axis: usize, data: &[Monomial<T>]) -> SepPoly<T> {
    let (t1, t2) = tangential(axis);
    let mut s = SepPoly::zero();
    for m in data {
        let mut f = [Poly::one(), Poly::one(), Poly::one()];
        f[t1] = Poly::monomial(m.coef, m.i);
        f[t2] = Poly::monomial(T::one(), m.j);
        let [a, b, c] = f;
        s.push(SepTerm::new(a, b, c));
    }
    s
}

/// `h₁, h₂` on all six faces, indexed `[axis][side]` with side 0 at `x_axis = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux<T> {
    domain: BoxDomain<T>,
    faces: [[FaceData<T>; 2]; 3],
    h1_total: T,
    h2_total: T,
}

impl<T: Real> BoundaryFlux<T> {
    pub fn new(domain: BoxDomain<T>, faces: [[FaceData<T>; 2]; 3]) -> Result<Self> {
        let l = domain.lengths();
        let (mut h1_total, mut h2_total) = (T::zero(), T::zero());
        for (axis, pair) in faces.iter().enumerate() {
            let (t1, t2) = tangential(axis);
            for face in pair {
                for (data, total) in [(&face.h1, &mut h1_total), (&face.h2, &mut h2_total)] {
                    for m in data {
                        if m.i + m.j > MAX_FACE_DEGREE {
                            return Err(Error::InvalidParameter(format!(
                                "face monomial of degree {} exceeds {MAX_FACE_DEGREE}",
                                m.i + m.j
                            )));
                        }
                        if !m.coef.is_finite() {
                            return Err(Error::NonFinite);
                        }
                        let pi = |k: usize, len: T| len.powi(k as i32 + 1) / T::from_usize_lossy(k + 1);
                        *total += m.coef * pi(m.i, l[t1]) * pi(m.j, l[t2]);
                    }
                }
            }
        }
        Ok(Self {
            domain,
            faces,
            h1_total,
            h2_total,
        })
    }

    /// As [`BoundaryFlux::new`], rejecting a claimed `α` that disagrees with the
    /// face integrals.
    pub fn with_claimed_alpha(domain: BoxDomain<T>, faces: [[FaceData<T>; 2]; 3], alpha: T) -> Result<Self> {
        let f = Self::new(domain, faces)?;
        let tol = T::lit(COMPATIBILITY_TOL) * T::one().max(f.alpha().abs());
        if (alpha - f.alpha()).abs() > tol {
            return Err(Error::CompatibilityViolation(format!(
                "claimed alpha {alpha} but face integrals give {}",
                f.alpha()
            )));
        }
        Ok(f)
    }

    pub fn zero(domain: BoxDomain<T>) -> Self {
        Self::new(domain, Default::default()).expect("empty data")
    }

    /// Constant data on a single face.
    pub fn single_face(domain: BoxDomain<T>, axis: usize, side: usize, h1: T, h2: T) -> Result<Self> {
        let mut faces: [[FaceData<T>; 2]; 3] = Default::default();
        faces[axis][side] = FaceData::constant(h1, h2);
        Self::new(domain, faces)
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn faces(&self) -> &[[FaceData<T>; 2]; 3] {
        &self.faces
    }

    /// `∮h₂ − ∮h₁`.
    pub fn alpha(&self) -> T {
        self.h2_total - self.h1_total
    }

    /// `a²∮h₂ − ∮h₁`, the compatible total for the operator with parameter `a`.
    pub fn alpha_for(&self, a: T) -> T {
        a * a * self.h2_total - self.h1_total
    }

    pub fn flux_integrals(&self) -> (T, T) {
        (self.h1_total, self.h2_total)
    }
}

/// Solves for the degree-7 polynomial on `[0, L]` with prescribed values of
/// `P, P″, P⁽⁴⁾, P⁽⁶⁾` at both ends.
fn end_profile<T: Real>(length: T, at0: [T; 4], at_l: [T; 4]) -> Poly<T> {
    // Work in σ = s/L: P⁽²ʲ⁾(s) = p̃⁽²ʲ⁾(σ)/L²ʲ.
    let mut mat = vec![vec![T::zero(); 8]; 8];
    let mut rhs = vec![T::zero(); 8];
    for j in 0..4 {
        let order = 2 * j;
        let scale = length.powi(order as i32);
        for (row, sigma, target) in [(j, T::zero(), at0[j]), (4 + j, T::one(), at_l[j])] {
            for (k, slot) in mat[row].iter_mut().enumerate() {
                if k >= order {
                    let falling = ((k - order + 1)..=k).fold(T::one(), |p, f| p * T::from_usize_lossy(f));
                    *slot = falling * sigma.powi((k - order) as i32);
                }
            }
            rhs[row] = target * scale;
        }
    }
    Poly::new(gauss_solve(mat, rhs).expect("end-condition system is nonsingular")).rescaled(length)
}

/// Gaussian elimination with partial pivoting.
fn gauss_solve<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).fold(b[row], |s, k| s - a[row][k] * x[k]);
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Normal-direction lift profiles `(A, B)` for one face.
///
/// On the face, `∂ₙ(A h₁ + B R) = h₁` and `∂ₙΔ(A h₁ + B R) = Δₜh₁ + R`; both
/// profiles are flat to sixth order at the opposite face.
fn lift_profiles<T: Real>(length: T, a: T, side: usize) -> (Poly<T>, Poly<T>) {
    let z = T::zero();
    let a2 = a * a;
    let one = T::one();
    // B′ even derivatives follow v, v/a², v/a⁴ so the remainder source is flat to third order.
    let (pa0, pal, pb0, pbl) = if side == 0 {
        ([-one, z, z, z], [z; 4], [z, -one, -one / a2, -one / (a2 * a2)], [z; 4])
    } else {
        ([z; 4], [one, z, z, z], [z; 4], [z, one, one / a2, one / (a2 * a2)])
    };
    (
        end_profile(length, pa0, pal).antiderivative(),
        end_profile(length, pb0, pbl).antiderivative(),
    )
}

fn times_axis<T: Real>(s: &SepPoly<T>, axis: usize, p: &Poly<T>) -> SepPoly<T> {
    let mut out = SepPoly::zero();
    for t in &s.terms {
        let mut f = t.factors.clone();
        f[axis] = f[axis].mul(p);
        let [a, b, c] = f;
        out.push(SepTerm::new(a, b, c));
    }
    out
}

/// Residual diagnostics of a computed `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiReport<T> {
    /// Max over interior cosine nodes of `|−Δχ + a²Δ²χ − α_a/|Ω| − f|`.
    pub strong_residual: T,
    /// Max over face sample points of `|∂ₙχ − h₁|`.
    pub flux_residual_h1: T,
    /// Max over face sample points of `|∂ₙΔχ − h₂|`.
    pub flux_residual_h2: T,
    /// `|Ω|⁻¹∫χ`, evaluated exactly.
    pub mean: T,
    /// Mean of `χ` under the padded quadrature rule.
    pub quad_mean: T,
}

/// `χ = ℓ − mean(ℓ) + ψ` with polynomial lift `ℓ` and cosine remainder `ψ`.
#[derive(Debug, Clone)]
pub struct ChiSolution<T> {
    pub lift: SepPoly<T>,
    pub lift_mean: T,
    pub remainder: ScalarField<T>,
    /// `χ` on the padded quadrature grid.
    pub field: ScalarField<T>,
    pub alpha: T,
    pub report: ChiReport<T>,
}

impl<T: Real> ChiSolution<T> {
    pub fn eval(&self, p: [T; 3]) -> T {
        self.lift.eval(p) - self.lift_mean + self.remainder.eval_at(p).expect("cosine class")
    }
}

/// `∫₀ᴸ f(x) cos(kπx/L) dx` for `k < n`, by Gauss–Legendre quadrature.
struct CosineMoments<T> {
    nodes: Vec<T>,
    table: Vec<Vec<T>>,
}

impl<T: Real> CosineMoments<T> {
    fn new(length: T, n: usize) -> Self {
        let (nodes, w) = gauss_legendre_on(2 * n + 32, T::zero(), length);
        let table = (0..n)
            .map(|k| {
                nodes
                    .iter()
                    .zip(&w)
                    .map(|(&x, &wi)| wi * (T::PI() * T::from_usize_lossy(k) * x / length).cos())
                    .collect()
            })
            .collect();
        Self { nodes, table }
    }

    fn of(&self, p: &Poly<T>) -> Vec<T> {
        let v: Vec<T> = self.nodes.iter().map(|&x| p.eval(x)).collect();
        self.table
            .iter()
            .map(|row| row.iter().zip(&v).fold(T::zero(), |s, (&c, &f)| s + c * f))
            .collect()
    }
}

impl<T: Real> Biharmonic<T> {
    /// Solves the flux problem on `grid`, with an optional zero-mean cosine-class
    /// source `f` added to the constant `α_a/|Ω|`.
    pub fn solve_chi(
        &self,
        flux: &BoundaryFlux<T>,
        grid: &Arc<Grid<T>>,
        source: Option<&ScalarField<T>>,
    ) -> Result<ChiSolution<T>> {
        let dom = grid.domain().lengths();
        if dom != flux.domain().lengths() {
            return Err(Error::GridMismatch);
        }
        let a = self.a();
        let alpha = flux.alpha_for(a);
        let vol = grid.volume();
        let n = grid.n();

        if let Some(f) = source {
            if f.class() != BoundaryClass::NeumannCosine {
                return Err(Error::UnsupportedClass(f.class()));
            }
            let c0 = f.coefficients()?[[0, 0, 0]];
            if c0.abs() > T::lit(super::MEAN_TOL) * f.max_abs().max(T::one()) {
                return Err(Error::CompatibilityViolation(format!("source mean {c0}")));
            }
        }

        // Lift, one face at a time.
        let mut lift = SepPoly::zero();
        let mut h1s = Vec::new();
        for (axis, pair) in flux.faces().iter().enumerate() {
            for (side, face) in pair.iter().enumerate() {
                let h1 = face_poly(axis, &face.h1);
                let h2 = face_poly(axis, &face.h2);
                if h1.is_zero() && h2.is_zero() {
                    continue;
                }
                let r = h2.add(&h1.laplacian().scale(-T::one()));
                let (pa, pb) = lift_profiles(dom[axis], a, side);
                lift = lift.add(&times_axis(&h1, axis, &pa)).add(&times_axis(&r, axis, &pb));
                h1s.push((axis, side, h1, h2));
            }
        }
        let g = alpha / vol;
        let op_lift = lift.operator(a);
        let lap_lift = lift.laplacian();

        // Weak right-hand side against each cosine mode.
        let moments: Vec<CosineMoments<T>> = (0..3).map(|d| CosineMoments::new(dom[d], n)).collect();
        let mut rhs = Array3::<T>::zeros((n, n, n));
        let add_term = |t: &SepTerm<T>, rhs: &mut Array3<T>, normal: Option<(usize, T)>| {
            let m: Vec<Vec<T>> = (0..3)
                .map(|d| match normal {
                    Some((ax, x)) if ax == d => (0..n)
                        .map(|k| {
                            t.factors[d].eval(x) * (T::PI() * T::from_usize_lossy(k) * x / dom[d]).cos()
                        })
                        .collect(),
                    _ => moments[d].of(&t.factors[d]),
                })
                .collect();
            for ((i, j, k), o) in rhs.indexed_iter_mut() {
                *o += m[0][i] * m[1][j] * m[2][k];
            }
        };
        let volume_src = SepPoly::from_term(SepTerm::new(Poly::constant(g), Poly::one(), Poly::one()))
            .add(&op_lift.scale(-T::one()));
        for t in &volume_src.terms {
            add_term(t, &mut rhs, None);
        }
        // Boundary terms ∮(h₁ − ∂ₙℓ)v + a²∮(∂ₙΔℓ − h₂)v on every face.
        let a2 = a * a;
        for axis in 0..3 {
            for side in 0..2 {
                let x = if side == 0 { T::zero() } else { dom[axis] };
                let sign = if side == 0 { -T::one() } else { T::one() };
                let (h1, h2) = h1s
                    .iter()
                    .find(|f| f.0 == axis && f.1 == side)
                    .map(|f| (f.2.clone(), f.3.clone()))
                    .unwrap_or_default();
                let dn = lift.partial(axis).restrict(axis, x).scale(sign);
                let dn_lap = lap_lift.partial(axis).restrict(axis, x).scale(sign);
                let corr = h1
                    .add(&dn.scale(-T::one()))
                    .add(&dn_lap.scale(a2))
                    .add(&h2.scale(-a2));
                for t in &corr.terms {
                    add_term(t, &mut rhs, Some((axis, x)));
                }
            }
        }
        let mass = grid.cosine_mass();
        let lam = grid.cosine_eigen();
        let scale = flux.flux_integrals().0.abs() + a2 * flux.flux_integrals().1.abs() + T::one();
        if rhs[[0, 0, 0]].abs() > T::lit(1e-8) * scale {
            return Err(Error::CompatibilityViolation(format!(
                "constant-mode defect {}",
                rhs[[0, 0, 0]]
            )));
        }
        let mut c = Array3::zeros((n, n, n));
        for ((i, j, k), o) in c.indexed_iter_mut() {
            if (i, j, k) != (0, 0, 0) {
                *o = rhs[[i, j, k]] / (self.symbol(lam[[i, j, k]]) * mass[[i, j, k]]);
            }
        }
        if let Some(f) = source {
            let fc = f.coefficients()?;
            for ((i, j, k), o) in c.indexed_iter_mut() {
                if (i, j, k) != (0, 0, 0) {
                    *o += fc[[i, j, k]] / self.symbol(lam[[i, j, k]]);
                }
            }
        }
        let remainder = ScalarField::from_coefficients(grid.clone(), BoundaryClass::NeumannCosine, c)?;
        let lift_mean = lift.integrate_box(dom) / vol;

        let quad = |d: usize| &grid.axis(d).quad_nodes;
        let lq = lift.eval_tensor([quad(0), quad(1), quad(2)]);
        let values = lq.mapv(|v| v - lift_mean) + remainder.quad_values();
        let field = ScalarField::from_nodal(grid.clone(), BoundaryClass::Nodal, values)?;

        // Diagnostics.
        let cos_nodes = |d: usize| &grid.axis(d).cosine_nodes;
        let op_vals = op_lift.eval_tensor([cos_nodes(0), cos_nodes(1), cos_nodes(2)])
            + self.apply(&remainder)?.values();
        let mut strong = T::zero();
        for (idx, &v) in op_vals.indexed_iter() {
            let f = source.map_or(T::zero(), |s| s.values()[idx]);
            strong = strong.max((v - g - f).abs());
        }
        let (mut r1, mut r2) = (T::zero(), T::zero());
        for axis in 0..3 {
            for side in 0..2 {
                let x = if side == 0 { T::zero() } else { dom[axis] };
                let sign = if side == 0 { -T::one() } else { T::one() };
                let (h1, h2) = h1s
                    .iter()
                    .find(|f| f.0 == axis && f.1 == side)
                    .map(|f| (f.2.clone(), f.3.clone()))
                    .unwrap_or_default();
                let d1 = lift.partial(axis).restrict(axis, x).scale(sign).add(&h1.scale(-T::one()));
                let d2 = lap_lift.partial(axis).restrict(axis, x).scale(sign).add(&h2.scale(-T::one()));
                let mut pts: [Array1<T>; 3] = [0, 1, 2].map(|d| cos_nodes(d).clone());
                pts[axis] = Array1::from_elem(1, x);
                let pr = [&pts[0], &pts[1], &pts[2]];
                r1 = d1.eval_tensor(pr).iter().fold(r1, |m, v| m.max(v.abs()));
                r2 = d2.eval_tensor(pr).iter().fold(r2, |m, v| m.max(v.abs()));
            }
        }
        let report = ChiReport {
            strong_residual: strong,
            flux_residual_h1: r1,
            flux_residual_h2: r2,
            mean: remainder.coefficients()?[[0, 0, 0]] + lift.integrate_box(dom) / vol - lift_mean,
            quad_mean: field.mean(),
        };
        Ok(ChiSolution {
            lift,
            lift_mean,
            remainder,
            field,
            alpha,
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn end_profile_meets_conditions() {
        let l: f64 = 1.7;
        let p = end_profile(l, [-1.0, 0.5, 0.0, 2.0], [0.0, 0.0, 1.0, 0.0]);
        for (j, (v0, vl)) in [(-1.0, 0.0), (0.5, 0.0), (0.0, 1.0), (2.0, 0.0)].into_iter().enumerate() {
            let d = p.nth_derivative(2 * j);
            assert!((d.eval(0.0) - v0).abs() < 1e-10, "j={j}");
            assert!((d.eval(l) - vl).abs() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn alpha_is_recomputed_from_faces() {
        let dom = BoxDomain::<f64>::new([1.0, 2.0, 3.0]).unwrap();
        let f = BoundaryFlux::single_face(dom, 0, 0, 1.0, 0.0).unwrap();
        assert!((f.alpha() + 6.0).abs() < 1e-14);
        let faces = f.faces().clone();
        assert!(BoundaryFlux::with_claimed_alpha(dom, faces.clone(), -6.0).is_ok());
        assert!(matches!(
            BoundaryFlux::with_claimed_alpha(dom, faces, 1.0),
            Err(Error::CompatibilityViolation(_))
        ));
        let mut bad: [[FaceData<f64>; 2]; 3] = Default::default();
        bad[1][1].h1.push(Monomial { coef: 1.0, i: 2, j: 2 });
        assert!(BoundaryFlux::new(dom, bad).is_err());
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = make_grid(BoxDomain::<f64>::unit_cube(), 8).unwrap();
        let s = Biharmonic::unit().solve_chi(&BoundaryFlux::zero(*g.domain()), &g, None).unwrap();
        assert_eq!(s.alpha, 0.0);
        assert_eq!(s.field.max_abs(), 0.0);
    }

    #[test]
    fn constant_flux_lift_is_exact() {
        let g = make_grid(BoxDomain::<f64>::unit_cube(), 8).unwrap();
        let flux = BoundaryFlux::single_face(*g.domain(), 0, 0, 1.0, 0.0).unwrap();
        let s = Biharmonic::unit().solve_chi(&flux, &g, None).unwrap();
        assert!((s.alpha + 1.0).abs() < 1e-14);
        assert!(s.remainder.max_abs() < 1e-12);
        assert!(s.report.strong_residual < 1e-10);
        assert!(s.report.flux_residual_h1 < 1e-12 && s.report.flux_residual_h2 < 1e-12);
        assert!(s.report.mean.abs() < 1e-12);
    }

    #[test]
    fn manufactured_cosine_is_recovered() {
        let g = make_grid(BoxDomain::<f64>::new([1.5, 1.0, 1.0]).unwrap(), 8).unwrap();
        let l = 1.5;
        let k = PI / l;
        let sym = k * k + k.powi(4);
        let src = ScalarField::from_fn(g.clone(), BoundaryClass::NeumannCosine, |x, _, _| sym * (k * x).cos()).unwrap();
        let s = Biharmonic::unit()
            .solve_chi(&BoundaryFlux::zero(*g.domain()), &g, Some(&src))
            .unwrap();
        for &x in &[0.1, 0.7, 1.3] {
            assert!((s.eval([x, 0.4, 0.6]) - (k * x).cos()).abs() < 1e-10);
        }
    }
}
