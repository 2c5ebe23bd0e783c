//! Scalar fields on a [`Grid`], spectral transforms, norms and dealiased products.

use std::sync::Arc;

use ndarray::{Array3, Zip};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// Discretization class of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    /// Sine expansion; vanishes on every face. Represents `H¹₀` and the Navier space.
    DirichletSine,
    /// Cosine expansion; zero normal derivative of the field and of its Laplacian.
    NeumannCosine,
    /// Point values on the padded quadrature grid, no spectral representation.
    Nodal,
}

impl BoundaryClass {
    pub fn is_spectral(self) -> bool {
        !matches!(self, BoundaryClass::Nodal)
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryClass::DirichletSine => "dirichlet-sine",
            BoundaryClass::NeumannCosine => "neumann-cosine",
            BoundaryClass::Nodal => "nodal",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "dirichlet-sine" => Some(BoundaryClass::DirichletSine),
            "neumann-cosine" => Some(BoundaryClass::NeumannCosine),
            "nodal" => Some(BoundaryClass::Nodal),
            _ => None,
        }
    }
}

/// A real function on the box.
///
/// Spectral fields store their values at the native nodes together with the
/// expansion coefficients; both are kept in sync by every constructor.
#[derive(Debug, Clone)]
pub struct ScalarField<T> {
    grid: Arc<Grid<T>>,
    class: BoundaryClass,
    values: Array3<T>,
    coeffs: Option<Array3<T>>,
}

fn shape_of<T>(a: &Array3<T>) -> [usize; 3] {
    let (a0, a1, a2) = a.dim();
    [a0, a1, a2]
}

fn check_finite<T: Real>(a: &Array3<T>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Shape of the nodal array of a class.
pub fn nodal_shape<T: Real>(grid: &Grid<T>, class: BoundaryClass) -> [usize; 3] {
    match class {
        BoundaryClass::DirichletSine => grid.sine_shape(),
        BoundaryClass::NeumannCosine => grid.cosine_shape(),
        BoundaryClass::Nodal => grid.quad_shape(),
    }
}

impl<T: Real> ScalarField<T> {
    /// Wraps nodal values, which must live on the node set of `class`.
    pub fn from_nodal(grid: Arc<Grid<T>>, class: BoundaryClass, values: Array3<T>) -> Result<Self> {
        let expected = nodal_shape(&grid, class);
        if shape_of(&values) != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: shape_of(&values),
            });
        }
        check_finite(&values)?;
        let coeffs = match class {
            BoundaryClass::DirichletSine => Some(grid.sine_analysis(&values)),
            BoundaryClass::NeumannCosine => Some(grid.cosine_analysis(&values)),
            BoundaryClass::Nodal => None,
        };
        Ok(Self {
            grid,
            class,
            values,
            coeffs,
        })
    }

    /// Builds a spectral field from its expansion coefficients.
    pub fn from_coefficients(
        grid: Arc<Grid<T>>,
        class: BoundaryClass,
        coeffs: Array3<T>,
    ) -> Result<Self> {
        let expected = match class {
            BoundaryClass::DirichletSine => grid.sine_shape(),
            BoundaryClass::NeumannCosine => grid.cosine_shape(),
            BoundaryClass::Nodal => return Err(Error::UnsupportedClass(class)),
        };
        if shape_of(&coeffs) != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: shape_of(&coeffs),
            });
        }
        check_finite(&coeffs)?;
        let values = match class {
            BoundaryClass::DirichletSine => grid.sine_synthesis(&coeffs),
            _ => grid.cosine_synthesis(&coeffs),
        };
        Ok(Self {
            grid,
            class,
            values,
            coeffs: Some(coeffs),
        })
    }

    /// Samples `f(x, y, z)` at the nodes of `class`.
    pub fn from_fn(
        grid: Arc<Grid<T>>,
        class: BoundaryClass,
        f: impl Fn(T, T, T) -> T,
    ) -> Result<Self> {
        let (ax, ay, az) = (grid.axis(0), grid.axis(1), grid.axis(2));
        let nodes = |a: &crate::grid::AxisOps<T>| match class {
            BoundaryClass::DirichletSine => a.sine_nodes.clone(),
            BoundaryClass::NeumannCosine => a.cosine_nodes.clone(),
            BoundaryClass::Nodal => a.quad_nodes.clone(),
        };
        let (x, y, z) = (nodes(ax), nodes(ay), nodes(az));
        let values = Array3::from_shape_fn((x.len(), y.len(), z.len()), |(i, j, k)| f(x[i], y[j], z[k]));
        Self::from_nodal(grid, class, values)
    }

    pub fn zeros(grid: Arc<Grid<T>>, class: BoundaryClass) -> Self {
        let shape = nodal_shape(&grid, class);
        let values = Array3::zeros(shape);
        let coeffs = class.is_spectral().then(|| Array3::zeros(shape));
        Self {
            grid,
            class,
            values,
            coeffs,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn class(&self) -> BoundaryClass {
        self.class
    }

    /// Values at the native nodes of the class.
    pub fn values(&self) -> &Array3<T> {
        &self.values
    }

    pub fn coefficients(&self) -> Result<&Array3<T>> {
        self.coeffs.as_ref().ok_or(Error::UnsupportedClass(self.class))
    }

    /// Values on the padded quadrature grid.
    pub fn quad_values(&self) -> Array3<T> {
        match (&self.class, &self.coeffs) {
            (BoundaryClass::DirichletSine, Some(c)) => self.grid.sine_to_quad(c),
            (BoundaryClass::NeumannCosine, Some(c)) => self.grid.cosine_to_quad(c),
            _ => self.values.clone(),
        }
    }

    /// Evaluates the spectral expansion at an arbitrary point.
    pub fn eval_at(&self, p: [T; 3]) -> Result<T> {
        let c = self.coefficients()?;
        let g = &self.grid;
        let basis = |ax: usize, x: T| -> Vec<T> {
            let l = g.axis(ax).length;
            match self.class {
                BoundaryClass::DirichletSine => (1..g.n())
                    .map(|k| (T::PI() * T::from_usize_lossy(k) * x / l).sin())
                    .collect(),
                _ => (0..g.n())
                    .map(|k| (T::PI() * T::from_usize_lossy(k) * x / l).cos())
                    .collect(),
            }
        };
        let (bx, by, bz) = (basis(0, p[0]), basis(1, p[1]), basis(2, p[2]));
        let mut acc = T::zero();
        for (idx, &ck) in c.indexed_iter() {
            acc += ck * bx[idx.0] * by[idx.1] * bz[idx.2];
        }
        Ok(acc)
    }

    pub fn is_same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.is_same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `t · self`.
    pub fn scaled(&self, t: T) -> Self {
        Self {
            grid: self.grid.clone(),
            class: self.class,
            values: self.values.mapv(|v| v * t),
            coeffs: self.coeffs.as_ref().map(|c| c.mapv(|v| v * t)),
        }
    }

    /// `a · self + b · other` for fields of the same class.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_grid(other)?;
        if self.class != other.class {
            return Err(Error::UnsupportedClass(other.class));
        }
        let mix = |x: &Array3<T>, y: &Array3<T>| {
            let mut out = x.clone();
            Zip::from(&mut out).and(y).for_each(|o, &yv| *o = a * *o + b * yv);
            out
        };
        Ok(Self {
            grid: self.grid.clone(),
            class: self.class,
            values: mix(&self.values, &other.values),
            coeffs: match (&self.coeffs, &other.coeffs) {
                (Some(x), Some(y)) => Some(mix(x, y)),
                _ => None,
            },
        })
    }

    /// Applies `f` to the native nodal values and re-expands in the same class.
    pub fn map_nodal(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_nodal(self.grid.clone(), self.class, self.values.mapv(f))
    }

    /// Mean value `|Ω|⁻¹∫f`.
    pub fn mean(&self) -> T {
        let g = &self.grid;
        match (&self.class, &self.coeffs) {
            (BoundaryClass::NeumannCosine, Some(c)) => c[[0, 0, 0]],
            (BoundaryClass::DirichletSine, Some(c)) => {
                // ∫₀ᴸ sin(kπx/L) = 2L/(kπ) for odd k, 0 for even k.
                let axis_int = |ax: usize, idx: usize| {
                    let k = idx + 1;
                    if k % 2 == 1 {
                        T::lit(2.0) * g.axis(ax).length / (T::PI() * T::from_usize_lossy(k))
                    } else {
                        T::zero()
                    }
                };
                let mut acc = T::zero();
                for ((i, j, k), &ck) in c.indexed_iter() {
                    acc += ck * axis_int(0, i) * axis_int(1, j) * axis_int(2, k);
                }
                acc / g.volume()
            }
            _ => self.values.sum() * g.quad_weight() / g.volume(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Spectral coefficients of a field.
pub fn to_spectral<T: Real>(f: &ScalarField<T>) -> Result<Array3<T>> {
    f.coefficients().cloned()
}

/// Inverse of [`to_spectral`].
pub fn to_nodal<T: Real>(
    c: Array3<T>,
    class: BoundaryClass,
    grid: Arc<Grid<T>>,
) -> Result<ScalarField<T>> {
    ScalarField::from_coefficients(grid, class, c)
}

/// Dealiased projection onto a spectral class: the padded-grid values are
/// integrated against each basis function and truncated to the native modes.
pub fn project<T: Real>(f: &ScalarField<T>, class: BoundaryClass) -> Result<ScalarField<T>> {
    if f.class == class {
        return Ok(f.clone());
    }
    let v = f.quad_values();
    let g = f.grid.clone();
    let c = match class {
        BoundaryClass::DirichletSine => g.quad_to_sine(&v),
        BoundaryClass::NeumannCosine => g.quad_to_cosine(&v),
        BoundaryClass::Nodal => return nodal(f),
    };
    ScalarField::from_coefficients(g, class, c)
}

/// The field as point values on the padded quadrature grid.
pub fn nodal<T: Real>(f: &ScalarField<T>) -> Result<ScalarField<T>> {
    ScalarField::from_nodal(f.grid.clone(), BoundaryClass::Nodal, f.quad_values())
}

fn check_pair<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Result<()> {
    if f.is_same_grid(g) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `∫_Ω f g`.
pub fn inner_l2<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Result<T> {
    check_pair(f, g)?;
    if f.class == g.class && f.class.is_spectral() {
        let mass = match f.class {
            BoundaryClass::DirichletSine => f.grid.sine_mass(),
            _ => f.grid.cosine_mass(),
        };
        let (a, b) = (f.coefficients()?, g.coefficients()?);
        let mut acc = T::zero();
        Zip::from(a).and(b).and(mass).for_each(|&x, &y, &w| acc += x * y * w);
        return Ok(acc);
    }
    let (a, b) = (f.quad_values(), g.quad_values());
    let mut acc = T::zero();
    Zip::from(&a).and(&b).for_each(|&x, &y| acc += x * y);
    Ok(acc * f.grid.quad_weight())
}

pub fn norm_l2<T: Real>(f: &ScalarField<T>) -> T {
    inner_l2(f, f).expect("same grid").max(T::zero()).sqrt()
}

/// `(∫|f|ᵖ)^{1/p}` on the padded quadrature grid.
pub fn norm_lp<T: Real>(f: &ScalarField<T>, p: T) -> T {
    let w = f.grid.quad_weight();
    let s = f.quad_values().iter().fold(T::zero(), |acc, v| acc + v.abs().powf(p));
    (s * w).powf(T::one() / p)
}

fn spectral_parts<T: Real>(f: &ScalarField<T>) -> Result<(&Array3<T>, &Array3<T>, &Array3<T>)> {
    let g = &f.grid;
    match f.class {
        BoundaryClass::DirichletSine => Ok((f.coefficients()?, g.sine_eigen(), g.sine_mass())),
        BoundaryClass::NeumannCosine => Ok((f.coefficients()?, g.cosine_eigen(), g.cosine_mass())),
        BoundaryClass::Nodal => Err(Error::UnsupportedClass(f.class)),
    }
}

/// `(∫|∇u|²)^{1/2}`, exact for the spectral classes.
pub fn norm_h10<T: Real>(u: &ScalarField<T>) -> Result<T> {
    let (c, lam, mass) = spectral_parts(u)?;
    let mut acc = T::zero();
    Zip::from(c).and(lam).and(mass).for_each(|&ck, &l, &w| acc += l * ck * ck * w);
    Ok(acc.sqrt())
}

/// `(∫|∇φ|² + a²∫|Δφ|²)^{1/2}`.
pub fn energy_norm<T: Real>(phi: &ScalarField<T>, a: T) -> Result<T> {
    let (c, lam, mass) = spectral_parts(phi)?;
    let a2 = a * a;
    let mut acc = T::zero();
    Zip::from(c)
        .and(lam)
        .and(mass)
        .for_each(|&ck, &l, &w| acc += (l + a2 * l * l) * ck * ck * w);
    Ok(acc.sqrt())
}

/// `(∫|Δφ|² + ∫|∇φ|²)^{1/2}`.
pub fn norm_bih<T: Real>(phi: &ScalarField<T>) -> Result<T> {
    energy_norm(phi, T::one())
}

/// Pointwise product on the padded grid, returned as a nodal field.
pub fn multiply_dealiased<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_pair(f, g)?;
    let mut a = f.quad_values();
    let b = g.quad_values();
    Zip::from(&mut a).and(&b).for_each(|x, &y| *x = *x * y);
    ScalarField::from_nodal(f.grid.clone(), BoundaryClass::Nodal, a)
}
