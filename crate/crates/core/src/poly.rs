//! Dense 1-D polynomials and sums of separable 3-D polynomial products.

use ndarray::{Array1, Array3};

use crate::scalar::Real;

/// `Σ cₖ xᵏ`, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    /// `c·xᵏ`.
    pub fn monomial(c: T, k: usize) -> Self {
        let mut v = vec![T::zero(); k + 1];
        v[k] = c;
        Self::new(v)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| *c == T::zero()) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * T::from_usize_lossy(k))
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Self {
        let mut v = vec![T::zero()];
        v.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / T::from_usize_lossy(k + 1)),
        );
        Self::new(v)
    }

    pub fn integrate(&self, a: T, b: T) -> T {
        let p = self.antiderivative();
        p.eval(b) - p.eval(a)
    }

    pub fn scale(&self, t: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * t).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[T], i: usize| v.get(i).copied().unwrap_or(T::zero());
        Self::new((0..n).map(|i| get(&self.coeffs, i) + get(&other.coeffs, i)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut v = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Self::new(v)
    }

    /// `p(x/L)` expressed in `x`.
    pub fn rescaled(&self, length: T) -> Self {
        let mut f = T::one();
        let mut v = Vec::with_capacity(self.coeffs.len());
        for &c in &self.coeffs {
            v.push(c / f);
            f *= length;
        }
        Self::new(v)
    }
}

/// `Π_d p_d(x_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SepTerm<T> {
    pub factors: [Poly<T>; 3],
}

impl<T: Real> SepTerm<T> {
    pub fn new(px: Poly<T>, py: Poly<T>, pz: Poly<T>) -> Self {
        Self {
            factors: [px, py, pz],
        }
    }

    pub fn eval(&self, p: [T; 3]) -> T {
        self.factors[0].eval(p[0]) * self.factors[1].eval(p[1]) * self.factors[2].eval(p[2])
    }

    fn with_factor(&self, axis: usize, f: Poly<T>) -> Self {
        let mut t = self.clone();
        t.factors[axis] = f;
        t
    }

    fn is_zero(&self) -> bool {
        self.factors.iter().any(|f| f.is_zero())
    }
}

/// A finite sum of [`SepTerm`]s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SepPoly<T> {
    pub terms: Vec<SepTerm<T>>,
}

impl<T: Real> SepPoly<T> {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn from_term(t: SepTerm<T>) -> Self {
        let mut s = Self::zero();
        s.push(t);
        s
    }

    pub fn push(&mut self, t: SepTerm<T>) {
        if !t.is_zero() {
            self.terms.push(t);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, p: [T; 3]) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| acc + t.eval(p))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut s = self.clone();
        for t in &other.terms {
            s.push(t.clone());
        }
        s
    }

    pub fn scale(&self, c: T) -> Self {
        let mut s = Self::zero();
        for t in &self.terms {
            s.push(t.with_factor(0, t.factors[0].scale(c)));
        }
        s
    }

    pub fn partial(&self, axis: usize) -> Self {
        let mut s = Self::zero();
        for t in &self.terms {
            s.push(t.with_factor(axis, t.factors[axis].derivative()));
        }
        s
    }

    pub fn laplacian(&self) -> Self {
        let mut s = Self::zero();
        for t in &self.terms {
            for axis in 0..3 {
                s.push(t.with_factor(axis, t.factors[axis].nth_derivative(2)));
            }
        }
        s
    }

    /// `−Δf + a²Δ²f`.
    pub fn operator(&self, a: T) -> Self {
        let lap = self.laplacian();
        lap.scale(-T::one()).add(&lap.laplacian().scale(a * a))
    }

    /// Fixes `x_axis = x`, leaving a function constant along that axis.
    pub fn restrict(&self, axis: usize, x: T) -> Self {
        let mut s = Self::zero();
        for t in &self.terms {
            s.push(t.with_factor(axis, Poly::constant(t.factors[axis].eval(x))));
        }
        s
    }

    /// `∫` over the box `Π [0, L_d]`.
    pub fn integrate_box(&self, lengths: [T; 3]) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| {
            acc + (0..3).fold(T::one(), |p, d| p * t.factors[d].integrate(T::zero(), lengths[d]))
        })
    }

    /// Values on the tensor product of three node arrays.
    pub fn eval_tensor(&self, nodes: [&Array1<T>; 3]) -> Array3<T> {
        let shape = (nodes[0].len(), nodes[1].len(), nodes[2].len());
        let mut out = Array3::zeros(shape);
        for t in &self.terms {
            let v: Vec<Vec<T>> = (0..3)
                .map(|d| nodes[d].iter().map(|&x| t.factors[d].eval(x)).collect())
                .collect();
            for ((i, j, k), o) in out.indexed_iter_mut() {
                *o += v[0][i] * v[1][j] * v[2][k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calculus_on_one_dimensional_polynomials() {
        let p = Poly::<f64>::new(vec![1.0, -2.0, 0.0, 3.0]); // 1 − 2x + 3x³
        assert_eq!(p.eval(2.0), 21.0);
        assert_eq!(p.derivative().coeffs(), &[-2.0, 0.0, 9.0]);
        assert_eq!(p.nth_derivative(4), Poly::zero());
        assert!((p.integrate(0.0, 1.0) - (1.0 - 1.0 + 0.75)).abs() < 1e-15);
        let q = p.mul(&Poly::new(vec![0.0, 1.0]));
        assert_eq!(q.eval(2.0), 42.0);
        let r = p.rescaled(2.0);
        assert!((r.eval(3.0) - p.eval(1.5)).abs() < 1e-14);
        assert_eq!(p.add(&p.scale(-1.0)), Poly::zero());
    }

    #[test]
    fn separable_laplacian_of_quadratic() {
        // f = x²y + z², Δf = 2y + 2, Δ²f = 0
        let mut f = SepPoly::<f64>::zero();
        f.push(SepTerm::new(Poly::monomial(1.0, 2), Poly::monomial(1.0, 1), Poly::one()));
        f.push(SepTerm::new(Poly::one(), Poly::one(), Poly::monomial(1.0, 2)));
        let p: [f64; 3] = [0.3, 0.7, 0.2];
        assert!((f.laplacian().eval(p) - (2.0 * 0.7 + 2.0)).abs() < 1e-14);
        assert!(f.laplacian().laplacian().eval(p).abs() < 1e-14);
        assert!((f.operator(2.0).eval(p) + 3.4).abs() < 1e-14);
        assert!((f.partial(0).eval(p) - 2.0 * 0.3 * 0.7).abs() < 1e-14);
        assert!((f.restrict(2, 0.5).eval([0.3, 0.7, 9.0]) - (0.09 * 0.7 + 0.25)).abs() < 1e-14);
        let vol = f.integrate_box([1.0, 2.0, 1.0]);
        assert!((vol - (1.0 / 3.0 * 2.0 + 2.0 / 3.0)).abs() < 1e-14);
    }
}
