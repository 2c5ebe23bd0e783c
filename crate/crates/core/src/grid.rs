//! Box domains, tensor-product node sets and the per-axis transform matrices.
//!
//! Fields of the `DirichletSine` class are expanded in `sin(kπx/L)`,
//! `k = 1..n-1`, and sampled at the interior nodes `x_j = jL/n`. Fields of the
//! `NeumannCosine` class are expanded in `cos(kπx/L)`, `k = 0..n-1`, and sampled
//! at the cell centres `x_j = (j+1/2)L/n`. On either node set the equispaced
//! rule integrates every product of two basis functions of the class exactly.
//!
//! Nonlinear terms are evaluated on a padded cell-centred grid of
//! `m = ceil(3n/2)` points per axis. That rule integrates trigonometric
//! integrands of degree below `2m` exactly, so triple products of basis
//! functions are free of aliasing.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The box `(0,L₁)×(0,L₂)×(0,L₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain<T> {
    lengths: [T; 3],
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lengths: [T; 3]) -> Result<Self> {
        if lengths.iter().any(|l| !l.is_finite() || *l <= T::zero()) {
            return Err(Error::InvalidDomain(format!(
                "edge lengths must be positive and finite, got {:?}",
                lengths
            )));
        }
        Ok(Self { lengths })
    }

    pub fn unit_cube() -> Self {
        Self {
            lengths: [T::one(); 3],
        }
    }

    pub fn lengths(&self) -> [T; 3] {
        self.lengths
    }

    pub fn volume(&self) -> T {
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }
}

/// Transform matrices and node sets for one coordinate axis.
#[derive(Debug, Clone)]
pub struct AxisOps<T> {
    pub length: T,
    /// Interior nodes `jL/n`, `j = 1..n-1`.
    pub sine_nodes: Array1<T>,
    /// Cell centres `(j+1/2)L/n`, `j = 0..n-1`.
    pub cosine_nodes: Array1<T>,
    /// Padded cell centres `(j+1/2)L/m`, `j = 0..m-1`.
    pub quad_nodes: Array1<T>,
    /// `(kπ/L)²` for the sine modes `k = 1..n-1`.
    pub sine_eigen: Array1<T>,
    /// `(kπ/L)²` for the cosine modes `k = 0..n-1`.
    pub cosine_eigen: Array1<T>,
    /// `∫₀ᴸ ψ_k²` for the sine modes.
    pub sine_mass: Array1<T>,
    /// `∫₀ᴸ ψ_k²` for the cosine modes.
    pub cosine_mass: Array1<T>,
    pub(crate) sine_synth: Array2<T>,
    pub(crate) sine_anal: Array2<T>,
    pub(crate) cosine_synth: Array2<T>,
    pub(crate) cosine_anal: Array2<T>,
    pub(crate) sine_eval: Array2<T>,
    pub(crate) sine_proj: Array2<T>,
    pub(crate) cosine_eval: Array2<T>,
    pub(crate) cosine_proj: Array2<T>,
}

impl<T: Real> AxisOps<T> {
    fn new(length: T, n: usize, m: usize) -> Self {
        let pi = T::PI();
        let nt = T::from_usize_lossy(n);
        let mt = T::from_usize_lossy(m);
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let ns = n - 1;

        let sine_nodes = Array1::from_shape_fn(ns, |j| length * T::from_usize_lossy(j + 1) / nt);
        let cosine_nodes =
            Array1::from_shape_fn(n, |j| length * (T::from_usize_lossy(j) + half) / nt);
        let quad_nodes = Array1::from_shape_fn(m, |j| length * (T::from_usize_lossy(j) + half) / mt);

        let sine_wave = |k: usize| pi * T::from_usize_lossy(k + 1) / length;
        let cosine_wave = |k: usize| pi * T::from_usize_lossy(k) / length;
        let sine_eigen = Array1::from_shape_fn(ns, |k| sine_wave(k).powi(2));
        let cosine_eigen = Array1::from_shape_fn(n, |k| cosine_wave(k).powi(2));
        let sine_mass = Array1::from_elem(ns, length * half);
        let cosine_mass = Array1::from_shape_fn(n, |k| if k == 0 { length } else { length * half });
        let eps = |k: usize| if k == 0 { T::one() } else { two };

        let sine_synth = Array2::from_shape_fn((ns, ns), |(j, k)| (sine_wave(k) * sine_nodes[j]).sin());
        let sine_anal = Array2::from_shape_fn((ns, ns), |(k, j)| two / nt * sine_synth[[j, k]]);
        let cosine_synth =
            Array2::from_shape_fn((n, n), |(j, k)| (cosine_wave(k) * cosine_nodes[j]).cos());
        let cosine_anal = Array2::from_shape_fn((n, n), |(k, j)| eps(k) / nt * cosine_synth[[j, k]]);
        let sine_eval = Array2::from_shape_fn((m, ns), |(j, k)| (sine_wave(k) * quad_nodes[j]).sin());
        let sine_proj = Array2::from_shape_fn((ns, m), |(k, j)| two / mt * sine_eval[[j, k]]);
        let cosine_eval =
            Array2::from_shape_fn((m, n), |(j, k)| (cosine_wave(k) * quad_nodes[j]).cos());
        let cosine_proj = Array2::from_shape_fn((n, m), |(k, j)| eps(k) / mt * cosine_eval[[j, k]]);

        Self {
            length,
            sine_nodes,
            cosine_nodes,
            quad_nodes,
            sine_eigen,
            cosine_eigen,
            sine_mass,
            cosine_mass,
            sine_synth,
            sine_anal,
            cosine_synth,
            cosine_anal,
            sine_eval,
            sine_proj,
            cosine_eval,
            cosine_proj,
        }
    }
}

/// Tensor-product grid with the same number of nodes per axis.
#[derive(Debug, Clone)]
pub struct Grid<T> {
    domain: BoxDomain<T>,
    n: usize,
    m: usize,
    axes: [AxisOps<T>; 3],
    sine_eigen: Array3<T>,
    cosine_eigen: Array3<T>,
    sine_mass: Array3<T>,
    cosine_mass: Array3<T>,
}

/// Builds a grid with `n` subdivisions per axis.
pub fn make_grid<T: Real>(domain: BoxDomain<T>, n: usize) -> Result<Arc<Grid<T>>> {
    Grid::new(domain, n)
}

impl<T: Real> Grid<T> {
    pub fn new(domain: BoxDomain<T>, n: usize) -> Result<Arc<Self>> {
        if n < 4 {
            return Err(Error::InvalidResolution(n));
        }
        let m = (3 * n).div_ceil(2);
        let l = domain.lengths();
        let axes = [
            AxisOps::new(l[0], n, m),
            AxisOps::new(l[1], n, m),
            AxisOps::new(l[2], n, m),
        ];
        let ns = n - 1;
        let sine_eigen = Array3::from_shape_fn((ns, ns, ns), |(i, j, k)| {
            axes[0].sine_eigen[i] + axes[1].sine_eigen[j] + axes[2].sine_eigen[k]
        });
        let cosine_eigen = Array3::from_shape_fn((n, n, n), |(i, j, k)| {
            axes[0].cosine_eigen[i] + axes[1].cosine_eigen[j] + axes[2].cosine_eigen[k]
        });
        let sine_mass = Array3::from_shape_fn((ns, ns, ns), |(i, j, k)| {
            axes[0].sine_mass[i] * axes[1].sine_mass[j] * axes[2].sine_mass[k]
        });
        let cosine_mass = Array3::from_shape_fn((n, n, n), |(i, j, k)| {
            axes[0].cosine_mass[i] * axes[1].cosine_mass[j] * axes[2].cosine_mass[k]
        });
        Ok(Arc::new(Self {
            domain,
            n,
            m,
            axes,
            sine_eigen,
            cosine_eigen,
            sine_mass,
            cosine_mass,
        }))
    }

    pub fn domain(&self) -> &BoxDomain<T> {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Points per axis of the padded quadrature grid.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn volume(&self) -> T {
        self.domain.volume()
    }

    pub fn axis(&self, i: usize) -> &AxisOps<T> {
        &self.axes[i]
    }

    pub fn sine_shape(&self) -> [usize; 3] {
        [self.n - 1; 3]
    }

    pub fn cosine_shape(&self) -> [usize; 3] {
        [self.n; 3]
    }

    pub fn quad_shape(&self) -> [usize; 3] {
        [self.m; 3]
    }

    /// Eigenvalues of `−Δ` on the sine modes, indexed like the coefficients.
    pub fn sine_eigen(&self) -> &Array3<T> {
        &self.sine_eigen
    }

    pub fn cosine_eigen(&self) -> &Array3<T> {
        &self.cosine_eigen
    }

    /// `∫_Ω ψ_k²` for each sine mode.
    pub fn sine_mass(&self) -> &Array3<T> {
        &self.sine_mass
    }

    pub fn cosine_mass(&self) -> &Array3<T> {
        &self.cosine_mass
    }

    /// Weight of one node of the native sine/cosine rule.
    pub fn native_weight(&self) -> T {
        let nt = T::from_usize_lossy(self.n);
        self.volume() / (nt * nt * nt)
    }

    /// Weight of one node of the padded quadrature rule.
    pub fn quad_weight(&self) -> T {
        let mt = T::from_usize_lossy(self.m);
        self.volume() / (mt * mt * mt)
    }

    /// Same lengths and resolution.
    pub fn same_as(&self, other: &Grid<T>) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.domain == other.domain)
    }

    pub(crate) fn sine_to_quad(&self, c: &Array3<T>) -> Array3<T> {
        apply3(c, [&self.axes[0].sine_eval, &self.axes[1].sine_eval, &self.axes[2].sine_eval])
    }

    pub(crate) fn cosine_to_quad(&self, c: &Array3<T>) -> Array3<T> {
        apply3(
            c,
            [&self.axes[0].cosine_eval, &self.axes[1].cosine_eval, &self.axes[2].cosine_eval],
        )
    }

    pub(crate) fn quad_to_sine(&self, v: &Array3<T>) -> Array3<T> {
        apply3(v, [&self.axes[0].sine_proj, &self.axes[1].sine_proj, &self.axes[2].sine_proj])
    }

    pub(crate) fn quad_to_cosine(&self, v: &Array3<T>) -> Array3<T> {
        apply3(
            v,
            [&self.axes[0].cosine_proj, &self.axes[1].cosine_proj, &self.axes[2].cosine_proj],
        )
    }

    pub(crate) fn sine_synthesis(&self, c: &Array3<T>) -> Array3<T> {
        apply3(c, [&self.axes[0].sine_synth, &self.axes[1].sine_synth, &self.axes[2].sine_synth])
    }

    pub(crate) fn sine_analysis(&self, v: &Array3<T>) -> Array3<T> {
        apply3(v, [&self.axes[0].sine_anal, &self.axes[1].sine_anal, &self.axes[2].sine_anal])
    }

    pub(crate) fn cosine_synthesis(&self, c: &Array3<T>) -> Array3<T> {
        apply3(
            c,
            [&self.axes[0].cosine_synth, &self.axes[1].cosine_synth, &self.axes[2].cosine_synth],
        )
    }

    pub(crate) fn cosine_analysis(&self, v: &Array3<T>) -> Array3<T> {
        apply3(
            v,
            [&self.axes[0].cosine_anal, &self.axes[1].cosine_anal, &self.axes[2].cosine_anal],
        )
    }
}

/// Contracts `a` with one matrix per axis: `out[i',j',k'] = Σ m0[i',i] m1[j',j] m2[k',k] a[i,j,k]`.
pub(crate) fn apply3<T: Real>(a: &Array3<T>, mats: [&Array2<T>; 3]) -> Array3<T> {
    let a = apply_axis(a, mats[0], 0);
    let a = apply_axis(&a, mats[1], 1);
    apply_axis(&a, mats[2], 2)
}

/// Applies `mat` (shape `(out, in)`) along one axis of a 3-D array.
pub(crate) fn apply_axis<T: Real>(a: &Array3<T>, mat: &Array2<T>, axis: usize) -> Array3<T> {
    let (d0, d1, d2) = a.dim();
    let rows = mat.nrows();
    assert_eq!(mat.ncols(), a.len_of(Axis(axis)), "transform size mismatch");
    let a = a.as_standard_layout();
    match axis {
        0 => {
            let flat = a.view().into_shape_with_order((d0, d1 * d2)).expect("contiguous");
            mat.dot(&flat)
                .into_shape_with_order((rows, d1, d2))
                .expect("contiguous product")
        }
        1 => {
            let mut out = Array3::zeros((d0, rows, d2));
            for i in 0..d0 {
                out.slice_mut(s![i, .., ..]).assign(&mat.dot(&a.slice(s![i, .., ..])));
            }
            out
        }
        2 => {
            let flat = a.view().into_shape_with_order((d0 * d1, d2)).expect("contiguous");
            flat.dot(&mat.t())
                .into_shape_with_order((d0, d1, rows))
                .expect("contiguous product")
        }
        _ => panic!("axis {axis} out of range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_node_counts() {
        let g = make_grid(BoxDomain::<f64>::unit_cube(), 8).unwrap();
        assert_eq!(g.sine_shape(), [7, 7, 7]);
        assert_eq!(g.cosine_shape(), [8, 8, 8]);
        assert_eq!(g.quad_shape(), [12, 12, 12]);
        assert_eq!(g.axis(0).sine_nodes.len() * g.axis(1).sine_nodes.len() * g.axis(2).sine_nodes.len(), 343);
        assert_eq!(g.axis(0).cosine_nodes.len().pow(3), 512);
    }

    #[test]
    fn anisotropic_volume() {
        let d = BoxDomain::new([1.0, 2.0, 1.0]).unwrap();
        let g = make_grid(d, 16).unwrap();
        assert_eq!(g.volume(), 2.0);
    }

    #[test]
    fn too_coarse_is_rejected() {
        let err = make_grid(BoxDomain::<f64>::unit_cube(), 2).unwrap_err();
        assert_eq!(err, Error::InvalidResolution(2));
    }

    #[test]
    fn bad_lengths_are_rejected() {
        assert!(BoxDomain::new([1.0, 0.0, 1.0]).is_err());
        assert!(BoxDomain::new([1.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn analysis_inverts_synthesis_per_axis() {
        let g = make_grid(BoxDomain::<f64>::new([1.0, 1.5, 0.7]).unwrap(), 9).unwrap();
        for ax in 0..3 {
            let a = g.axis(ax);
            let id = a.sine_anal.dot(&a.sine_synth);
            let idc = a.cosine_anal.dot(&a.cosine_synth);
            let pr = a.sine_proj.dot(&a.sine_eval);
            let prc = a.cosine_proj.dot(&a.cosine_eval);
            for (mat, dim) in [(&id, 8), (&idc, 9), (&pr, 8), (&prc, 9)] {
                for i in 0..dim {
                    for j in 0..dim {
                        let e = if i == j { 1.0 } else { 0.0 };
                        assert!((mat[[i, j]] - e).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn apply_axis_matches_direct_sum() {
        let a = Array3::from_shape_fn((3, 4, 5), |(i, j, k)| (i * 20 + j * 5 + k) as f64 * 0.1);
        let m = Array2::from_shape_fn((2, 4), |(r, c)| (r + 2 * c) as f64 - 1.5);
        let out = apply_axis(&a, &m, 1);
        assert_eq!(out.dim(), (3, 2, 5));
        for i in 0..3 {
            for r in 0..2 {
                for k in 0..5 {
                    let direct: f64 = (0..4).map(|j| m[[r, j]] * a[[i, j, k]]).sum();
                    assert!((out[[i, r, k]] - direct).abs() < 1e-12);
                }
            }
        }
    }
}
