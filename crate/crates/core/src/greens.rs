//! Free-space radial kernels of the Maxwell and Bopp–Podolsky potentials.

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::scalar::Real;

/// Below `r < SERIES_CUTOFF·a` the Bopp–Podolsky kernel uses its Taylor series.
pub const SERIES_CUTOFF: f64 = 1e-6;

/// Smallest radius, relative to `a`, accepted by the finite-difference residual.
pub const MIN_RESIDUAL_RADIUS: f64 = 1e-3;

fn four_pi<T: Real>() -> T {
    T::lit(4.0) * T::PI()
}

fn check_a<T: Real>(a: T) -> Result<()> {
    if a > T::zero() && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("a must be positive, got {a}")))
    }
}

/// `1/(4πr)`.
pub fn coulomb<T: Real>(r: T) -> Result<T> {
    if r <= T::zero() {
        return Err(Error::SingularPoint(r.to_f64_lossy()));
    }
    Ok(T::one() / (four_pi::<T>() * r))
}

/// `(1 − e^{−r/a})/(4πr)`, extended continuously by `1/(4πa)` at the origin.
pub fn bp_kernel<T: Real>(r: T, a: T) -> Result<T> {
    check_a(a)?;
    if r < T::zero() {
        return Err(Error::InvalidParameter(format!("negative radius {r}")));
    }
    let x = r / a;
    if x < T::lit(SERIES_CUTOFF) {
        // (1 − e^{−x})/x = 1 − x/2 + x²/6 − x³/24
        let ratio = T::one() - x / T::lit(2.0) + x * x / T::lit(6.0) - x * x * x / T::lit(24.0);
        Ok(ratio / (four_pi::<T>() * a))
    } else {
        Ok(-(-x).exp_m1() / (four_pi::<T>() * r))
    }
}

/// `e^{−r/a}/(4πr)`.
pub fn yukawa<T: Real>(r: T, a: T) -> Result<T> {
    check_a(a)?;
    if r <= T::zero() {
        return Err(Error::SingularPoint(r.to_f64_lossy()));
    }
    Ok((-r / a).exp() / (four_pi::<T>() * r))
}

/// Radial kernels whose energies can be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Coulomb,
    Yukawa,
    BoppPodolsky,
    Zero,
}

/// `1 − e^{−x}(1 + x)`, accurate for small `x`.
fn one_minus_exp_poly<T: Real>(x: T) -> T {
    if x < T::lit(1e-3) {
        // Σ_{k≥2} (−1)^k (k−1)/k! x^k
        let mut term = x * x / T::lit(2.0);
        let mut acc = term;
        for k in 3..10 {
            let kf = T::from_usize_lossy(k);
            term = -term * x * (kf - T::one()) / ((kf - T::lit(2.0)) * kf);
            acc += term;
        }
        acc
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// Radial derivative `f′(r)` and Laplacian `Δf(r)` away from the origin.
pub fn radial_derivatives<T: Real>(kernel: Kernel, a: T, r: T) -> (T, T) {
    let fp = four_pi::<T>();
    match kernel {
        Kernel::Coulomb => (-T::one() / (fp * r * r), T::zero()),
        Kernel::Yukawa => {
            let x = r / a;
            let e = (-x).exp();
            (-e * (T::one() + x) / (fp * r * r), e / (fp * a * a * r))
        }
        Kernel::BoppPodolsky => {
            let x = r / a;
            (
                -one_minus_exp_poly(x) / (fp * r * r),
                -(-x).exp() / (fp * a * a * r),
            )
        }
        Kernel::Zero => (T::zero(), T::zero()),
    }
}

/// Gradient and Laplacian parts of the energy density times `4πr²`.
fn energy_density<T: Real>(kernel: Kernel, a: T, r: T) -> (T, T) {
    let (d, lap) = radial_derivatives(kernel, a, r);
    let w = four_pi::<T>() * r * r;
    let half = T::lit(0.5);
    (w * half * d * d, w * half * a * a * lap * lap)
}

/// Split energy of a kernel on a shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEnergy<T> {
    /// `½∫|∇f|²`
    pub gradient: T,
    /// `(a²/2)∫|Δf|²`
    pub laplacian: T,
}

impl<T: Real> RadialEnergy<T> {
    pub fn total(&self) -> T {
        self.gradient + self.laplacian
    }
}

fn check_shell<T: Real>(eps: T, r_max: T) -> Result<()> {
    if eps > T::zero() && eps < r_max && r_max.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("need 0 < eps < r_max, got {eps}, {r_max}")))
    }
}

fn shell_integral<T: Real>(g: impl Fn(T) -> T, eps: T, r_max: T) -> Result<T> {
    // Log-spaced panels keep each adaptive problem well scaled.
    let panels = ((r_max / eps).ln() / T::LN_2()).ceil().to_usize().unwrap_or(1).clamp(1, 200);
    let ratio = (r_max / eps).powf(T::one() / T::from_usize_lossy(panels));
    let mut lo = eps;
    let mut acc = T::zero();
    let tol = T::lit(1e-14);
    for i in 0..panels {
        let hi = if i + 1 == panels { r_max } else { lo * ratio };
        acc += integrate_adaptive(&g, lo, hi, T::lit(1e-22), tol, 400)?;
        lo = hi;
    }
    Ok(acc)
}

/// Energy of `kernel` on the shell `eps ≤ r ≤ r_max`, split by term.
pub fn radial_energy_parts<T: Real>(kernel: Kernel, a: T, eps: T, r_max: T) -> Result<RadialEnergy<T>> {
    check_a(a)?;
    check_shell(eps, r_max)?;
    if kernel == Kernel::Zero {
        return Ok(RadialEnergy {
            gradient: T::zero(),
            laplacian: T::zero(),
        });
    }
    Ok(RadialEnergy {
        gradient: shell_integral(|r| energy_density(kernel, a, r).0, eps, r_max)?,
        laplacian: shell_integral(|r| energy_density(kernel, a, r).1, eps, r_max)?,
    })
}

/// `½∫|∇f|² + (a²/2)∫|Δf|²` over `eps ≤ r ≤ r_max`.
pub fn radial_energy<T: Real>(kernel: Kernel, a: T, eps: T, r_max: T) -> Result<T> {
    radial_energy_parts(kernel, a, eps, r_max).map(|e| e.total())
}

/// Energy beyond `r_max`, integrated after the substitution `r = r_max/t`.
pub fn radial_energy_tail<T: Real>(kernel: Kernel, a: T, r_max: T) -> Result<RadialEnergy<T>> {
    check_a(a)?;
    if !(r_max > T::zero()) {
        return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
    }
    if kernel == Kernel::Zero {
        return Ok(RadialEnergy {
            gradient: T::zero(),
            laplacian: T::zero(),
        });
    }
    let mapped = |part: usize| {
        move |t: T| {
            let r = r_max / t;
            let (g, l) = energy_density(kernel, a, r);
            let v = if part == 0 { g } else { l };
            if v == T::zero() {
                T::zero()
            } else {
                v * r_max / (t * t)
            }
        }
    };
    let (abs, rel) = (T::lit(1e-30), T::lit(1e-14));
    Ok(RadialEnergy {
        gradient: integrate_adaptive(mapped(0), T::zero(), T::one(), abs, rel, 400)?,
        laplacian: integrate_adaptive(mapped(1), T::zero(), T::one(), abs, rel, 400)?,
    })
}

fn radial_laplacian_fd<T: Real>(f: &impl Fn(T) -> T, r: T, h: T) -> T {
    // (1/r)(r f)″ with a central second difference.
    let g = |s: T| s * f(s);
    (g(r + h) - T::lit(2.0) * g(r) + g(r - h)) / (h * h * r)
}

/// `|−Δf + a²Δ²f|` at radius `r` (the `a²` term dropped for Coulomb),
/// with both Laplacians taken by radial finite differences of step `h`.
pub fn operator_residual<T: Real>(kernel: Kernel, a: T, r: T, h: T) -> Result<T> {
    check_a(a)?;
    if r < T::lit(MIN_RESIDUAL_RADIUS) * a || r - T::lit(2.0) * h <= T::zero() {
        return Err(Error::SingularPoint(r.to_f64_lossy()));
    }
    let profile = move |s: T| match kernel {
        Kernel::Coulomb => coulomb(s).unwrap_or(T::nan()),
        Kernel::Yukawa => yukawa(s, a).unwrap_or(T::nan()),
        Kernel::BoppPodolsky => bp_kernel(s, a).unwrap_or(T::nan()),
        Kernel::Zero => T::zero(),
    };
    let lap = |s: T| radial_laplacian_fd(&profile, s, h);
    let res = match kernel {
        Kernel::Coulomb | Kernel::Zero => -lap(r),
        Kernel::Yukawa => -lap(r) + profile(r) / (a * a),
        Kernel::BoppPodolsky => -lap(r) + a * a * radial_laplacian_fd(&lap, r, h),
    };
    Ok(res.abs())
}

/// Residual of `−Δ𝒦 + a²Δ²𝒦 = 0` for the Bopp–Podolsky kernel at `r > 0`.
pub fn factorization_residual<T: Real>(a: T, r: T, h: T) -> Result<T> {
    operator_residual(Kernel::BoppPodolsky, a, r, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn coulomb_values() {
        assert!((coulomb::<f64>(1.0).unwrap() - 0.079_577_471_545_947_67).abs() < 1e-15);
        assert!((coulomb::<f64>(2.0).unwrap() - 0.5 * coulomb::<f64>(1.0).unwrap()).abs() < 1e-17);
        assert_eq!(coulomb::<f64>(0.0), Err(Error::SingularPoint(0.0)));
    }

    #[test]
    fn bp_kernel_values() {
        assert!((bp_kernel::<f64>(0.0, 1.0).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((bp_kernel::<f64>(1e-9, 1.0).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-9);
        assert!((bp_kernel::<f64>(1.0, 1.0).unwrap() - 0.050_302_555_783_788_09).abs() < 1e-15);
        let far = bp_kernel::<f64>(50.0, 1.0).unwrap();
        let g = coulomb::<f64>(50.0).unwrap();
        // the exact relative gap is yukawa/bp, far below one ulp
        assert!(yukawa::<f64>(50.0, 1.0).unwrap() / far < 1e-20);
        assert!((far - g).abs() <= f64::EPSILON * g);
        assert!(bp_kernel::<f64>(1.0, 0.0).is_err());
    }

    #[test]
    fn series_branch_is_continuous() {
        let a = 0.7;
        let below = bp_kernel::<f64>(0.999_999 * SERIES_CUTOFF * a, a).unwrap();
        let above = bp_kernel::<f64>(1.000_001 * SERIES_CUTOFF * a, a).unwrap();
        // the kernel itself moves by about x/2 relative across the gap
        assert!(below >= above && below - above < 2e-12 * below);
    }

    #[test]
    fn yukawa_values_and_identity() {
        assert!((yukawa::<f64>(1.0, 1.0).unwrap() - 0.029_274_915_762_159_58).abs() < 1e-15);
        for r in [0.1, 1.0, 10.0] {
            let d = coulomb::<f64>(r).unwrap() - yukawa::<f64>(r, 1.0).unwrap() - bp_kernel::<f64>(r, 1.0).unwrap();
            assert!(d.abs() < 1e-14, "r={r}: {d}");
        }
        assert!(yukawa::<f64>(40.0, 1.0).unwrap() / coulomb::<f64>(40.0).unwrap() < 1e-15);
    }

    #[test]
    fn kernel_ordering_on_log_sweep() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let r = 10f64.powf(-6.0 + 8.0 * i as f64 / 199.0);
            let k = bp_kernel::<f64>(r, 1.0).unwrap();
            assert!(k <= prev && k <= 1.0 / (4.0 * PI) && k >= 0.0 && k <= coulomb::<f64>(r).unwrap());
            prev = k;
        }
    }

    #[test]
    fn coulomb_energy_matches_closed_form() {
        // ½∫|∇𝒢|² over the shell = (1/ε − 1/R)/(8π).
        let e = radial_energy::<f64>(Kernel::Coulomb, 1.0, 0.1, 10.0).unwrap();
        let exact = (10.0 - 0.1) / (8.0 * PI);
        assert!((e - exact).abs() < 1e-12 * exact);
        let tail = radial_energy_tail::<f64>(Kernel::Coulomb, 1.0, 10.0).unwrap();
        assert!((tail.gradient - 1.0 / (80.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn zero_kernel_has_zero_energy() {
        assert_eq!(radial_energy::<f64>(Kernel::Zero, 1.0, 0.1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bp_laplacian_matches_fd() {
        let a = 1.3;
        let (d, lap) = radial_derivatives::<f64>(Kernel::BoppPodolsky, a, 0.8);
        let h = 1e-5;
        let fd = (bp_kernel::<f64>(0.8 + h, a).unwrap() - bp_kernel::<f64>(0.8 - h, a).unwrap()) / (2.0 * h);
        assert!((d - fd).abs() < 1e-9);
        let fdl = operator_residual::<f64>(Kernel::Coulomb, a, 0.8, 1e-3).ok();
        assert!(fdl.is_some());
        let lap_fd = {
            let g = |s: f64| s * bp_kernel::<f64>(s, a).unwrap();
            let h = 1e-3;
            (g(0.8 + h) - 2.0 * g(0.8) + g(0.8 - h)) / (h * h * 0.8)
        };
        assert!((lap - lap_fd).abs() < 1e-6);
    }

    #[test]
    fn factorization_residual_is_small_and_second_order() {
        assert!(factorization_residual::<f64>(1.0, 1.0, 1e-3).unwrap() < 1e-4);
        assert!(operator_residual::<f64>(Kernel::Coulomb, 1.0, 1.0, 1e-3).unwrap() < 1e-4);
        let r1 = factorization_residual::<f64>(1.0, 1.0, 0.04).unwrap();
        let r2 = factorization_residual::<f64>(1.0, 1.0, 0.02).unwrap();
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
        assert!(matches!(factorization_residual::<f64>(1.0, 1e-4, 1e-5), Err(Error::SingularPoint(_))));
    }
}
