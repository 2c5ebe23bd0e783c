//! The constraint sets `B = {|u|₂ = 1}` and `M = B ∩ {∫q u² = α}`.
//!
//! Both constraints are evaluated with the sine-node rule, on which the `L²`
//! pairing of sine-class fields is exact. Fields with disjoint nodal supports
//! therefore have exactly zero cross terms in both constraints.

use ndarray::Zip;

use crate::charge::ChargeProfile;
use crate::energy::{gram_solve, MANIFOLD_TOL};
use crate::error::{Error, Result};
use crate::field::{inner_l2, norm_l2, BoundaryClass, ScalarField};
use crate::scalar::Real;

/// Default `δ` for the level-set fraction.
pub const LEVEL_SET_DELTA: f64 = 1e-8;

/// Default level-set fraction below which `|q⁻¹(α)|` is treated as zero.
pub const LEVEL_SET_THRESHOLD: f64 = 1e-3;

/// Newton steps allowed in [`retract_m`].
pub const RETRACT_MAX_STEPS: usize = 20;

/// Constraint residual accepted by [`retract_m`].
pub const RETRACT_TOL: f64 = 1e-10;

/// Largest starting residual [`retract_m`] accepts.
pub const RETRACT_BASIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind<T> {
    SphereOnly,
    SphereAndCharge { alpha: T },
}

/// Which constraints apply and how much drift is tolerated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec<T> {
    pub kind: ConstraintKind<T>,
    /// Tolerance on `|u|₂² − 1`.
    pub sphere_tol: T,
    /// Tolerance on `∫q u² − α`.
    pub charge_tol: T,
}

impl<T: Real> ConstraintSpec<T> {
    pub fn sphere() -> Self {
        Self {
            kind: ConstraintKind::SphereOnly,
            sphere_tol: T::lit(1e-10),
            charge_tol: T::lit(1e-8),
        }
    }

    pub fn sphere_and_charge(alpha: T) -> Self {
        Self {
            kind: ConstraintKind::SphereAndCharge { alpha },
            ..Self::sphere()
        }
    }

    pub fn with_tolerances(mut self, sphere_tol: T, charge_tol: T) -> Result<Self> {
        if !(sphere_tol > T::zero() && charge_tol > T::zero()) {
            return Err(Error::InvalidParameter("constraint tolerances must be positive".into()));
        }
        self.sphere_tol = sphere_tol;
        self.charge_tol = charge_tol;
        Ok(self)
    }

    /// `(|u|₂² − 1, ∫q u² − α)`; the second entry is zero for `SphereOnly`.
    pub fn residuals(&self, u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<(T, T)> {
        let c1 = inner_l2(u, u)? - T::one();
        let c2 = match self.kind {
            ConstraintKind::SphereOnly => T::zero(),
            ConstraintKind::SphereAndCharge { alpha } => q.charge_native(u)? - alpha,
        };
        Ok((c1, c2))
    }

    pub fn contains(&self, u: &ScalarField<T>, q: &ChargeProfile<T>) -> Result<bool> {
        let (c1, c2) = self.residuals(u, q)?;
        Ok(c1.abs() <= self.sphere_tol && c2.abs() <= self.charge_tol)
    }
}

fn check_sine<T: Real>(u: &ScalarField<T>) -> Result<()> {
    if u.class() != BoundaryClass::DirichletSine {
        return Err(Error::UnsupportedClass(u.class()));
    }
    Ok(())
}

fn check_unit<T: Real>(u: &ScalarField<T>) -> Result<()> {
    let d = norm_l2(u) - T::one();
    if d.abs() > T::lit(MANIFOLD_TOL) {
        return Err(Error::OffManifold(d.to_f64_lossy()));
    }
    Ok(())
}

/// `u / |u|₂`.
pub fn project_sphere<T: Real>(u: &ScalarField<T>) -> Result<ScalarField<T>> {
    let n = norm_l2(u);
    if !(n > T::zero()) || !n.is_finite() {
        return Err(Error::DegenerateInput("cannot normalise a zero or non-finite field".into()));
    }
    Ok(u.scaled(T::one() / n))
}

/// `g − ⟨g, u⟩u`.
pub fn tangent_project_b<T: Real>(u: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_sine(u)?;
    check_sine(g)?;
    check_unit(u)?;
    let c = inner_l2(g, u)?;
    g.combine(T::one(), u, -c)
}

/// Removes the `span{u, q·u}` component of `g`.
pub fn tangent_project_m<T: Real>(
    u: &ScalarField<T>,
    g: &ScalarField<T>,
    q: &ChargeProfile<T>,
) -> Result<ScalarField<T>> {
    check_sine(u)?;
    check_sine(g)?;
    check_unit(u)?;
    let w = q.times_native(u)?;
    let uu = inner_l2(u, u)?;
    let uw = inner_l2(u, &w)?;
    let ww = inner_l2(&w, &w)?;
    let x = gram_solve([[uu, uw], [uw, ww]], [inner_l2(g, u)?, inner_l2(g, &w)?])?;
    g.combine(T::one(), u, -x[0])?.combine(T::one(), &w, -x[1])
}

/// Newton iteration restoring `|u|₂ = 1` and `∫q u² = α` with corrections in `span{u, q·u}`.
pub fn retract_m<T: Real>(u: &ScalarField<T>, alpha: T, q: &ChargeProfile<T>) -> Result<ScalarField<T>> {
    check_sine(u)?;
    let cons = ConstraintSpec::sphere_and_charge(alpha);
    let tol = T::lit(RETRACT_TOL);
    // Stop once both residuals are at roundoff; RETRACT_TOL is the acceptance bound.
    let target = T::lit(1e-14);
    let mut v = u.clone();
    let (mut c1, mut c2) = cons.residuals(&v, q)?;
    let start = c1.abs().max(c2.abs());
    if !(start < T::lit(RETRACT_BASIN)) {
        return Err(Error::RetractionFailure(start.to_f64_lossy()));
    }
    if start <= target {
        return Ok(v);
    }
    for _ in 0..RETRACT_MAX_STEPS {
        let w = q.times_native(&v)?;
        let uu = inner_l2(&v, &v)?;
        let uw = inner_l2(&v, &w)?;
        let ww = inner_l2(&w, &w)?;
        let two = T::lit(2.0);
        let x = gram_solve([[two * uu, two * uw], [two * uw, two * ww]], [-c1, -c2])?;
        v = v.combine(T::one() + x[0], &w, x[1])?;
        (c1, c2) = cons.residuals(&v, q)?;
        if c1.abs().max(c2.abs()) <= target {
            return Ok(v);
        }
    }
    let r = c1.abs().max(c2.abs());
    if r <= tol {
        Ok(v)
    } else {
        Err(Error::RetractionFailure(r.to_f64_lossy()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    BoundaryCase,
}

/// Outcome of the range test `q_min ≤ α ≤ q_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport<T> {
    pub verdict: Verdict,
    pub alpha: T,
    pub q_min: T,
    pub q_max: T,
    /// Fraction of sine nodes with `|q − α| < δ`.
    pub level_set_fraction: T,
    pub delta: T,
    /// `true` when the level-set fraction falls below the threshold, taken to
    /// mean `|q⁻¹(α)| = 0`. At an extremum this leaves `M` empty.
    pub null_level_set: bool,
}

impl<T: Real> FeasibilityReport<T> {
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

/// [`validate_alpha_with`] at the default `δ` and threshold.
pub fn validate_alpha<T: Real>(q: &ChargeProfile<T>, alpha: T) -> FeasibilityReport<T> {
    validate_alpha_with(q, alpha, T::lit(LEVEL_SET_DELTA), T::lit(LEVEL_SET_THRESHOLD))
}

pub fn validate_alpha_with<T: Real>(q: &ChargeProfile<T>, alpha: T, delta: T, threshold: T) -> FeasibilityReport<T> {
    let (lo, hi) = (q.q_min(), q.q_max());
    let fraction = q.level_set_fraction(alpha, delta);
    let at_extremum = (alpha - lo).abs() < delta || (alpha - hi).abs() < delta;
    let verdict = if at_extremum {
        Verdict::BoundaryCase
    } else if alpha < lo || alpha > hi || !alpha.is_finite() {
        Verdict::Infeasible
    } else {
        Verdict::Feasible
    };
    FeasibilityReport {
        verdict,
        alpha,
        q_min: lo,
        q_max: hi,
        level_set_fraction: fraction,
        delta,
        null_level_set: fraction < threshold,
    }
}

/// Coefficients `(s, t)` with `s² + t² = 1` and `s²β_Y + t²β_Z = α`.
pub fn mix_weights<T: Real>(beta_y: T, beta_z: T, alpha: T) -> Result<(T, T)> {
    if !(beta_y < alpha && alpha < beta_z) {
        return Err(Error::LocalizationFailure(format!(
            "alpha = {alpha} not inside (beta_Y, beta_Z) = ({beta_y}, {beta_z})"
        )));
    }
    let t2 = (alpha - beta_y) / (beta_z - beta_y);
    Ok(((T::one() - t2).sqrt(), t2.sqrt()))
}

#[derive(Debug, Clone, Copy)]
struct Ball<T> {
    centre: [usize; 3],
    radius: T,
}

/// Node indices and coordinates of the sine grid.
fn sine_coords<T: Real>(q: &ChargeProfile<T>) -> [Vec<T>; 3] {
    let g = q.grid();
    [0, 1, 2].map(|d| g.axis(d).sine_nodes.to_vec())
}

fn ball_nodes<T: Real>(coords: &[Vec<T>; 3], ball: &Ball<T>, mut f: impl FnMut([usize; 3], T)) {
    let c = [0, 1, 2].map(|d| coords[d][ball.centre[d]]);
    let r2max = ball.radius * ball.radius;
    for (i, &x) in coords[0].iter().enumerate() {
        let dx = (x - c[0]).powi(2);
        if dx >= r2max {
            continue;
        }
        for (j, &y) in coords[1].iter().enumerate() {
            let dy = dx + (y - c[1]).powi(2);
            if dy >= r2max {
                continue;
            }
            for (k, &z) in coords[2].iter().enumerate() {
                let r2 = dy + (z - c[2]).powi(2);
                if r2 < r2max {
                    f([i, j, k], r2 / r2max);
                }
            }
        }
    }
}

/// The unit-norm bump `(1 − r²/R²)³` on `ball`.
fn bump<T: Real>(q: &ChargeProfile<T>, coords: &[Vec<T>; 3], ball: &Ball<T>) -> Result<ScalarField<T>> {
    let g = q.grid();
    let mut v = ndarray::Array3::zeros(g.sine_shape());
    ball_nodes(coords, ball, |idx, s| v[idx] = (T::one() - s).powi(3));
    let f = ScalarField::from_nodal(g.clone(), BoundaryClass::DirichletSine, v)?;
    project_sphere(&f)
}

/// Greedy placement of `k` balls of `radius` in each of `{q < α}` and `{q > α}`.
fn place_balls<T: Real>(
    q: &ChargeProfile<T>,
    coords: &[Vec<T>; 3],
    alpha: T,
    radius: T,
    k: usize,
) -> Option<(Vec<Ball<T>>, Vec<Ball<T>>)> {
    let lengths = q.grid().domain().lengths();
    let qs = q.sine_values();
    let mut candidates: Vec<([usize; 3], T)> = Vec::new();
    Zip::indexed(qs).for_each(|(i, j, l), &v| {
        let idx = [i, j, l];
        let inside = (0..3).all(|d| {
            let x = coords[d][idx[d]];
            x >= radius && lengths[d] - x >= radius
        });
        if inside && v != alpha {
            candidates.push((idx, v - alpha));
        }
    });
    // Largest |q − α| first; index order breaks ties deterministically.
    candidates.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));

    let mut chosen: Vec<Ball<T>> = Vec::new();
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    let dist2 = |a: [usize; 3], b: [usize; 3]| {
        (0..3).fold(T::zero(), |s, d| s + (coords[d][a[d]] - coords[d][b[d]]).powi(2))
    };
    for (idx, sign) in candidates {
        let side = if sign < T::zero() { &mut neg } else { &mut pos };
        if side.len() == k {
            continue;
        }
        let ball = Ball { centre: idx, radius };
        let sep = T::lit(4.0) * radius * radius;
        if chosen.iter().any(|b| dist2(b.centre, idx) < sep) {
            continue;
        }
        let mut uniform = true;
        ball_nodes(coords, &ball, |n, _| {
            if (qs[n] - alpha) * sign <= T::zero() {
                uniform = false;
            }
        });
        if !uniform {
            continue;
        }
        chosen.push(ball);
        side.push(ball);
        if neg.len() == k && pos.len() == k {
            return Some((neg, pos));
        }
    }
    None
}

/// `k` members of `M` with pairwise disjoint nodal supports, built from
/// pairs of bumps on balls in `{q < α}` and `{q > α}`.
pub fn feasible_point<T: Real>(q: &ChargeProfile<T>, alpha: T, k: usize) -> Result<Vec<ScalarField<T>>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let report = validate_alpha(q, alpha);
    if !report.is_feasible() {
        return Err(Error::Infeasible {
            alpha: alpha.to_f64_lossy(),
            q_min: report.q_min.to_f64_lossy(),
            q_max: report.q_max.to_f64_lossy(),
        });
    }
    let g = q.grid();
    let coords = sine_coords(q);
    let lengths = g.domain().lengths();
    let h = (0..3).fold(T::zero(), |m, d| m.max(lengths[d] / T::from_usize_lossy(g.n())));
    let lmin = lengths.iter().fold(T::infinity(), |m, &l| m.min(l));
    // Radii from a quarter of the shortest side down to 1.5 node spacings.
    let mut radius = lmin * T::lit(0.25);
    let floor = h * T::lit(1.5);
    while radius >= floor {
        if let Some((neg, pos)) = place_balls(q, &coords, alpha, radius, k) {
            let mut out = Vec::with_capacity(k);
            for (by, bz) in neg.iter().zip(&pos) {
                let fy = bump(q, &coords, by)?;
                let fz = bump(q, &coords, bz)?;
                let (s, t) = mix_weights(q.charge_native(&fy)?, q.charge_native(&fz)?, alpha)?;
                out.push(fy.combine(s, &fz, t)?);
            }
            return Ok(out);
        }
        radius = radius * T::lit(0.85);
    }
    Err(Error::PackingFailure(format!("no room for {} disjoint balls", 2 * k)))
}

/// Checks membership and pairwise disjoint nodal supports; returns the family size,
/// a lower bound for the genus of `M ∩ span(fields)`.
pub fn genus_certificate<T: Real>(
    fields: &[ScalarField<T>],
    q: &ChargeProfile<T>,
    constraint: &ConstraintSpec<T>,
) -> Result<usize> {
    for f in fields {
        if f.class() != BoundaryClass::DirichletSine || !f.grid().same_as(q.grid()) {
            return Err(Error::CertificateFailure("member is not a sine field on the charge grid".into()));
        }
        let (c1, c2) = constraint.residuals(f, q)?;
        if !constraint.contains(f, q)? {
            return Err(Error::CertificateFailure(format!("member off the manifold ({c1}, {c2})")));
        }
    }
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate().skip(i + 1) {
            let overlap = a
                .values()
                .iter()
                .zip(b.values().iter())
                .any(|(&x, &y)| x != T::zero() && y != T::zero());
            if overlap {
                return Err(Error::CertificateFailure(format!("members {i} and {j} overlap")));
            }
        }
    }
    Ok(fields.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, BoxDomain};
    use crate::sampling::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> std::sync::Arc<crate::grid::Grid<f64>> {
        make_grid(BoxDomain::unit_cube(), n).unwrap()
    }

    #[test]
    fn sphere_projection() {
        let g = grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, BoundaryClass::DirichletSine, 4, &mut rng).unwrap();
        let u = project_sphere(&u).unwrap();
        let two = u.scaled(2.0);
        assert!((norm_l2(&two) - 2.0).abs() < 1e-12);
        let back = project_sphere(&two).unwrap();
        let again = project_sphere(&back).unwrap();
        let d = (back.values() - again.values()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d < 1e-12);
        let z = ScalarField::zeros(g, BoundaryClass::DirichletSine);
        assert!(matches!(project_sphere(&z), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn tangent_projections_are_orthogonal() {
        let g = grid(8);
        let q = ChargeProfile::two_well(g.clone(), 1.0, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = project_sphere(&random_field(&g, BoundaryClass::DirichletSine, 4, &mut rng).unwrap()).unwrap();
        let gr = random_field(&g, BoundaryClass::DirichletSine, 6, &mut rng).unwrap();
        let tb = tangent_project_b(&u, &gr).unwrap();
        assert!(inner_l2(&tb, &u).unwrap().abs() < 1e-10);
        assert!(tangent_project_b(&u, &u).unwrap().max_abs() < 1e-12);
        let tm = tangent_project_m(&u, &gr, &q).unwrap();
        let w = q.times_native(&u).unwrap();
        assert!(inner_l2(&tm, &u).unwrap().abs() < 1e-10);
        assert!(inner_l2(&tm, &w).unwrap().abs() < 1e-10);
        let in_span = u.combine(0.3, &w, -1.7).unwrap();
        assert!(tangent_project_m(&u, &in_span, &q).unwrap().max_abs() < 1e-10);
        let c = ChargeProfile::constant(g, 1.0).unwrap();
        assert!(matches!(tangent_project_m(&u, &gr, &c), Err(Error::DegenerateConstraints(_))));
    }

    #[test]
    fn feasibility_verdicts() {
        let g = grid(8);
        let q = ChargeProfile::separable_cosine(g.clone(), 0.0, 1.0, [1, 0, 0]).unwrap();
        assert_eq!(validate_alpha(&q, 2.0).verdict, Verdict::Infeasible);
        assert_eq!(validate_alpha(&q, 0.0).verdict, Verdict::Feasible);
        let one = ChargeProfile::constant(g, 1.0).unwrap();
        let r = validate_alpha(&one, 1.0);
        assert_eq!(r.verdict, Verdict::BoundaryCase);
        assert_eq!(r.level_set_fraction, 1.0);
        assert!(!r.null_level_set);
    }

    #[test]
    fn feasible_family_certifies() {
        let g = grid(16);
        let q = ChargeProfile::two_well(g, 1.0, 0.3).unwrap();
        let fam = feasible_point(&q, 0.0, 3).unwrap();
        assert_eq!(fam.len(), 3);
        let cons = ConstraintSpec::sphere_and_charge(0.0);
        for f in &fam {
            let (c1, c2) = cons.residuals(f, &q).unwrap();
            assert!(c1.abs() < 1e-10 && c2.abs() < 1e-8, "{c1} {c2}");
        }
        assert_eq!(genus_certificate(&fam, &q, &cons).unwrap(), 3);
        assert_eq!(genus_certificate(&fam[..1], &q, &cons).unwrap(), 1);
        let dup = vec![fam[0].clone(), fam[0].clone()];
        assert!(matches!(genus_certificate(&dup, &q, &cons), Err(Error::CertificateFailure(_))));
        // Renormalised combinations of disjoint members stay in M.
        let mix = fam[0].combine(0.6, &fam[1], 0.8).unwrap();
        let (c1, c2) = cons.residuals(&mix, &q).unwrap();
        assert!(c1.abs() < 1e-10 && c2.abs() < 1e-8);
    }

    #[test]
    fn mixing_weights() {
        let (s, t) = mix_weights(-1.0f64, 1.0, 0.0).unwrap();
        assert!((s * s - 0.5).abs() < 1e-15 && (t * t - 0.5).abs() < 1e-15);
        assert!(matches!(mix_weights(0.2f64, 1.0, 0.0), Err(Error::LocalizationFailure(_))));
    }

    #[test]
    fn retraction_recovers_members() {
        let g = grid(16);
        let q = ChargeProfile::two_well(g, 1.0, 0.3).unwrap();
        let u = feasible_point(&q, 0.0, 1).unwrap().remove(0);
        let same = retract_m(&u, 0.0, &q).unwrap();
        assert!((same.values() - u.values()).iter().all(|v| v.abs() < 1e-12));
        let back = retract_m(&u.scaled(1.01), 0.0, &q).unwrap();
        let (c1, c2) = ConstraintSpec::sphere_and_charge(0.0).residuals(&back, &q).unwrap();
        assert!(c1.abs() <= 1e-10 && c2.abs() <= 1e-10);
        let d = (back.values() - u.values()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d < 1e-10, "{d}");
    }
}
