//! Projected-gradient minimization of `J` on `B` and `M`, symmetry-class
//! excited states, the interpolation probe, and solution verification.

use std::sync::Arc;

use ndarray::{Array3, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::charge::ChargeProfile;
use crate::energy::{
    evaluate, lp_power, multiplier_navier_from, multipliers_neumann_from, Case, Evaluation, Multipliers,
    ProblemSpec,
};
use crate::error::{Error, Result};
use crate::field::{inner_l2, multiply_dealiased, norm_h10, norm_l2, project, BoundaryClass, ScalarField};
use crate::grid::Grid;
use crate::manifold::{feasible_point, project_sphere, retract_m, tangent_project_b, tangent_project_m, validate_alpha};
use crate::reduction::{phi_bound_ratio, reduction_identity_residual, Regime};
use crate::sampling::random_field;
use crate::scalar::Real;

/// Tolerance on `q(x) = q(R x)` for a symmetry class.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Steplength rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule<T> {
    /// A constant trial step, still subject to backtracking.
    Fixed(T),
    /// Two-point (Barzilai–Borwein) steplength with backtracking.
    Adaptive,
}

/// Bitmask of axes in which the iterate is odd under `x_d ↦ L_d − x_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Symmetry(pub u8);

impl Symmetry {
    pub const NONE: Symmetry = Symmetry(0);

    pub fn odd_in(axis: usize) -> Self {
        Symmetry(1 << axis)
    }

    pub fn is_none(self) -> bool {
        self.0 & 0b111 == 0
    }

    pub fn is_odd(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    /// `"none"`, `"odd-x"`, `"odd-xz"`, ...
    pub fn name(self) -> String {
        if self.is_none() {
            return "none".into();
        }
        let axes: String = (0..3).filter(|&d| self.is_odd(d)).map(|d| ['x', 'y', 'z'][d]).collect();
        format!("odd-{axes}")
    }

    pub fn from_name(s: &str) -> Option<Self> {
        if s == "none" {
            return Some(Self::NONE);
        }
        let rest = s.strip_prefix("odd-")?;
        let mut bits = 0u8;
        for c in rest.chars() {
            let d = match c {
                'x' => 0,
                'y' => 1,
                'z' => 2,
                _ => return None,
            };
            bits |= 1 << d;
        }
        (bits != 0).then_some(Symmetry(bits))
    }
}

/// Zeroes the sine modes outside the class. Mode `k` along an odd axis
/// must be even, i.e. coefficient index `k − 1` odd.
fn mask_coefficients<T: Real>(sym: Symmetry, c: &mut Array3<T>) {
    if sym.is_none() {
        return;
    }
    Zip::indexed(c).for_each(|(i, j, k), v| {
        let idx = [i, j, k];
        if (0..3).any(|d| sym.is_odd(d) && idx[d] % 2 == 0) {
            *v = T::zero();
        }
    });
}

fn masked<T: Real>(sym: Symmetry, f: &ScalarField<T>) -> Result<ScalarField<T>> {
    if sym.is_none() {
        return Ok(f.clone());
    }
    let mut c = f.coefficients()?.clone();
    mask_coefficients(sym, &mut c);
    ScalarField::from_coefficients(f.grid().clone(), f.class(), c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub tol_grad: T,
    pub max_iter: usize,
    pub step: StepRule<T>,
    /// Backtracking factor in (0, 1).
    pub backtrack: T,
    /// Armijo constant in (0, 1).
    pub armijo: T,
    pub max_backtracks: usize,
    pub seed: u64,
    /// Number of seeds tried by [`multistart`]; `seed, seed + 1, ...`.
    pub multistart: usize,
    pub symmetry: Symmetry,
    /// Replace `u` by `|u|` whenever that does not increase `J`. Ignored in odd classes.
    pub abs_move: bool,
    /// Modes per axis in the random starting field.
    pub init_modes: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol_grad: T::lit(1e-6),
            max_iter: 5000,
            step: StepRule::Adaptive,
            backtrack: T::lit(0.5),
            armijo: T::lit(1e-4),
            max_backtracks: 60,
            seed: 0,
            multistart: 1,
            symmetry: Symmetry::NONE,
            abs_move: true,
            init_modes: 4,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_grad > T::zero()) {
            return Err(Error::InvalidParameter("tol_grad must be positive".into()));
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(Error::InvalidParameter("backtracking factor must lie in (0, 1)".into()));
        }
        if !(self.armijo > T::zero() && self.armijo < T::one()) {
            return Err(Error::InvalidParameter("Armijo constant must lie in (0, 1)".into()));
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > T::zero()) {
                return Err(Error::InvalidParameter("fixed step must be positive".into()));
            }
        }
        if self.init_modes == 0 || self.multistart == 0 {
            return Err(Error::InvalidParameter("init_modes and multistart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub j: T,
    pub grad_norm: T,
    pub omega: T,
    pub mu: Option<T>,
    /// `|u|₂² − 1`
    pub c1: T,
    /// `∫q u² − α` (zero on `B`)
    pub c2: T,
    /// `‖u‖_{H¹}`
    pub h1: T,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub u: ScalarField<T>,
    /// `Φ(u)`.
    pub phi_reduced: ScalarField<T>,
    /// The potential: `Φ(u)` (Navier) or `Φ(u) + χ + μ` on the padded grid (Neumann).
    pub phi: ScalarField<T>,
    pub multipliers: Multipliers<T>,
    pub j: T,
    pub grad_norm: T,
    pub c1: T,
    pub c2: T,
    pub trace: Vec<TraceRow<T>>,
    pub regime: Regime,
    pub status: Status,
    pub iterations: usize,
    pub seed: u64,
    pub symmetry: Symmetry,
}

impl<T: Real> Solution<T> {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

enum Geometry<'a, T> {
    Sphere,
    Charge { q: &'a ChargeProfile<T>, alpha: T },
}

impl<T: Real> Geometry<'_, T> {
    fn tangent(&self, u: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
        match self {
            Geometry::Sphere => tangent_project_b(u, g),
            Geometry::Charge { q, .. } => tangent_project_m(u, g, q),
        }
    }

    fn retract(&self, v: &ScalarField<T>) -> Result<ScalarField<T>> {
        match self {
            Geometry::Sphere => project_sphere(v),
            Geometry::Charge { q, alpha } => retract_m(v, *alpha, q),
        }
    }

    fn residuals(&self, u: &ScalarField<T>) -> Result<(T, T)> {
        let c1 = inner_l2(u, u)? - T::one();
        let c2 = match self {
            Geometry::Sphere => T::zero(),
            Geometry::Charge { q, alpha } => q.charge_native(u)? - *alpha,
        };
        Ok((c1, c2))
    }

    fn multipliers(&self, u: &ScalarField<T>, ev: &Evaluation<T>, spec: &ProblemSpec<T>) -> Result<Multipliers<T>> {
        match self {
            Geometry::Sphere => multiplier_navier_from(u, ev, spec),
            Geometry::Charge { .. } => multipliers_neumann_from(u, &ev.grad, spec),
        }
    }
}

/// Sine-node absolute value, renormalised.
fn abs_nodal<T: Real>(u: &ScalarField<T>) -> Result<Option<ScalarField<T>>> {
    if u.values().iter().all(|&v| v >= T::zero()) {
        return Ok(None);
    }
    let v = u.values().mapv(|x| x.abs());
    let f = ScalarField::from_nodal(u.grid().clone(), BoundaryClass::DirichletSine, v)?;
    Ok(Some(project_sphere(&f)?))
}

fn h1_norm<T: Real>(u: &ScalarField<T>) -> Result<T> {
    let g = norm_h10(u)?;
    Ok((g * g + inner_l2(u, u)?).sqrt())
}

fn descend<T: Real>(
    spec: &ProblemSpec<T>,
    opts: &SolverOptions<T>,
    geo: &Geometry<'_, T>,
    start: ScalarField<T>,
) -> Result<Solution<T>> {
    opts.validate()?;
    let sym = opts.symmetry;
    let use_abs = opts.abs_move && sym.is_none();
    let eval = |u: &ScalarField<T>| -> Result<Evaluation<T>> {
        let mut ev = evaluate(u, spec)?;
        ev.grad = masked(sym, &ev.grad)?;
        Ok(ev)
    };
    // Roundoff slack in the sufficient-decrease test.
    let slack = |j: T| T::lit(8.0) * T::epsilon() * T::one().max(j.abs());

    let mut u = start;
    let mut ev = eval(&u)?;
    let mut trace = Vec::new();
    let mut prev: Option<(ScalarField<T>, ScalarField<T>)> = None;
    let mut tau_prev = T::zero();
    let mut status = Status::NotConverged;
    let mut iterations = 0;

    loop {
        let rg = geo.tangent(&u, &ev.grad)?;
        let gnorm = norm_l2(&rg);
        let m = geo.multipliers(&u, &ev, spec)?;
        let (c1, c2) = geo.residuals(&u)?;
        trace.push(TraceRow {
            iteration: iterations,
            j: ev.j,
            grad_norm: gnorm,
            omega: m.omega,
            mu: m.mu,
            c1,
            c2,
            h1: h1_norm(&u)?,
        });
        if gnorm <= opts.tol_grad {
            status = Status::Converged;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let mut tau = match opts.step {
            StepRule::Fixed(s) => s,
            StepRule::Adaptive => match &prev {
                Some((up, gp)) => {
                    let s = u.combine(T::one(), up, -T::one())?;
                    let y = rg.combine(T::one(), gp, -T::one())?;
                    let sy = inner_l2(&s, &y)?;
                    if sy > T::zero() {
                        inner_l2(&s, &s)? / sy
                    } else {
                        tau_prev.max(T::one() / (T::one() + gnorm))
                    }
                }
                None => T::one() / (T::one() + gnorm),
            },
        };
        let decrease = opts.armijo * gnorm * gnorm;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = u.combine(T::one(), &rg, -tau)?;
            if let Ok(v) = geo.retract(&trial) {
                let v = masked(sym, &v)?;
                let tev = eval(&v)?;
                if tev.j <= ev.j - decrease * tau + slack(ev.j) {
                    accepted = Some((v, tev));
                    break;
                }
            }
            tau = tau * opts.backtrack;
        }
        let Some((mut v, mut tev)) = accepted else {
            break;
        };
        if use_abs {
            if let Some(a) = abs_nodal(&v)? {
                let aev = eval(&a)?;
                if aev.j <= tev.j {
                    v = a;
                    tev = aev;
                }
            }
        }
        prev = Some((u, rg));
        tau_prev = tau;
        u = v;
        ev = tev;
        iterations += 1;
    }
    finish(spec, geo, u, ev, trace, status, iterations, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    spec: &ProblemSpec<T>,
    geo: &Geometry<'_, T>,
    mut u: ScalarField<T>,
    mut ev: Evaluation<T>,
    trace: Vec<TraceRow<T>>,
    status: Status,
    iterations: usize,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    // J is even; report the representative with nonnegative nodal sum.
    if u.values().sum() < T::zero() {
        u = u.scaled(-T::one());
        ev = evaluate(&u, spec)?;
        ev.grad = masked(opts.symmetry, &ev.grad)?;
    }
    let rg = geo.tangent(&u, &ev.grad)?;
    let multipliers = geo.multipliers(&u, &ev, spec)?;
    let (c1, c2) = geo.residuals(&u)?;
    let phi = total_potential(spec, &ev.phi, multipliers.mu)?;
    Ok(Solution {
        grad_norm: norm_l2(&rg),
        phi_reduced: ev.phi,
        phi,
        multipliers,
        j: ev.j,
        c1,
        c2,
        trace,
        regime: spec.regime(),
        status,
        iterations,
        seed: opts.seed,
        symmetry: opts.symmetry,
        u,
    })
}

/// `Φ` for Navier; `Φ + χ + μ` on the padded grid for Neumann.
fn total_potential<T: Real>(spec: &ProblemSpec<T>, phi: &ScalarField<T>, mu: Option<T>) -> Result<ScalarField<T>> {
    match spec.case() {
        Case::Navier => Ok(phi.clone()),
        Case::Neumann { chi, .. } => {
            let mu = mu.unwrap_or(T::zero());
            let mut v = phi.quad_values();
            Zip::from(&mut v).and(chi.values()).for_each(|p, &c| *p += c + mu);
            ScalarField::from_nodal(phi.grid().clone(), BoundaryClass::Nodal, v)
        }
    }
}

fn check_symmetry<T: Real>(spec: &ProblemSpec<T>, sym: Symmetry) -> Result<()> {
    let q = spec.q();
    let scale = T::one().max(q.q_max().abs()).max(q.q_min().abs());
    for d in (0..3).filter(|&d| sym.is_odd(d)) {
        let defect = q.reflection_defect(d);
        if defect > T::lit(SYMMETRY_TOL) * scale {
            return Err(Error::SymmetryViolation(defect.to_f64_lossy()));
        }
    }
    Ok(())
}

/// Seeded start on `B`: random field in the symmetry class, `|·|` for ground runs.
fn navier_start<T: Real>(grid: &Arc<Grid<T>>, opts: &SolverOptions<T>) -> Result<ScalarField<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let modes = if opts.symmetry.is_none() { opts.init_modes } else { opts.init_modes.max(2) };
    let mut u = masked(opts.symmetry, &random_field(grid, BoundaryClass::DirichletSine, modes, &mut rng)?)?;
    if opts.abs_move && opts.symmetry.is_none() {
        let v = u.values().mapv(|x| x.abs());
        u = ScalarField::from_nodal(grid.clone(), BoundaryClass::DirichletSine, v)?;
    }
    project_sphere(&u)
}

/// Ground state (or symmetry-class minimizer) on the unit sphere.
pub fn minimize_navier<T: Real>(spec: &ProblemSpec<T>, opts: &SolverOptions<T>) -> Result<Solution<T>> {
    if spec.regime() != Regime::Navier {
        return Err(Error::InvalidSpec("minimize_navier needs the Navier case".into()));
    }
    check_symmetry(spec, opts.symmetry)?;
    let start = navier_start(spec.grid(), opts)?;
    descend(spec, opts, &Geometry::Sphere, start)
}

/// Relative size of the seeded perturbation of the feasible starting point.
const NEUMANN_KICK: f64 = 1e-2;

/// Minimizer on `M`, started from a disjoint-bump member of `M`.
pub fn minimize_neumann<T: Real>(spec: &ProblemSpec<T>, opts: &SolverOptions<T>) -> Result<Solution<T>> {
    let Some(alpha) = spec.alpha() else {
        return Err(Error::InvalidSpec("minimize_neumann needs the Neumann case".into()));
    };
    if !opts.symmetry.is_none() {
        return Err(Error::InvalidSpec("symmetry classes are supported for the Navier case only".into()));
    }
    let q = spec.q();
    let report = validate_alpha(q, alpha);
    if !report.is_feasible() {
        return Err(Error::Infeasible {
            alpha: alpha.to_f64_lossy(),
            q_min: report.q_min.to_f64_lossy(),
            q_max: report.q_max.to_f64_lossy(),
        });
    }
    let base = feasible_point(q, alpha, 1)?.remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let kick = random_field(spec.grid(), BoundaryClass::DirichletSine, opts.init_modes, &mut rng)?;
    let kick = tangent_project_m(&base, &kick, q)?;
    let kn = norm_l2(&kick);
    let start = if kn > T::zero() {
        retract_m(&base.combine(T::one(), &kick, T::lit(NEUMANN_KICK) / kn)?, alpha, q)?
    } else {
        base
    };
    descend(spec, opts, &Geometry::Charge { q, alpha }, start)
}

/// Dispatches on the case.
pub fn minimize<T: Real>(spec: &ProblemSpec<T>, opts: &SolverOptions<T>) -> Result<Solution<T>> {
    match spec.regime() {
        Regime::Navier => minimize_navier(spec, opts),
        Regime::Neumann => minimize_neumann(spec, opts),
    }
}

/// Rebuilds a [`Solution`] around a stored iterate `u`, with fresh multipliers,
/// potential and gradient norm. Multipliers come from the least-squares fit
/// without manifold checks, so an off-manifold `u` still yields a report.
/// The status reflects `opts.tol_grad`.
pub fn solution_from_field<T: Real>(
    spec: &ProblemSpec<T>,
    u: ScalarField<T>,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    if u.class() != BoundaryClass::DirichletSine {
        return Err(Error::UnsupportedClass(u.class()));
    }
    let mut ev = evaluate(&u, spec)?;
    ev.grad = masked(opts.symmetry, &ev.grad)?;
    let uu = inner_l2(&u, &u)?;
    if !(uu > T::zero()) {
        return Err(Error::DegenerateInput("stored field is zero".into()));
    }
    let gu = inner_l2(&ev.grad, &u)?;
    let (multipliers, rg, c2) = match spec.alpha() {
        None => {
            let omega = gu / uu;
            let h = norm_h10(&u)?;
            let pn = crate::field::energy_norm(&ev.phi, spec.a())?;
            let m = Multipliers {
                omega,
                mu: None,
                omega_without_p: Some(h * h + pn * pn),
                omega_minus_mu_alpha: None,
            };
            (m, ev.grad.combine(T::one(), &u, -omega)?, T::zero())
        }
        Some(alpha) => {
            let w = spec.q().times_native(&u)?;
            let uw = inner_l2(&u, &w)?;
            let ww = inner_l2(&w, &w)?;
            let x = crate::energy::gram_solve([[uu, uw], [uw, ww]], [gu, inner_l2(&ev.grad, &w)?])?;
            let (omega, mu) = (x[0], -x[1]);
            let m = Multipliers {
                omega,
                mu: Some(mu),
                omega_without_p: None,
                omega_minus_mu_alpha: Some(omega - mu * alpha),
            };
            let rg = ev.grad.combine(T::one(), &u, -omega)?.combine(T::one(), &w, mu)?;
            (m, rg, spec.q().charge_native(&u)? - alpha)
        }
    };
    let phi = total_potential(spec, &ev.phi, multipliers.mu)?;
    let grad_norm = norm_l2(&rg);
    Ok(Solution {
        grad_norm,
        phi_reduced: ev.phi,
        phi,
        multipliers,
        j: ev.j,
        c1: uu - T::one(),
        c2,
        trace: Vec::new(),
        regime: spec.regime(),
        status: if grad_norm <= opts.tol_grad { Status::Converged } else { Status::NotConverged },
        iterations: 0,
        seed: opts.seed,
        symmetry: opts.symmetry,
        u,
    })
}

/// Runs `opts.multistart` seeds and returns all runs with the index of the lowest converged `J`.
pub fn multistart<T: Real>(spec: &ProblemSpec<T>, opts: &SolverOptions<T>) -> Result<(usize, Vec<Solution<T>>)> {
    let runs = (0..opts.multistart as u64)
        .map(|i| {
            let o = SolverOptions { seed: opts.seed.wrapping_add(i), ..*opts };
            minimize(spec, &o)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_index(&runs);
    Ok((best, runs))
}

/// Index of the lowest `J`, preferring converged runs; ties go to the lower seed.
pub fn best_index<T: Real>(runs: &[Solution<T>]) -> usize {
    let key = |s: &Solution<T>| (!s.converged(), s.j);
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        let (a, b) = (key(r), key(&runs[best]));
        if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
            best = i;
        }
    }
    best
}

/// Ground state plus one minimizer per odd symmetry class.
#[derive(Debug, Clone)]
pub struct ExcitedStates<T> {
    pub ground: Solution<T>,
    pub states: Vec<Solution<T>>,
}

/// Minimizes over each odd symmetry subspace. Each class minimizer is a critical
/// point of the full `J` because `q` is even in the reflected axes.
pub fn excited_states<T: Real>(
    spec: &ProblemSpec<T>,
    opts: &SolverOptions<T>,
    classes: &[Symmetry],
) -> Result<ExcitedStates<T>> {
    if spec.regime() != Regime::Navier {
        return Err(Error::InvalidSpec("excited states are supported for the Navier case only".into()));
    }
    for &c in classes {
        if c.is_none() {
            return Err(Error::InvalidParameter("excited classes must be odd in at least one axis".into()));
        }
        check_symmetry(spec, c)?;
    }
    let ground = minimize_navier(spec, &SolverOptions { symmetry: Symmetry::NONE, ..*opts })?;
    let mut states = Vec::with_capacity(classes.len());
    for &c in classes {
        let s = minimize_navier(spec, &SolverOptions { symmetry: c, abs_move: false, ..*opts })?;
        if s.j < ground.j {
            return Err(Error::OrderingViolation {
                ground: ground.j.to_f64_lossy(),
                excited: s.j.to_f64_lossy(),
            });
        }
        states.push(s);
    }
    Ok(ExcitedStates { ground, states })
}

/// Interpolation-inequality probe over seeded random fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GnReport<T> {
    pub p: T,
    pub r: T,
    pub n: usize,
    /// `|u|ₚᵖ / (‖u‖_{H¹}^{p−r} |u|₂^r)` per sample.
    pub ratios: Vec<T>,
    pub max_ratio: T,
    /// Largest relative change of the ratio under `u ↦ 5u`.
    pub scale_defect: T,
}

/// Open window `(p − 2, 3(1 − p/6))` for `r`.
pub fn gn_window<T: Real>(p: T) -> (T, T) {
    (p - T::lit(2.0), T::lit(3.0) * (T::one() - p / T::lit(6.0)))
}

pub fn gn_ratio<T: Real>(u: &ScalarField<T>, p: T, r: T) -> Result<T> {
    let l2 = norm_l2(u);
    let h1 = h1_norm(u)?;
    if !(l2 > T::zero()) {
        return Err(Error::DegenerateInput("u = 0".into()));
    }
    Ok(lp_power(u, p) / (h1.powf(p - r) * l2.powf(r)))
}

/// Evaluates the probe on `samples` seeded fields; sample `i` uses
/// `1 + i mod max_mode` modes per axis so smooth low-mode fields are included.
pub fn gn_probe<T: Real>(
    grid: &Arc<Grid<T>>,
    p: T,
    r: T,
    samples: usize,
    seed: u64,
    max_mode: usize,
) -> Result<GnReport<T>> {
    if !(p > T::lit(2.0) && p < T::lit(10.0 / 3.0)) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (2, 10/3)")));
    }
    let (lo, hi) = gn_window(p);
    if !(r > lo && r < hi) {
        return Err(Error::InvalidExponent {
            r: r.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(samples);
    let mut defect = T::zero();
    if max_mode == 0 {
        return Err(Error::InvalidParameter("max_mode must be at least 1".into()));
    }
    for i in 0..samples {
        let u = random_field(grid, BoundaryClass::DirichletSine, 1 + i % max_mode, &mut rng)?;
        let a = gn_ratio(&u, p, r)?;
        let b = gn_ratio(&u.scaled(T::lit(5.0)), p, r)?;
        defect = defect.max((a - b).abs() / a);
        ratios.push(a);
    }
    let max_ratio = ratios.iter().fold(T::zero(), |m, &v| m.max(v));
    Ok(GnReport {
        p,
        r,
        n: grid.n(),
        ratios,
        max_ratio,
        scale_defect: defect,
    })
}

/// Lower bound `½‖∇u‖² − ½|qχ|_∞ − c′‖u‖_{H¹}^{p−r}` for `J` on `B`.
pub fn coercivity_floor<T: Real>(h1: T, spec: &ProblemSpec<T>, r: T, c_prime: T) -> T {
    let qchi = match spec.chi() {
        Some(chi) => {
            let mut m = T::zero();
            Zip::from(spec.q().quad_values())
                .and(chi.values())
                .for_each(|&q, &c| m = m.max((q * c).abs()));
            m
        }
        None => T::zero(),
    };
    let half = T::lit(0.5);
    let grad2 = (h1 * h1 - T::one()).max(T::zero());
    let nl = if spec.nonlinearity() { c_prime * h1.powf(spec.p() - r) } else { T::zero() };
    half * grad2 - half * qchi - nl
}

/// Tolerances used by [`verify_solution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyTolerances<T> {
    pub u_equation: T,
    pub phi_equation: T,
    pub sphere: T,
    pub charge: T,
    pub identity: T,
    pub multiplier: T,
}

impl<T: Real> Default for VerifyTolerances<T> {
    fn default() -> Self {
        Self {
            u_equation: T::lit(1e-6),
            phi_equation: T::lit(1e-8),
            sphere: T::lit(1e-10),
            charge: T::lit(1e-8),
            identity: T::lit(1e-8),
            multiplier: T::lit(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check<T> {
    pub name: &'static str,
    pub value: T,
    /// `None` for reported-only diagnostics.
    pub tol: Option<T>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport<T> {
    pub checks: Vec<Check<T>>,
}

impl<T: Real> VerifyReport<T> {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check<T>> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check<T>> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn check(&mut self, name: &'static str, value: T, tol: T) {
        self.checks.push(Check { name, value, tol: Some(tol), pass: value.is_finite() && value <= tol });
    }

    fn report(&mut self, name: &'static str, value: T) {
        self.checks.push(Check { name, value, tol: None, pass: true });
    }
}

/// The `u`-equation residual `−Δu + q(Φ+χ)u − |u|ᵖ⁻²u − ωu + μ q u`, assembled
/// from dealiased products rather than through [`evaluate`].
fn u_residual<T: Real>(sol: &Solution<T>, spec: &ProblemSpec<T>) -> Result<T> {
    let u = &sol.u;
    let grid = u.grid();
    let mut lap = u.coefficients()?.clone();
    Zip::from(&mut lap).and(grid.sine_eigen()).for_each(|c, &l| *c = *c * l);
    let lap = ScalarField::from_coefficients(grid.clone(), BoundaryClass::DirichletSine, lap)?;
    let mut pot = sol.phi_reduced.quad_values();
    if let Some(chi) = spec.chi() {
        Zip::from(&mut pot).and(chi.values()).for_each(|p, &c| *p += c);
    }
    let pot = ScalarField::from_nodal(grid.clone(), BoundaryClass::Nodal, pot)?;
    let coupled = project(&multiply_dealiased(&multiply_dealiased(&pot, &spec.q().as_field())?, u)?, BoundaryClass::DirichletSine)?;
    let mut r = lap.combine(T::one(), &coupled, T::one())?;
    if spec.nonlinearity() {
        let p = spec.p();
        let nl = u.quad_values().mapv(|v| if v == T::zero() { T::zero() } else { v.abs().powf(p - T::lit(2.0)) * v });
        let nl = project(&ScalarField::from_nodal(grid.clone(), BoundaryClass::Nodal, nl)?, BoundaryClass::DirichletSine)?;
        r = r.combine(T::one(), &nl, -T::one())?;
    }
    r = r.combine(T::one(), u, -sol.multipliers.omega)?;
    if let Some(mu) = sol.multipliers.mu {
        r = r.combine(T::one(), &spec.q().times_native(u)?, mu)?;
    }
    Ok(norm_l2(&r))
}

/// `‖A Φ − ρ‖ / ‖ρ‖` with `ρ = P(q u²)`, centred in the Neumann case.
fn phi_residual<T: Real>(sol: &Solution<T>, spec: &ProblemSpec<T>) -> Result<T> {
    let u = &sol.u;
    let rho = multiply_dealiased(&multiply_dealiased(u, u)?, &spec.q().as_field())?;
    let class = spec.regime().potential_class();
    let mut rho = project(&rho, class)?;
    if class == BoundaryClass::NeumannCosine {
        let mut c = rho.coefficients()?.clone();
        c[[0, 0, 0]] = T::zero();
        rho = ScalarField::from_coefficients(u.grid().clone(), class, c)?;
    }
    let lhs = spec.operator().apply(&sol.phi_reduced)?;
    let d = norm_l2(&lhs.combine(T::one(), &rho, -T::one())?);
    let s = norm_l2(&rho);
    Ok(if s > T::zero() { d / s } else { d })
}

/// Recomputes equation, constraint and identity residuals of a solution.
pub fn verify_solution<T: Real>(
    sol: &Solution<T>,
    spec: &ProblemSpec<T>,
    tol: &VerifyTolerances<T>,
) -> Result<VerifyReport<T>> {
    let mut rep = VerifyReport { checks: Vec::new() };
    let u = &sol.u;
    let c1 = inner_l2(u, u)? - T::one();
    rep.check("normalization", c1.abs(), tol.sphere);
    if let Some(alpha) = spec.alpha() {
        rep.check("charge", (spec.q().charge_native(u)? - alpha).abs(), tol.charge);
    }
    rep.check("u_equation", u_residual(sol, spec)?, tol.u_equation);
    rep.check("phi_equation", phi_residual(sol, spec)?, tol.phi_equation);
    let ev = evaluate(u, spec)?;
    let omega_ref = inner_l2(&ev.grad, u)?;
    let omega_ref = match sol.multipliers.mu {
        Some(mu) => omega_ref + mu * inner_l2(&spec.q().times_native(u)?, u)?,
        None => omega_ref,
    };
    let w = sol.multipliers.omega;
    rep.check("multiplier", (w - omega_ref).abs() / T::one().max(w.abs()), tol.multiplier);
    rep.check(
        "identity",
        reduction_identity_residual(u, spec.q(), spec.regime(), spec.operator())?,
        tol.identity,
    );
    rep.check("energy", (ev.j - sol.j).abs() / T::one().max(sol.j.abs()), tol.identity);
    let ratio = phi_bound_ratio(u, spec.q(), spec.regime(), spec.operator()).unwrap_or(T::nan());
    rep.report("phi_bound_ratio", ratio);
    if let Some(d) = sol.multipliers.omega_minus_mu_alpha {
        rep.report("omega_minus_mu_alpha", d);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, BoxDomain};
    use std::f64::consts::PI;

    fn linear(n: usize) -> ProblemSpec<f64> {
        let g = make_grid(BoxDomain::unit_cube(), n).unwrap();
        ProblemSpec::navier(ChargeProfile::uncoupled(g), 2.5, 1.0).unwrap().without_nonlinearity()
    }

    #[test]
    fn symmetry_names_round_trip() {
        for s in [Symmetry::NONE, Symmetry::odd_in(0), Symmetry(0b101), Symmetry(0b111)] {
            assert_eq!(Symmetry::from_name(&s.name()), Some(s));
        }
        assert_eq!(Symmetry::from_name("odd-"), None);
        assert_eq!(Symmetry::from_name("even-x"), None);
    }

    #[test]
    fn linear_ground_state_is_first_mode() {
        let spec = linear(8);
        let sol = minimize_navier(&spec, &SolverOptions::default()).unwrap();
        assert!(sol.converged());
        assert!((sol.multipliers.omega / (3.0 * PI * PI) - 1.0).abs() < 1e-6);
        assert!(sol.u.values().iter().all(|&v| v >= -1e-8));
        for w in sol.trace.windows(2) {
            assert!(w[1].j <= w[0].j + 1e-12);
        }
        let rep = verify_solution(&sol, &spec, &VerifyTolerances::default()).unwrap();
        assert!(rep.all_pass(), "{:?}", rep.failures());
    }

    #[test]
    fn odd_class_gives_second_mode() {
        let spec = linear(8);
        let ex = excited_states(&spec, &SolverOptions::default(), &[Symmetry::odd_in(0)]).unwrap();
        let s = &ex.states[0];
        assert!(s.converged());
        assert!((s.multipliers.omega / (6.0 * PI * PI) - 1.0).abs() < 1e-6);
        assert!(s.j > ex.ground.j);
    }

    #[test]
    fn asymmetric_charge_is_rejected() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let q = ChargeProfile::two_well(g, 1.0, 0.25).unwrap();
        let spec = ProblemSpec::navier(q, 2.5, 1.0).unwrap();
        let r = excited_states(&spec, &SolverOptions::default(), &[Symmetry::odd_in(0)]);
        assert!(matches!(r, Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn probe_window_and_homogeneity() {
        let g = make_grid(BoxDomain::unit_cube(), 8).unwrap();
        let p = 2.5f64;
        assert!(matches!(gn_probe(&g, p, p - 2.0 - 0.01, 4, 0, 4), Err(Error::InvalidExponent { .. })));
        let rep = gn_probe(&g, p, 0.8, 10, 0, 4).unwrap();
        assert!(rep.scale_defect < 1e-10);
        assert!(rep.max_ratio > 0.0);
    }
}
