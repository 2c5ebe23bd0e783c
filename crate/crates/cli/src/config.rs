//! Run configuration: TOML text, defaults, validation, and conversion into
//! core problem objects.

use std::sync::Arc;

use sbp_core::manifold::{validate_alpha_with, FeasibilityReport, LEVEL_SET_DELTA, LEVEL_SET_THRESHOLD};
use sbp_core::operators::{BoundaryFlux, FaceData, Monomial};
use sbp_core::solver::{StepRule, Symmetry, VerifyTolerances};
use sbp_core::{make_grid, Biharmonic, BoxDomain, ChargeProfile, ChiSolution, Grid, ProblemSpec, SolverOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A configuration problem, located by line/column for syntax errors or by
/// field name for validation errors.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{}: {message}", .field.as_deref().unwrap_or("config"), .line.map(|(l, c)| format!(" (line {l}, column {c})")).unwrap_or_default())]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<(usize, usize)>,
    pub message: String,
}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_string()),
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    #[default]
    Navier,
    Neumann,
}

/// Built-in charge profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChargeConfig {
    /// `q ≡ 0`; the potential decouples.
    Uncoupled,
    Constant { value: f64 },
    SeparableCosine { offset: f64, amp: f64, modes: [usize; 3] },
    TwoWell { amp: f64, width: f64 },
}

impl Default for ChargeConfig {
    fn default() -> Self {
        ChargeConfig::TwoWell { amp: 1.0, width: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coef: f64,
    pub i: usize,
    pub j: usize,
}

/// Flux data on one face: constants plus optional tangential monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceConfig {
    pub axis: usize,
    pub side: usize,
    #[serde(default)]
    pub h1: f64,
    #[serde(default)]
    pub h2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h1_terms: Vec<TermConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h2_terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    #[default]
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_grad: f64,
    pub max_iter: usize,
    pub step: StepKind,
    pub fixed_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub seed: u64,
    pub multistart: usize,
    pub symmetry: String,
    pub abs_move: bool,
    pub init_modes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::<f64>::default();
        Self {
            tol_grad: d.tol_grad,
            max_iter: d.max_iter,
            step: StepKind::Adaptive,
            fixed_step: 1e-3,
            backtrack: d.backtrack,
            armijo: d.armijo,
            max_backtracks: d.max_backtracks,
            seed: d.seed,
            multistart: d.multistart,
            symmetry: "none".into(),
            abs_move: d.abs_move,
            init_modes: d.init_modes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub u_equation: f64,
    pub phi_equation: f64,
    pub sphere: f64,
    pub charge: f64,
    pub identity: f64,
    pub multiplier: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let d = VerifyTolerances::<f64>::default();
        Self {
            u_equation: d.u_equation,
            phi_equation: d.phi_equation,
            sphere: d.sphere,
            charge: d.charge,
            identity: d.identity,
            multiplier: d.multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeasibilityConfig {
    /// `δ` in the level-set fraction `|{|q − α| < δ}|`.
    pub delta: f64,
    /// Fraction below which `|q⁻¹(α)|` counts as zero.
    pub threshold: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            delta: LEVEL_SET_DELTA,
            threshold: LEVEL_SET_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExcitedConfig {
    pub classes: Vec<String>,
}

impl Default for ExcitedConfig {
    fn default() -> Self {
        Self {
            classes: vec!["odd-x".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreensConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// Inner radii of the truncated-shell energies.
    pub shell_eps: Vec<f64>,
    /// Outer radius of the energy integrals, in units of `a`.
    pub energy_r_max: f64,
    /// Finite-difference step of the operator residual.
    pub fd_step: f64,
}

impl Default for GreensConfig {
    fn default() -> Self {
        Self {
            r_min: 1e-3,
            r_max: 10.0,
            points: 25,
            shell_eps: vec![1e-1, 1e-2, 1e-3],
            energy_r_max: 50.0,
            fd_step: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnProbeConfig {
    /// Interpolation exponent; defaults to the midpoint of the admissible window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub max_mode: usize,
    pub resolutions: Vec<usize>,
}

impl Default for GnProbeConfig {
    fn default() -> Self {
        Self {
            r: None,
            samples: 100,
            seed: 0,
            max_mode: 4,
            resolutions: vec![16, 32],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    #[default]
    P,
    Symmetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub p_values: Vec<f64>,
    pub classes: Vec<String>,
    /// Run sweep points concurrently, each in its own output directory.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::P,
            p_values: vec![2.2, 2.6, 3.0],
            classes: Vec::new(),
            parallel: false,
        }
    }
}

/// A full run description. Plain keys come before tables so the emitted TOML is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_lengths")]
    pub lengths: [f64; 3],
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub case: CaseKind,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_true")]
    pub nonlinearity: bool,
    /// Claimed `α`; must match the flux data when both are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub charge: ChargeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub feasibility: FeasibilityConfig,
    #[serde(default)]
    pub excited: ExcitedConfig,
    #[serde(default)]
    pub greens: GreensConfig,
    #[serde(default)]
    pub gn_probe: GnProbeConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flux: Vec<FaceConfig>,
}

fn default_lengths() -> [f64; 3] {
    [1.0; 3]
}

fn default_n() -> usize {
    16
}

fn default_p() -> f64 {
    2.5
}

fn default_a() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

/// Parses and fully validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_col(text, s.start));
        ConfigError {
            field: None,
            line,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serialises a configuration; `parse_config(&emit_config(c)) == c`.
pub fn emit_config(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("configuration serialises")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("must be positive and finite, got {v}")))
    }
}

pub fn parse_symmetry(field: &str, s: &str) -> Result<Symmetry, ConfigError> {
    Symmetry::from_name(s)
        .ok_or_else(|| ConfigError::field(field, format!("unknown symmetry class {s:?} (use none, odd-x, odd-xy, ...)")))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (d, &l) in self.lengths.iter().enumerate() {
            positive(&format!("lengths[{d}]"), l)?;
        }
        if self.n < 4 {
            return Err(ConfigError::field("n", format!("need n >= 4, got {}", self.n)));
        }
        if !(self.p > 2.0 && self.p < 10.0 / 3.0) {
            return Err(ConfigError::field("p", format!("p = {} outside (2, 10/3)", self.p)));
        }
        positive("a", self.a)?;
        match self.charge {
            ChargeConfig::Constant { value } if value == 0.0 || !value.is_finite() => {
                return Err(ConfigError::field("charge.value", "constant profile must be finite and nonzero"));
            }
            ChargeConfig::TwoWell { width, .. } => positive("charge.width", width)?,
            _ => {}
        }
        let s = &self.solver;
        positive("solver.tol_grad", s.tol_grad)?;
        if !(s.backtrack > 0.0 && s.backtrack < 1.0) {
            return Err(ConfigError::field("solver.backtrack", "must lie in (0, 1)"));
        }
        if !(s.armijo > 0.0 && s.armijo < 1.0) {
            return Err(ConfigError::field("solver.armijo", "must lie in (0, 1)"));
        }
        if s.step == StepKind::Fixed {
            positive("solver.fixed_step", s.fixed_step)?;
        }
        if s.multistart == 0 || s.init_modes == 0 {
            return Err(ConfigError::field("solver", "multistart and init_modes must be at least 1"));
        }
        parse_symmetry("solver.symmetry", &s.symmetry)?;
        let v = &self.verify;
        for (name, t) in [
            ("verify.u_equation", v.u_equation),
            ("verify.phi_equation", v.phi_equation),
            ("verify.sphere", v.sphere),
            ("verify.charge", v.charge),
            ("verify.identity", v.identity),
            ("verify.multiplier", v.multiplier),
            ("feasibility.delta", self.feasibility.delta),
            ("feasibility.threshold", self.feasibility.threshold),
        ] {
            positive(name, t)?;
        }
        for c in &self.excited.classes {
            let sym = parse_symmetry("excited.classes", c)?;
            if sym.is_none() {
                return Err(ConfigError::field("excited.classes", "classes must be odd in at least one axis"));
            }
        }
        let g = &self.greens;
        positive("greens.r_min", g.r_min)?;
        if !(g.r_max > g.r_min) || g.points < 2 {
            return Err(ConfigError::field("greens", "need r_max > r_min and points >= 2"));
        }
        for &e in &g.shell_eps {
            positive("greens.shell_eps", e)?;
        }
        positive("greens.energy_r_max", g.energy_r_max)?;
        positive("greens.fd_step", g.fd_step)?;
        let gp = &self.gn_probe;
        if gp.samples == 0 || gp.max_mode == 0 || gp.resolutions.is_empty() || gp.resolutions.iter().any(|&n| n < 4) {
            return Err(ConfigError::field("gn_probe", "need samples, max_mode >= 1 and resolutions >= 4"));
        }
        match self.sweep.axis {
            SweepAxis::P => {
                if self.sweep.p_values.is_empty() {
                    return Err(ConfigError::field("sweep.p_values", "sweep axis is empty"));
                }
                for &p in &self.sweep.p_values {
                    if !(p > 2.0 && p < 10.0 / 3.0) {
                        return Err(ConfigError::field("sweep.p_values", format!("p = {p} outside (2, 10/3)")));
                    }
                }
            }
            SweepAxis::Symmetry => {
                if self.sweep.classes.is_empty() {
                    return Err(ConfigError::field("sweep.classes", "sweep axis is empty"));
                }
                for c in &self.sweep.classes {
                    parse_symmetry("sweep.classes", c)?;
                }
            }
        }
        for (i, f) in self.flux.iter().enumerate() {
            if f.axis > 2 || f.side > 1 {
                return Err(ConfigError::field(&format!("flux[{i}]"), "axis must be 0..=2 and side 0..=1"));
            }
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(ConfigError::field("alpha", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> BoxDomain<f64> {
        BoxDomain::new(self.lengths).expect("validated lengths")
    }

    pub fn grid_at(&self, n: usize) -> Result<Arc<Grid<f64>>, ConfigError> {
        make_grid(self.domain(), n).map_err(|e| ConfigError::field("n", e.to_string()))
    }

    pub fn grid(&self) -> Result<Arc<Grid<f64>>, ConfigError> {
        self.grid_at(self.n)
    }

    pub fn charge(&self, grid: &Arc<Grid<f64>>) -> Result<ChargeProfile<f64>, ConfigError> {
        let g = grid.clone();
        let r = match &self.charge {
            ChargeConfig::Uncoupled => Ok(ChargeProfile::uncoupled(g)),
            ChargeConfig::Constant { value } => ChargeProfile::constant(g, *value),
            ChargeConfig::SeparableCosine { offset, amp, modes } => {
                ChargeProfile::separable_cosine(g, *offset, *amp, *modes)
            }
            ChargeConfig::TwoWell { amp, width } => ChargeProfile::two_well(g, *amp, *width),
        };
        r.map_err(|e| ConfigError::field("charge", e.to_string()))
    }

    /// Flux data from the `[[flux]]` tables; absent faces carry zero data.
    pub fn boundary_flux(&self) -> Result<BoundaryFlux<f64>, ConfigError> {
        let mut faces: [[FaceData<f64>; 2]; 3] = Default::default();
        for f in &self.flux {
            let mono = |t: &[TermConfig], c: f64| {
                let mut v: Vec<Monomial<f64>> = t.iter().map(|m| Monomial { coef: m.coef, i: m.i, j: m.j }).collect();
                if c != 0.0 {
                    v.push(Monomial { coef: c, i: 0, j: 0 });
                }
                v
            };
            let face = &mut faces[f.axis][f.side];
            face.h1.extend(mono(&f.h1_terms, f.h1));
            face.h2.extend(mono(&f.h2_terms, f.h2));
        }
        let dom = self.domain();
        let r = match self.alpha {
            Some(a) if self.a == 1.0 => BoundaryFlux::with_claimed_alpha(dom, faces, a),
            _ => BoundaryFlux::new(dom, faces),
        };
        r.map_err(|e| ConfigError::field("flux", e.to_string()))
    }

    pub fn operator(&self) -> Biharmonic<f64> {
        Biharmonic::new(self.a).expect("validated a")
    }

    /// `χ` for the Neumann case.
    pub fn chi(&self, grid: &Arc<Grid<f64>>) -> Result<ChiSolution<f64>, ConfigError> {
        let flux = self.boundary_flux()?;
        let chi = self
            .operator()
            .solve_chi(&flux, grid, None)
            .map_err(|e| ConfigError::field("flux", e.to_string()))?;
        if let Some(a) = self.alpha {
            if (a - chi.alpha).abs() > 1e-10 * a.abs().max(1.0) {
                return Err(ConfigError::field(
                    "alpha",
                    format!("claimed alpha {a} disagrees with the flux data ({})", chi.alpha),
                ));
            }
        }
        Ok(chi)
    }

    /// `α` implied by the flux data (or claimed).
    pub fn alpha_value(&self) -> Result<f64, ConfigError> {
        let flux = self.boundary_flux()?;
        Ok(flux.alpha_for(self.a))
    }

    pub fn feasibility(&self, q: &ChargeProfile<f64>, alpha: f64) -> FeasibilityReport<f64> {
        validate_alpha_with(q, alpha, self.feasibility.delta, self.feasibility.threshold)
    }

    /// Problem for the given case at resolution `n`; the `χ` solve is skipped for Navier.
    pub fn spec_for(&self, case: CaseKind, grid: &Arc<Grid<f64>>, p: f64) -> Result<ProblemSpec<f64>, ConfigError> {
        let q = self.charge(grid)?;
        let spec = match case {
            CaseKind::Navier => ProblemSpec::navier(q, p, self.a),
            CaseKind::Neumann => ProblemSpec::neumann(q, p, self.a, &self.chi(grid)?),
        }
        .map_err(|e| ConfigError::field("p", e.to_string()))?;
        Ok(spec.with_nonlinearity(self.nonlinearity))
    }

    pub fn spec(&self, grid: &Arc<Grid<f64>>) -> Result<ProblemSpec<f64>, ConfigError> {
        self.spec_for(self.case, grid, self.p)
    }

    pub fn solver_options(&self) -> SolverOptions<f64> {
        let s = &self.solver;
        SolverOptions {
            tol_grad: s.tol_grad,
            max_iter: s.max_iter,
            step: match s.step {
                StepKind::Adaptive => StepRule::Adaptive,
                StepKind::Fixed => StepRule::Fixed(s.fixed_step),
            },
            backtrack: s.backtrack,
            armijo: s.armijo,
            max_backtracks: s.max_backtracks,
            seed: s.seed,
            multistart: s.multistart,
            symmetry: Symmetry::from_name(&s.symmetry).expect("validated symmetry"),
            abs_move: s.abs_move,
            init_modes: s.init_modes,
        }
    }

    pub fn verify_tolerances(&self) -> VerifyTolerances<f64> {
        let v = &self.verify;
        VerifyTolerances {
            u_equation: v.u_equation,
            phi_equation: v.phi_equation,
            sphere: v.sphere,
            charge: v.charge,
            identity: v.identity,
            multiplier: v.multiplier,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_documented_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.p, 2.5);
        assert_eq!(c.a, 1.0);
        assert_eq!(c.n, 16);
        assert_eq!(c.solver.tol_grad, 1e-6);
        assert_eq!(c.case, CaseKind::Navier);
    }

    #[test]
    fn unknown_keys_are_located() {
        let e = parse_config("n = 8\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line.map(|l| l.0), Some(2));
        let e = parse_config("[solver]\ntol = 1e-3\n").unwrap_err();
        assert!(e.message.contains("tol"), "{e}");
        let e = parse_config("[charge]\nprofile = \"constant\"\nvalue = 1.0\nextra = 2\n").unwrap_err();
        assert!(e.line.is_some(), "{e}");
    }

    #[test]
    fn subcritical_window_is_enforced() {
        let e = parse_config("p = 3.5").unwrap_err();
        assert_eq!(e.field.as_deref(), Some("p"));
    }

    #[test]
    fn round_trip() {
        let text = r#"
            lengths = [1.0, 1.5, 1.0]
            n = 12
            case = "neumann"
            p = 2.8
            [charge]
            profile = "separable-cosine"
            offset = 0.1
            amp = 1.0
            modes = [1, 0, 0]
            [sweep]
            axis = "symmetry"
            classes = ["none", "odd-x"]
            [[flux]]
            axis = 2
            side = 1
            h2 = 0.5
            h1_terms = [{ coef = 0.25, i = 1, j = 0 }]
        "#;
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&emit_config(&c)).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(parse_config(&emit_config(&d)).unwrap(), d);
    }

    #[test]
    fn empty_sweep_axis_is_rejected() {
        assert!(parse_config("[sweep]\np_values = []\n").is_err());
        assert!(parse_config("[sweep]\naxis = \"symmetry\"\n").is_err());
    }
}
