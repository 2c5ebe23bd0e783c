//! Subcommand execution. Every run writes its outputs and a manifest into one
//! directory and maps its outcome to an exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sbp_core::field::{energy_norm, norm_h10};
use sbp_core::greens::{self, Kernel};
use sbp_core::solver::{
    excited_states, gn_probe, gn_window, multistart, solution_from_field, verify_solution, Solution, Status,
    Symmetry, VerifyReport,
};
use sbp_core::{Error as CoreError, ProblemSpec};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{emit_config, parse_symmetry, CaseKind, ConfigError, RunConfig, SweepAxis};
use crate::io::{ensure_dir, read_field, write_field, write_table, write_trace, IoError};
use crate::manifest::{verify_digests, CheckEntry, RunManifest};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// I/O or numerical failure not covered by another code.
    pub const RUNTIME: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    /// `α` outside the admissible range of `q`.
    pub const INFEASIBLE: i32 = 3;
    pub const CONFIG: i32 = 4;
    /// The run finished but at least one verification check failed.
    pub const VERIFY_FAILED: i32 = 5;
}

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "SBP_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Greens,
    SolveNavier,
    SolveNeumann,
    Excited,
    /// Re-verifies the run stored in `input`.
    Verify { input: PathBuf },
    GnProbe,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Greens => "greens",
            Command::SolveNavier => "solve-navier",
            Command::SolveNeumann => "solve-neumann",
            Command::Excited => "excited",
            Command::Verify { .. } => "verify",
            Command::GnProbe => "gn-probe",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Io(#[from] IoError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG,
            RunError::Infeasible(_) => exit::INFEASIBLE,
            RunError::Core(CoreError::Infeasible { .. }) => exit::INFEASIBLE,
            RunError::Core(
                CoreError::InvalidExponent { .. } | CoreError::SymmetryViolation(_) | CoreError::InvalidParameter(_),
            ) => exit::CONFIG,
            RunError::Core(_) | RunError::Io(_) => exit::RUNTIME,
        }
    }
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub message: String,
}

/// Output directory: the explicit choice, else the config's, else `sbp-out`;
/// relative paths are placed under `$SBP_OUTPUT_ROOT` when it is set.
pub fn output_dir(explicit: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    let base = explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sbp-out"));
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if base.is_relative() => PathBuf::from(root).join(base),
        _ => base,
    }
}

fn status_name(code: i32) -> &'static str {
    match code {
        exit::OK => "ok",
        exit::NOT_CONVERGED => "not-converged",
        exit::INFEASIBLE => "infeasible",
        exit::CONFIG => "config-error",
        exit::VERIFY_FAILED => "verification-failed",
        _ => "error",
    }
}

/// Executes `cmd` with outputs in `dir`. Never panics on bad input; failures
/// are reported through the exit code and the manifest.
pub fn run(cmd: &Command, cfg: &RunConfig, dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut m = RunManifest::new(cmd.name(), cfg.solver.seed, emit_config(cfg));
    let result = ensure_dir(dir).map_err(RunError::from).and_then(|_| match cmd {
        Command::Greens => greens_cmd(cfg, dir, &mut m),
        Command::SolveNavier => solve_cmd(cfg, CaseKind::Navier, dir, &mut m),
        Command::SolveNeumann => solve_cmd(cfg, CaseKind::Neumann, dir, &mut m),
        Command::Excited => excited_cmd(cfg, dir, &mut m),
        Command::Verify { input } => verify_cmd(cfg, input, dir, &mut m),
        Command::GnProbe => gn_cmd(cfg, dir, &mut m),
        Command::Sweep => sweep_cmd(cfg, dir, &mut m),
    });
    let (code, message) = match result {
        Ok(code) => (code, status_name(code).to_string()),
        Err(e) => {
            let code = e.exit_code();
            (code, e.to_string())
        }
    };
    m.exit_code = code;
    m.status = status_name(code).to_string();
    if code != exit::OK {
        if let Value::Object(ref mut o) = m.results {
            o.insert("message".into(), json!(message));
        } else {
            m.results = json!({ "message": message });
        }
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    let code = match m.write(dir) {
        Ok(()) => code,
        Err(_) if code != exit::OK => code,
        Err(_) => exit::RUNTIME,
    };
    Outcome { exit_code: code, dir: dir.to_path_buf(), manifest: m, message }
}

fn push_checks(m: &mut RunManifest, rep: &VerifyReport<f64>) {
    m.checks.extend(rep.checks.iter().map(|c| CheckEntry {
        name: c.name.to_string(),
        value: c.value,
        tol: c.tol,
        pass: c.pass,
    }));
}

fn case_name(case: CaseKind) -> &'static str {
    match case {
        CaseKind::Navier => "navier",
        CaseKind::Neumann => "neumann",
    }
}

fn solution_meta(sol: &Solution<f64>, case: CaseKind, cfg: &RunConfig) -> Value {
    json!({
        "case": case_name(case),
        "p": cfg.p,
        "a": cfg.a,
        "omega": sol.multipliers.omega,
        "mu": sol.multipliers.mu,
        "J": sol.j,
        "symmetry": sol.symmetry.name(),
        "seed": sol.seed,
        "converged": sol.converged(),
    })
}

fn solution_results(sol: &Solution<f64>, spec: &ProblemSpec<f64>) -> Result<Value, RunError> {
    Ok(json!({
        "status": if sol.converged() { "converged" } else { "not-converged" },
        "J": sol.j,
        "omega": sol.multipliers.omega,
        "mu": sol.multipliers.mu,
        "omega_without_p": sol.multipliers.omega_without_p,
        "omega_minus_mu_alpha": sol.multipliers.omega_minus_mu_alpha,
        "alpha": spec.alpha(),
        "grad_norm": sol.grad_norm,
        "c1_residual": sol.c1,
        "c2_residual": sol.c2,
        "iterations": sol.iterations,
        "seed": sol.seed,
        "symmetry": sol.symmetry.name(),
        "u_h10_norm": norm_h10(&sol.u)?,
        "phi_norm": energy_norm(&sol.phi_reduced, spec.a())?,
        "u_min": sol.u.values().iter().cloned().fold(f64::INFINITY, f64::min),
    }))
}

/// Writes `u`, `φ` and the trace of one solution under `stem`.
fn write_solution(
    dir: &Path,
    m: &mut RunManifest,
    stem: &str,
    sol: &Solution<f64>,
    case: CaseKind,
    cfg: &RunConfig,
) -> Result<(), RunError> {
    let meta = solution_meta(sol, case, cfg);
    let names = [format!("{stem}u.sbpf"), format!("{stem}phi.sbpf"), format!("{stem}trace.csv")];
    write_field(&dir.join(&names[0]), &sol.u, meta.clone())?;
    write_field(&dir.join(&names[1]), &sol.phi, meta)?;
    write_trace(&dir.join(&names[2]), &sol.trace)?;
    for n in &names {
        m.add_file(dir, n)?;
    }
    Ok(())
}

fn check_feasible(cfg: &RunConfig, grid: &std::sync::Arc<sbp_core::Grid<f64>>, m: &mut RunManifest) -> Result<(), RunError> {
    let q = cfg.charge(grid)?;
    let alpha = cfg.alpha_value()?;
    let rep = cfg.feasibility(&q, alpha);
    m.results = json!({
        "feasibility": {
            "verdict": format!("{:?}", rep.verdict),
            "alpha": rep.alpha,
            "q_min": rep.q_min,
            "q_max": rep.q_max,
            "level_set_fraction": rep.level_set_fraction,
            "null_level_set": rep.null_level_set,
        }
    });
    if !rep.is_feasible() {
        return Err(RunError::Infeasible(format!(
            "alpha = {} must satisfy q_min < alpha < q_max with [q_min, q_max] = [{}, {}] ({:?})",
            rep.alpha, rep.q_min, rep.q_max, rep.verdict
        )));
    }
    Ok(())
}

fn merge(m: &mut RunManifest, v: Value) {
    match (&mut m.results, v) {
        (Value::Object(a), Value::Object(b)) => a.extend(b),
        (slot, v) => *slot = v,
    }
}

fn solve_cmd(cfg: &RunConfig, case: CaseKind, dir: &Path, m: &mut RunManifest) -> Result<i32, RunError> {
    let grid = cfg.grid()?;
    if case == CaseKind::Neumann {
        check_feasible(cfg, &grid, m)?;
    }
    let spec = cfg.spec_for(case, &grid, cfg.p)?;
    let opts = cfg.solver_options();
    let (best, runs) = multistart(&spec, &opts)?;
    let sol = &runs[best];
    write_solution(dir, m, "", sol, case, cfg)?;
    let rep = verify_solution(sol, &spec, &cfg.verify_tolerances())?;
    push_checks(m, &rep);
    let mut res = solution_results(sol, &spec)?;
    res["case"] = json!(case_name(case));
    res["multistart_J"] = json!(runs.iter().map(|r| r.j).collect::<Vec<_>>());
    merge(m, res);
    Ok(if sol.status == Status::NotConverged {
        exit::NOT_CONVERGED
    } else if !rep.all_pass() {
        exit::VERIFY_FAILED
    } else {
        exit::OK
    })
}

fn excited_cmd(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<i32, RunError> {
    if cfg.case != CaseKind::Navier {
        return Err(ConfigError::field("case", "excited states are available for the navier case only").into());
    }
    let grid = cfg.grid()?;
    let spec = cfg.spec(&grid)?;
    let classes = cfg
        .excited
        .classes
        .iter()
        .map(|c| parse_symmetry("excited.classes", c))
        .collect::<Result<Vec<Symmetry>, _>>()?;
    let ex = excited_states(&spec, &cfg.solver_options(), &classes)?;
    let mut rows = Vec::new();
    let mut states = Vec::new();
    let mut code = exit::OK;
    for sol in std::iter::once(&ex.ground).chain(&ex.states) {
        let stem = format!("{}_", sol.symmetry.name());
        write_solution(dir, m, &stem, sol, CaseKind::Navier, cfg)?;
        let rep = verify_solution(sol, &spec, &cfg.verify_tolerances())?;
        if !sol.converged() {
            code = exit::NOT_CONVERGED;
        } else if !rep.all_pass() && code == exit::OK {
            code = exit::VERIFY_FAILED;
        }
        for c in &rep.checks {
            m.checks.push(CheckEntry {
                name: format!("{}:{}", sol.symmetry.name(), c.name),
                value: c.value,
                tol: c.tol,
                pass: c.pass,
            });
        }
        rows.push(vec![
            sol.symmetry.name(),
            format!("{:e}", sol.j),
            format!("{:e}", sol.multipliers.omega),
            format!("{:e}", sol.grad_norm),
            format!("{:?}", sol.status),
            sol.iterations.to_string(),
        ]);
        states.push(solution_results(sol, &spec)?);
    }
    write_table(&dir.join("states.csv"), &["class", "J", "omega", "grad_norm", "status", "iterations"], &rows)?;
    m.add_file(dir, "states.csv")?;
    m.results = json!({ "states": states });
    Ok(code)
}

fn verify_cmd(cfg: &RunConfig, input: &Path, dir: &Path, m: &mut RunManifest) -> Result<i32, RunError> {
    let grid = cfg.grid()?;
    let (header, u) = read_field(&input.join("u.sbpf"), &grid)?;
    let meta = &header.meta;
    let case = match meta.get("case").and_then(Value::as_str) {
        Some("neumann") => CaseKind::Neumann,
        Some("navier") => CaseKind::Navier,
        _ => cfg.case,
    };
    let p = meta.get("p").and_then(Value::as_f64).unwrap_or(cfg.p);
    let mut opts = cfg.solver_options();
    if let Some(s) = meta.get("symmetry").and_then(Value::as_str) {
        opts.symmetry = parse_symmetry("symmetry", s)?;
    }
    let spec = cfg.spec_for(case, &grid, p)?;
    let sol = solution_from_field(&spec, u, &opts)?;
    let rep = verify_solution(&sol, &spec, &cfg.verify_tolerances())?;
    push_checks(m, &rep);
    let bad = verify_digests(input).unwrap_or_else(|_| vec!["manifest.json".into()]);
    m.checks.push(CheckEntry {
        name: "digests".into(),
        value: bad.len() as f64,
        tol: Some(0.0),
        pass: bad.is_empty(),
    });
    if let Some(w) = meta.get("omega").and_then(Value::as_f64) {
        let d = (w - sol.multipliers.omega).abs() / w.abs().max(1.0);
        let tol = cfg.verify.multiplier;
        m.checks.push(CheckEntry { name: "stored_omega".into(), value: d, tol: Some(tol), pass: d <= tol });
    }
    let mut res = solution_results(&sol, &spec)?;
    res["input"] = json!(input.display().to_string());
    res["digest_mismatches"] = json!(bad);
    m.results = res;
    let _ = dir;
    Ok(if m.checks.iter().all(|c| c.pass) { exit::OK } else { exit::VERIFY_FAILED })
}

fn gn_cmd(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<i32, RunError> {
    let g = &cfg.gn_probe;
    let (lo, hi) = gn_window(cfg.p);
    let r = g.r.unwrap_or(0.5 * (lo + hi));
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in &g.resolutions {
        let grid = cfg.grid_at(n)?;
        let rep = gn_probe(&grid, cfg.p, r, g.samples, g.seed, g.max_mode)?;
        for (i, v) in rep.ratios.iter().enumerate() {
            rows.push(vec![n.to_string(), i.to_string(), format!("{v:e}")]);
        }
        per_n.push(json!({ "n": n, "max_ratio": rep.max_ratio, "scale_defect": rep.scale_defect }));
    }
    write_table(&dir.join("gn_probe.csv"), &["n", "sample", "ratio"], &rows)?;
    m.add_file(dir, "gn_probe.csv")?;
    let maxes: Vec<f64> = per_n.iter().map(|v| v["max_ratio"].as_f64().unwrap()).collect();
    let spread = maxes.iter().cloned().fold(0.0, f64::max) / maxes.iter().cloned().fold(f64::INFINITY, f64::min);
    m.results = json!({ "p": cfg.p, "r": r, "window": [lo, hi], "resolutions": per_n, "max_ratio_spread": spread });
    Ok(exit::OK)
}

fn greens_cmd(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<i32, RunError> {
    let g = &cfg.greens;
    let a = cfg.a;
    let mut rows = Vec::new();
    let mut worst_identity = 0.0f64;
    let ratio = (g.r_max / g.r_min).powf(1.0 / (g.points - 1) as f64);
    for i in 0..g.points {
        let r = a * g.r_min * ratio.powi(i as i32);
        let c = greens::coulomb(r)?;
        let y = greens::yukawa(r, a)?;
        let b = greens::bp_kernel(r, a)?;
        let id = (c - y - b).abs() / c;
        worst_identity = worst_identity.max(id);
        rows.push(vec![format!("{r:e}"), format!("{c:e}"), format!("{y:e}"), format!("{b:e}"), format!("{id:e}")]);
    }
    write_table(&dir.join("greens.csv"), &["r", "coulomb", "yukawa", "bp", "identity_residual"], &rows)?;
    m.add_file(dir, "greens.csv")?;

    let r_max = g.energy_r_max * a;
    let mut shells = Vec::new();
    for &eps in &g.shell_eps {
        let ec = greens::radial_energy(Kernel::Coulomb, a, eps * a, r_max)?;
        let law = (1.0 / (eps * a) - 1.0 / r_max) / (8.0 * std::f64::consts::PI);
        shells.push(vec![format!("{eps:e}"), format!("{ec:e}"), format!("{:e}", ec / law)]);
    }
    write_table(&dir.join("coulomb_shells.csv"), &["eps", "energy", "energy_over_law"], &shells)?;
    m.add_file(dir, "coulomb_shells.csv")?;

    let finite = greens::radial_energy_parts(Kernel::BoppPodolsky, a, 1e-12 * a, r_max)?;
    let tail = greens::radial_energy_tail(Kernel::BoppPodolsky, a, r_max)?;
    let r0 = a;
    let res_h = greens::factorization_residual(a, r0, g.fd_step)?;
    let res_h2 = greens::factorization_residual(a, r0, 0.5 * g.fd_step)?;
    m.results = json!({
        "a": a,
        "bp_at_zero": greens::bp_kernel(0.0, a)?,
        "bp_limit": 1.0 / (4.0 * std::f64::consts::PI * a),
        "identity_max_residual": worst_identity,
        "bp_energy": finite.total() + tail.total(),
        "bp_energy_truncated": finite.total(),
        "bp_energy_tail": tail.total(),
        "bp_energy_exact": 1.0 / (8.0 * std::f64::consts::PI * a),
        "coulomb_shells": shells.iter().map(|r| r[2].parse::<f64>().unwrap_or(f64::NAN)).collect::<Vec<_>>(),
        "factorization_residual": [res_h, res_h2],
        "factorization_ratio": res_h / res_h2,
    });
    Ok(exit::OK)
}

fn sweep_cmd(cfg: &RunConfig, dir: &Path, m: &mut RunManifest) -> Result<i32, RunError> {
    let s = &cfg.sweep;
    let points: Vec<(String, RunConfig, Command)> = match s.axis {
        SweepAxis::P => s
            .p_values
            .iter()
            .map(|&p| {
                let c = RunConfig { p, ..cfg.clone() };
                let cmd = match cfg.case {
                    CaseKind::Navier => Command::SolveNavier,
                    CaseKind::Neumann => Command::SolveNeumann,
                };
                (format!("{p}"), c, cmd)
            })
            .collect(),
        SweepAxis::Symmetry => {
            if cfg.case != CaseKind::Navier {
                return Err(ConfigError::field("sweep.axis", "symmetry sweeps need the navier case").into());
            }
            s.classes
                .iter()
                .map(|cls| {
                    let mut c = cfg.clone();
                    c.solver.symmetry = cls.clone();
                    if cls != "none" {
                        c.solver.abs_move = false;
                    }
                    (cls.clone(), c, Command::SolveNavier)
                })
                .collect()
        }
    };
    let one = |(i, (label, c, cmd)): (usize, &(String, RunConfig, Command))| {
        let sub = format!("run_{i:03}");
        let out = run(cmd, c, &dir.join(&sub));
        (label.clone(), sub, out)
    };
    let outs: Vec<_> = if s.parallel {
        points.par_iter().enumerate().map(one).collect()
    } else {
        points.iter().enumerate().map(one).collect()
    };
    let num = |v: &Value, k: &str| v.get(k).and_then(Value::as_f64).map(|x| format!("{x:e}")).unwrap_or_default();
    let mut rows = Vec::new();
    let mut omegas = Vec::new();
    let mut code = exit::OK;
    for (label, sub, out) in &outs {
        let r = &out.manifest.results;
        if let Some(w) = r.get("omega").and_then(Value::as_f64) {
            omegas.push(w);
        }
        code = code.max(out.exit_code);
        rows.push(vec![
            label.clone(),
            sub.clone(),
            out.manifest.status.clone(),
            out.exit_code.to_string(),
            num(r, "J"),
            num(r, "omega"),
            num(r, "mu"),
            num(r, "u_h10_norm"),
            num(r, "phi_norm"),
            num(r, "omega_minus_mu_alpha"),
        ]);
        m.add_file(dir, &format!("{sub}/manifest.json"))?;
    }
    write_table(
        &dir.join("sweep.csv"),
        &["value", "run", "status", "exit_code", "J", "omega", "mu", "u_norm", "phi_norm", "omega_minus_mu_alpha"],
        &rows,
    )?;
    m.add_file(dir, "sweep.csv")?;
    let nondecreasing = omegas.windows(2).all(|w| w[1] >= w[0]);
    m.results = json!({
        "axis": format!("{:?}", s.axis).to_lowercase(),
        "runs": outs.len(),
        "omega": omegas,
        "omega_nondecreasing": nondecreasing,
    });
    Ok(code)
}
