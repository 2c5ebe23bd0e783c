use std::path::Path;
use std::process::Command as Proc;

use sbp_cli::config::{emit_config, parse_config};
use sbp_cli::manifest::{verify_digests, RunManifest};
use sbp_cli::run::{exit, run, Command};

fn sbp(args: &[&str], cwd: &Path) -> i32 {
    Proc::new(env!("CARGO_BIN_EXE_sbp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SBP_OUTPUT_ROOT")
        .status()
        .expect("spawn sbp")
        .code()
        .expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn smoke_solve_navier_passes_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "n = 12\n");
    assert_eq!(sbp(&["solve-navier", "-c", &cfg, "-o", "out"], tmp.path()), exit::OK);
    let dir = tmp.path().join("out");
    let m = RunManifest::read(&dir).unwrap();
    assert_eq!(m.exit_code, 0);
    assert!(!m.checks.is_empty());
    assert!(m.checks.iter().all(|c| c.pass), "{:?}", m.checks);
    assert!(verify_digests(&dir).unwrap().is_empty());
    for f in ["u.sbpf", "phi.sbpf", "trace.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert_eq!(sbp(&["verify", "-i", "out", "-o", "ver"], tmp.path()), exit::OK);
}

#[test]
fn tampered_field_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "n = 12\n");
    assert_eq!(sbp(&["solve-navier", "-c", &cfg, "-o", "out"], tmp.path()), exit::OK);
    let u = tmp.path().join("out/u.sbpf");
    let mut bytes = std::fs::read(&u).unwrap();
    let start = bytes.iter().position(|&b| b == b'\n').unwrap() + 1 + 8 * 300;
    let v = f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap());
    bytes[start..start + 8].copy_from_slice(&(v * 1.05 + 1e-3).to_le_bytes());
    std::fs::write(&u, bytes).unwrap();
    assert_eq!(verify_digests(&tmp.path().join("out")).unwrap(), vec!["u.sbpf".to_string()]);
    assert_eq!(sbp(&["verify", "-i", "out", "-o", "ver"], tmp.path()), exit::VERIFY_FAILED);
    let m = RunManifest::read(&tmp.path().join("ver")).unwrap();
    let failed: Vec<_> = m.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    assert!(failed.contains(&"digests"));
    assert!(failed.contains(&"u_equation"));
}

#[test]
fn alpha_above_range_exits_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "n = 12\n[[flux]]\naxis = 0\nside = 1\nh2 = 5.0\n");
    assert_eq!(sbp(&["solve-neumann", "-c", &cfg, "-o", "out"], tmp.path()), exit::INFEASIBLE);
    let m = RunManifest::read(&tmp.path().join("out")).unwrap();
    assert_eq!(m.status, "infeasible");
    assert!(m.results["message"].as_str().unwrap().contains("q_min"));
}

#[test]
fn bad_config_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "a.toml", "n = 12\nbogus = 1\n");
    assert_eq!(sbp(&["solve-navier", "-c", &unknown], tmp.path()), exit::CONFIG);
    let p = write(tmp.path(), "b.toml", "p = 3.5\n");
    assert_eq!(sbp(&["solve-navier", "-c", &p], tmp.path()), exit::CONFIG);
    let sweep = write(tmp.path(), "s.toml", "[sweep]\naxis = \"p\"\np_values = []\n");
    assert_eq!(sbp(&["sweep", "-c", &sweep], tmp.path()), exit::CONFIG);
}

#[test]
fn output_root_prefixes_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Proc::new(env!("CARGO_BIN_EXE_sbp"))
        .args(["greens", "-o", "g"])
        .current_dir(tmp.path())
        .env("SBP_OUTPUT_ROOT", tmp.path().join("root"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(tmp.path().join("root/g/manifest.json").exists());
}

#[test]
fn p_sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config("n = 10\n[sweep]\naxis = \"p\"\np_values = [2.2, 2.6, 3.0]\nparallel = true\n").unwrap();
    let out = run(&Command::Sweep, &cfg, tmp.path());
    assert_eq!(out.exit_code, exit::OK, "{}", out.message);
    let mut rd = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (row, p) in rows.iter().zip(["2.2", "2.6", "3"]) {
        assert_eq!(&row[0], p);
        assert_eq!(&row[2], "ok");
    }
    for i in 0..3 {
        assert!(verify_digests(&tmp.path().join(format!("run_{i:03}"))).unwrap().is_empty());
    }
}

#[test]
fn symmetry_sweep_orders_frequencies() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "n = 10\nnonlinearity = false\n[charge]\nprofile = \"uncoupled\"\n\
                [sweep]\naxis = \"symmetry\"\nclasses = [\"none\", \"odd-x\", \"odd-xz\"]\n";
    let out = run(&Command::Sweep, &parse_config(text).unwrap(), tmp.path());
    assert_eq!(out.exit_code, exit::OK, "{}", out.message);
    let w: Vec<f64> = out.manifest.results["omega"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(w.len(), 3);
    let pi2 = std::f64::consts::PI.powi(2);
    for (got, k) in w.iter().zip([3.0, 6.0, 9.0]) {
        assert!((got - k * pi2).abs() / (k * pi2) < 1e-6, "{got} vs {}", k * pi2);
    }
    assert_eq!(out.manifest.results["omega_nondecreasing"], true);
}

#[test]
fn gn_probe_and_excited_commands_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config("n = 10\n[gn_probe]\nsamples = 12\nresolutions = [8, 12]\n").unwrap();
    let out = run(&Command::GnProbe, &cfg, &tmp.path().join("gn"));
    assert_eq!(out.exit_code, exit::OK, "{}", out.message);
    assert_eq!(out.manifest.results["resolutions"].as_array().unwrap().len(), 2);

    let cfg = parse_config("n = 10\n[charge]\nprofile = \"uncoupled\"\n").unwrap();
    let out = run(&Command::Excited, &cfg, &tmp.path().join("ex"));
    assert_eq!(out.exit_code, exit::OK, "{}", out.message);
    let states = out.manifest.results["states"].as_array().unwrap();
    assert_eq!(states.len(), 2);
    assert!(states[1]["J"].as_f64().unwrap() >= states[0]["J"].as_f64().unwrap());
}

#[test]
fn emitted_config_round_trips() {
    let text = "lengths = [2.0, 1.0, 1.0]\nn = 12\ncase = \"neumann\"\np = 2.8\na = 0.5\n\
                [[flux]]\naxis = 2\nside = 0\nh1 = 0.3\n";
    let cfg = parse_config(text).unwrap();
    let again = parse_config(&emit_config(&cfg)).unwrap();
    assert_eq!(emit_config(&cfg), emit_config(&again));
    assert_eq!(again.n, 12);
    assert_eq!(again.flux.len(), 1);
}
