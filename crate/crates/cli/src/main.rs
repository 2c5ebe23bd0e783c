use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbp_cli::config::{parse_config, RunConfig};
use sbp_cli::manifest::RunManifest;
use sbp_cli::run::{exit, output_dir, run, Command};

#[derive(Parser)]
#[command(name = "sbp", version, about = "Schrödinger-Bopp-Podolsky ground states on a box")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the kernels and their radial energies.
    Greens(Common),
    /// Minimize on the sphere with an uncoupled potential.
    SolveNavier(Common),
    /// Minimize on the sphere and charge constraint with flux data.
    SolveNeumann(Common),
    /// Ground state plus symmetry-constrained excited states.
    Excited(Common),
    /// Re-check a stored run.
    Verify {
        /// Directory from a previous solve.
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample the interpolation-inequality ratio.
    GnProbe(Common),
    /// Solve over a list of exponents or symmetry classes.
    Sweep(Common),
}

fn load(path: Option<&Path>, fallback: Option<&Path>) -> Result<RunConfig, String> {
    let text = match (path, fallback) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
        (None, Some(dir)) => RunManifest::read(dir).map_err(|e| e.to_string())?.config,
        (None, None) => String::new(),
    };
    parse_config(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common, fallback) = match cli.command {
        Cmd::Greens(c) => (Command::Greens, c, None),
        Cmd::SolveNavier(c) => (Command::SolveNavier, c, None),
        Cmd::SolveNeumann(c) => (Command::SolveNeumann, c, None),
        Cmd::Excited(c) => (Command::Excited, c, None),
        Cmd::Verify { input, common } => (Command::Verify { input: input.clone() }, common, Some(input)),
        Cmd::GnProbe(c) => (Command::GnProbe, c, None),
        Cmd::Sweep(c) => (Command::Sweep, c, None),
    };
    let cfg = match load(common.config.as_deref(), fallback.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("sbp: configuration error: {e}");
            return ExitCode::from(exit::CONFIG as u8);
        }
    };
    let dir = output_dir(common.output.as_deref(), &cfg);
    let out = run(&cmd, &cfg, &dir);
    if out.exit_code == exit::OK {
        println!("{}: ok ({})", cmd.name(), out.dir.display());
    } else {
        eprintln!("sbp {}: {}", cmd.name(), out.message);
        for c in out.manifest.checks.iter().filter(|c| !c.pass) {
            eprintln!("  failed check {}: {:e} (tol {:?})", c.name, c.value, c.tol);
        }
    }
    ExitCode::from(out.exit_code as u8)
}
