//! `clqr`: build, extend, check and draw explicit constrained LQR atlases.
//!
//! Exit codes: 0 success, 1 a verified property failed, 2 unreadable or
//! invalid input, 3 numerical failure, 4 atlases from different problems,
//! 5 plotting requested for a state dimension other than two.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clqr::enumerate::EnumerationOptions;
use clqr::export::{export_svg, SvgOptions};
use clqr::sim::{mpc_closed_loop, open_loop};
use clqr::tol::Tolerances;
use clqr::verify::verify_pair;
use clqr::{Atlas, Error, ProblemSpec, Setup};
use nalgebra::DVector;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "clqr", version, about = "Explicit constrained LQR atlases")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the atlas for one horizon.
    Solve {
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Build by extending a shorter-horizon atlas instead of the full tree.
        #[arg(long)]
        extend_from: Option<PathBuf>,
        #[command(flatten)]
        enumeration: EnumerationArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Extend an atlas by one or more stages.
    Extend {
        #[arg(long)]
        extend_from: PathBuf,
        /// Target horizon; defaults to one more than the input atlas.
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        enumeration: EnumerationArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Persistence between atlases for horizons N and N+1.
    Persist {
        atlas: PathBuf,
        next: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Open-loop or receding-horizon simulation, written as CSV.
    Simulate {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        /// Number of steps; defaults to three times the horizon.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        mpc: bool,
        /// CSV file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Region and optimal input at a state.
    Locate {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
    },
    /// Draw a planar atlas.
    ExportSvg {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        labels: bool,
        #[arg(long)]
        no_terminal: bool,
    },
    /// Run the invariant suite on atlases for horizons N and N+1.
    Verify {
        atlas: PathBuf,
        next: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EnumerationArgs {
    #[arg(long)]
    tol_margin: Option<f64>,
    #[arg(long)]
    tol_tightness: Option<f64>,
    #[arg(long)]
    tol_feasibility: Option<f64>,
    /// Keep lower-dimensional regions as regions.
    #[arg(long)]
    include_degenerate: bool,
}

struct Failure {
    code: u8,
    msg: String,
}

type CliResult<T> = std::result::Result<T, Failure>;

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

/// Errors while reading inputs.
fn input(stage: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::FingerprintMismatch => fail(4, format!("{stage}: {e}")),
        _ => fail(2, format!("{stage}: {e}")),
    }
}

/// Errors while computing.
fn numeric(stage: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::FingerprintMismatch => fail(4, format!("{stage}: {e}")),
        Error::HorizonMismatch { .. } => fail(2, format!("{stage}: {e}")),
        _ => fail(3, format!("{stage}: {e}")),
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| fail(2, format!("{}: {e}", path.display()))
}

impl EnumerationArgs {
    fn options(&self) -> CliResult<EnumerationOptions> {
        let mut tol = Tolerances::default();
        for (name, v, slot) in [
            ("--tol-margin", self.tol_margin, &mut tol.margin),
            ("--tol-tightness", self.tol_tightness, &mut tol.tightness),
            ("--tol-feasibility", self.tol_feasibility, &mut tol.feasibility),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(fail(2, format!("{name} must be positive")));
                }
                *slot = v;
            }
        }
        Ok(EnumerationOptions { tol, include_degenerate: self.include_degenerate })
    }
}

fn load_atlas(path: &Path) -> CliResult<Atlas> {
    Atlas::load(path).map_err(|e| input("loading atlas")(e).prefixed(path))
}

impl Failure {
    fn prefixed(mut self, path: &Path) -> Self {
        self.msg = format!("{} ({})", self.msg, path.display());
        self
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| fail(3, e.to_string()))?;
    fs::write(path, text + "\n").map_err(io(path))
}

fn write_outputs(atlas: &Atlas, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(io(out))?;
    let path = out.join(format!("atlas_{}.json", atlas.horizon));
    atlas.save(&path).map_err(numeric("writing atlas"))?;
    write_json(&out.join("report.json"), &atlas.report)?;
    let r = atlas.report.as_ref();
    println!(
        "horizon {}: {} regions, {} boundary sets, {} candidates tested -> {}",
        atlas.horizon,
        atlas.regions.len(),
        atlas.boundary_sets.len(),
        r.map_or(0, |r| r.candidates_tested),
        path.display()
    );
    Ok(())
}

fn extend_to(mut atlas: Atlas, horizon: Option<usize>, opts: &EnumerationOptions) -> CliResult<Atlas> {
    let target = horizon.unwrap_or(atlas.horizon + 1);
    if target <= atlas.horizon {
        return Err(fail(2, format!("target horizon {target} is not above {}", atlas.horizon)));
    }
    while atlas.horizon < target {
        atlas = atlas.extend(opts).map_err(numeric("extension"))?;
    }
    Ok(atlas)
}

fn state(v: &[f64], atlas: &Atlas) -> CliResult<DVector<f64>> {
    let n = atlas.setup.spec.n();
    if v.len() != n {
        return Err(fail(2, format!("state has {} entries, expected {n}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PersistOutput {
    horizon: usize,
    persistent: Vec<String>,
    persistent_without_form: Vec<String>,
    next_horizon: usize,
    next_persistent_form: Vec<String>,
    next_generators: Vec<String>,
    next_outmost: Vec<String>,
    next_missing_offspring: Vec<String>,
    converged: bool,
    samples: usize,
    max_law_deviation: f64,
    violations: Vec<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LocateOutput {
    tuple: Option<String>,
    input: Option<Vec<f64>>,
    first_move: Option<Vec<f64>>,
    feasible: bool,
}

fn names(v: &[clqr::ActiveSetTuple]) -> Vec<String> {
    v.iter().map(|t| t.to_string()).collect()
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.cmd {
        Command::Solve { problem, horizon, extend_from, enumeration, out } => {
            let opts = enumeration.options()?;
            let atlas = match (extend_from, problem) {
                (Some(prev), _) => extend_to(load_atlas(&prev)?, horizon, &opts)?,
                (None, Some(p)) => {
                    let n = horizon.ok_or_else(|| fail(2, "--horizon is required"))?;
                    if n == 0 {
                        return Err(fail(2, "--horizon must be at least 1"));
                    }
                    let spec = ProblemSpec::load(&p).map_err(|e| input("reading problem")(e).prefixed(&p))?;
                    let setup = Setup::new(spec).map_err(numeric("terminal set"))?;
                    Atlas::solve(&setup, n, &opts).map_err(numeric("enumeration"))?
                }
                (None, None) => return Err(fail(2, "either --problem or --extend-from is required")),
            };
            write_outputs(&atlas, &out)?;
        }
        Command::Extend { extend_from, horizon, enumeration, out } => {
            let opts = enumeration.options()?;
            let atlas = extend_to(load_atlas(&extend_from)?, horizon, &opts)?;
            write_outputs(&atlas, &out)?;
        }
        Command::Persist { atlas, next, samples, seed, out } => {
            let a = load_atlas(&atlas)?;
            let b = load_atlas(&next)?;
            let rep = a.check_persistence(&b, samples, seed).map_err(numeric("persistence"))?;
            let pn = b.build_pn().map_err(numeric("persistent set"))?;
            let converged = a.converged(&b).map_err(numeric("convergence"))?;
            let o = PersistOutput {
                horizon: a.horizon,
                persistent: rep.persistent.clone(),
                persistent_without_form: rep.persistent_without_form.clone(),
                next_horizon: b.horizon,
                next_persistent_form: names(&pn.members),
                next_generators: names(&pn.generators),
                next_outmost: names(&pn.outmost),
                next_missing_offspring: names(&pn.missing_offspring),
                converged,
                samples: rep.samples,
                max_law_deviation: rep.max_law_deviation,
                violations: rep.violations.iter().map(|v| format!("{}: {}", v.tuple, v.reason)).collect(),
            };
            fs::create_dir_all(&out).map_err(io(&out))?;
            let path = out.join(format!("persistence_{}.json", a.horizon));
            write_json(&path, &o)?;
            println!(
                "horizon {}: {} persistent; horizon {}: {} persistent-form, converged {} -> {}",
                a.horizon,
                o.persistent.len(),
                b.horizon,
                o.next_persistent_form.len(),
                converged,
                path.display()
            );
            if !o.violations.is_empty() {
                return Err(fail(3, format!("persistence violated: {}", o.violations.join("; "))));
            }
        }
        Command::Simulate { atlas, x0, steps, mpc, out } => {
            let a = load_atlas(&atlas)?;
            let x = state(&x0, &a)?;
            let k = steps.unwrap_or(3 * a.horizon);
            let traj = if mpc { mpc_closed_loop(&a, &x, k) } else { open_loop(&a, &x, k) };
            let csv = traj.map_err(numeric("simulation"))?.to_csv();
            match out {
                Some(p) => fs::write(&p, csv).map_err(io(&p))?,
                None => print!("{csv}"),
            }
        }
        Command::Locate { atlas, x } => {
            let a = load_atlas(&atlas)?;
            let x = state(&x, &a)?;
            let o = match a.locate(&x) {
                Some(r) => {
                    let u = r.law.input(&x);
                    LocateOutput {
                        tuple: Some(r.active_set.to_string()),
                        first_move: Some(u.rows(0, a.qp.m).iter().copied().collect()),
                        input: Some(u.iter().copied().collect()),
                        feasible: true,
                    }
                }
                None => LocateOutput { tuple: None, input: None, first_move: None, feasible: a.in_domain(&x) },
            };
            println!("{}", serde_json::to_string_pretty(&o).map_err(|e| fail(3, e.to_string()))?);
        }
        Command::ExportSvg { atlas, out, labels, no_terminal } => {
            let a = load_atlas(&atlas)?;
            if a.setup.spec.n() != 2 {
                return Err(fail(5, format!("SVG export needs a planar state, got n = {}", a.setup.spec.n())));
            }
            let opts = SvgOptions { label_regions: labels, show_terminal: !no_terminal, ..Default::default() };
            let svg = export_svg(&a, &opts).map_err(numeric("export"))?;
            fs::write(&out, svg).map_err(io(&out))?;
            println!("{} regions -> {}", a.regions.len(), out.display());
        }
        Command::Verify { atlas, next, samples, seed, out } => {
            let a = load_atlas(&atlas)?;
            let b = load_atlas(&next)?;
            let rep = verify_pair(&a, &b, samples, seed).map_err(numeric("verification"))?;
            for p in &rep.properties {
                println!("{}", p.line());
                for d in p.details.iter().filter(|_| !p.passed) {
                    println!("    {d}");
                }
            }
            if let Some(path) = out {
                write_json(&path, &rep)?;
            }
            if !rep.passed() {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("clqr: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
