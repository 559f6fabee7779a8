//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 invariant violation under --strict (1 for anything else).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hsfem::assembly::{offdiag_sign_check, stiffness};
use hsfem::config::{parse_config, RunConfig, SweepParam, SweepSpec};
use hsfem::error::Error;
use hsfem::harness::{k_sweep, param_study, run_to_dir};
use hsfem::mesh::{Diagonal, Mesh};
use hsfem::output::write_mesh_vtk;

#[derive(Parser)]
#[command(
    name = "hsfem",
    about = "Mass-lumped P1 finite elements for nonlinear-diffusion tumour growth",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to a key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out` key).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Abort with exit code 4 when a monitored discrete property fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration to t_final.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter sweep (k sweeps produce the limit-metric table,
    /// the rest a front-position study).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter: alpha, nu, k, or P_max.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: String,
        /// Optional per-value nx (= ny) schedule for k sweeps.
        #[arg(long)]
        nx_values: Option<String>,
    },
    /// Report angle classification and the off-diagonal sign certificate.
    CheckMesh {
        /// Path to a key = value configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Optional VTK dump of the mesh.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::SolverDiverged { .. } => 3,
        Error::InvariantViolation { .. } => 4,
        _ => 1,
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = parse_config(&common.config)?;
    if common.strict {
        cfg.strict = true;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.output.dir = Some(dir.clone());
    Ok((cfg, dir))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { common } => {
            let (cfg, dir) = load(&common)?;
            let outcome = run_to_dir(&cfg, &dir)?;
            let last = outcome.records.last().expect("at least the initial record");
            println!(
                "completed {} steps to t = {}; density in [{:.3e}, {:.17}], mass {:.12}",
                outcome.final_state.step, outcome.final_state.t, last.min_n, last.max_n, last.mass
            );
            println!(
                "h4_min = {:e}, initial clamps = {}, snaps = {}, energy flagged = {}",
                outcome.h4_min, outcome.initial_clamped, outcome.total_snaps, outcome.energy_flagged
            );
            println!("artifacts in {}", dir.display());
            if outcome.abort.is_some() {
                // run_to_dir surfaces aborts as errors; this is unreachable,
                // but keep the contract obvious
                return Err(Error::InvalidArgument("aborted run".into()));
            }
            Ok(())
        }
        Command::Sweep {
            common,
            param,
            values,
            nx_values,
        } => {
            let (base, dir) = load(&common)?;
            let param = SweepParam::parse(&param)?;
            let values: Vec<f64> = values
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad sweep value `{s}`")))
                })
                .collect::<Result<_, _>>()?;
            let nx_schedule = match nx_values {
                None => None,
                Some(raw) => Some(
                    raw.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<usize>()
                                .map_err(|_| Error::Config(format!("bad nx value `{s}`")))
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            let spec = SweepSpec {
                param,
                values,
                base,
                nx_schedule,
            };
            if param == SweepParam::K {
                let result = k_sweep(&spec, &dir)?;
                println!("k sweep at t* = {}:", result.t_star);
                println!("k,h,complementarity,grad_p,max_diff_n,max_diff_p");
                for r in &result.rows {
                    println!(
                        "{},{:.6},{:.6e},{:.6e},{:.6e},{:.6e}",
                        r.k, r.h, r.complementarity, r.grad_p, r.max_diff_n, r.max_diff_p
                    );
                }
            } else {
                let result = param_study(&spec, &dir)?;
                println!("param,value,t,front_radius");
                for row in &result.rows {
                    println!(
                        "{},{},{},{}",
                        param.name(),
                        row.value,
                        row.t,
                        row.front_radius
                    );
                }
            }
            println!("tables in {}", dir.display());
            Ok(())
        }
        Command::CheckMesh { config, dump } => {
            let cfg = parse_config(&config)?;
            let mesh = Mesh::build_rect(
                cfg.mesh.x0,
                cfg.mesh.x1,
                cfg.mesh.y0,
                cfg.mesh.y1,
                cfg.mesh.nx,
                cfg.mesh.ny,
                Diagonal::SwNe,
            )?;
            let rep = mesh.angle_report();
            println!(
                "nodes = {}, elements = {}, h_leg = {:?}, h_diameter = {:.9}",
                mesh.num_nodes(),
                mesh.num_elements(),
                mesh.h_leg(),
                mesh.h_diameter()
            );
            println!(
                "all_right_angled = {}, all_nonobtuse = {}, max_angle = {:.12} rad",
                rep.all_right_angled, rep.all_nonobtuse, rep.max_angle
            );
            let k = stiffness(&mesh);
            let sign = offdiag_sign_check(&k);
            println!(
                "stiffness max off-diagonal = {:.3e}, violations = {}",
                sign.max_offdiag,
                sign.violations.len()
            );
            if let Some(path) = dump {
                write_mesh_vtk(&mesh, &path)?;
                println!("mesh written to {}", path.display());
            }
            Ok(())
        }
    }
}
