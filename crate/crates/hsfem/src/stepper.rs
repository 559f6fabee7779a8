//! Semi-implicit time integration: diffusion coefficients and growth frozen
//! at the current step, diffusion unknowns implicit, one SPD solve per step.
//!
//! The linear system of a step is solved in increment form, S (n' - n) =
//! M.G(p(n)).n - (A + nu K) n, which is the same Krylov iteration as warm
//! starting the full system at n and keeps the discrete mass-balance
//! identity conditioned on the reaction scale rather than on diag(M)/tau.

use crate::assembly::{diffusion_fem, diffusion_fem2, system_matrix, Fem2Quadrature};
use crate::config::{InitialDatum, RunConfig, Scheme};
use crate::diagnostics::{
    complementarity_residual, dmp_check, gradient_bound_metrics, h4_residual, DiagnosticsRecord,
    EnergyTracker, DMP_TOL,
};
use crate::error::{Error, Result};
use crate::fespace::{inner_h, lumped_mass, nodal_interpolate, Field, LumpedMass};
use crate::mesh::{Diagonal, Mesh};
use crate::model::{growth, initial_gaussian, pressure, ModelParams};
use crate::solver::{solve_spd, SolveReport};
use crate::sparse::SparseOperator;

/// Values in (-SNAP_EPS, 0) after a solve are snapped to zero before the
/// next coefficient evaluation, keeping n^(k-1) real.
pub const SNAP_EPS: f64 = 1e-13;

/// Discrete state at one time level.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub n: Field,
    /// Nodal pressure p(n[a], k).
    pub p: Field,
}

impl SimState {
    pub fn new(params: &ModelParams, n: Field, t: f64, step: usize) -> Result<SimState> {
        let k = params.k;
        let p = n.map(|v| {
            pressure(v.max(0.0), k).expect("nonnegative density has a pressure")
        });
        Ok(SimState { t, step, n, p })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub scheme: Scheme,
    pub fem2_quadrature: Fem2Quadrature,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

/// Everything produced by one step besides the new state.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: SimState,
    pub solve: SolveReport,
    pub snaps: usize,
    pub min_dtn: f64,
    pub mass_balance_residual: f64,
    /// (A_D(n^m) n^{m+1}, n^{m+1}) for the energy inequality.
    pub diff_quad: f64,
    /// nu (K n^{m+1}, n^{m+1}).
    pub visc_quad: f64,
}

/// Stepper bound to one mesh and parameter set.
pub struct Stepper<'a> {
    pub mesh: &'a Mesh,
    pub mass: &'a LumpedMass,
    pub stiffness: &'a SparseOperator,
    pub params: &'a ModelParams,
    pub opts: StepOptions,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: &'a Mesh,
        mass: &'a LumpedMass,
        stiffness: &'a SparseOperator,
        params: &'a ModelParams,
        opts: StepOptions,
    ) -> Stepper<'a> {
        Stepper {
            mesh,
            mass,
            stiffness,
            params,
            opts,
        }
    }

    /// One step of the scheme selected in the options.
    pub fn step(&self, state: &SimState) -> Result<StepOutput> {
        let a_diff = match self.opts.scheme {
            Scheme::Fem => diffusion_fem(self.mesh, &state.n, self.params.k)?,
            Scheme::Fem2 => diffusion_fem2(
                self.mesh,
                &state.n,
                self.params.k,
                self.opts.fem2_quadrature,
            )?,
        };
        let reaction = self.reaction(&state.n)?;
        self.advance(state, &a_diff, &reaction)
    }

    /// Nodal reaction term G(p(n[a])) n[a].
    pub fn reaction(&self, n: &Field) -> Result<Vec<f64>> {
        n.values()
            .iter()
            .map(|&v| {
                let p = pressure(v, self.params.k)?;
                Ok(growth(p, &self.params.growth, self.params.p_max) * v)
            })
            .collect()
    }

    /// Advance one step with a caller-supplied diffusion operator and nodal
    /// reaction vector (the building block of both schemes; also drives
    /// verification runs with the nonlinear weight or the growth disabled).
    pub fn advance(
        &self,
        state: &SimState,
        a_diff: &SparseOperator,
        reaction: &[f64],
    ) -> Result<StepOutput> {
        let n = state.n.values();
        let nn = n.len();
        if reaction.len() != nn {
            return Err(Error::InvalidArgument(format!(
                "reaction vector length {} does not match node count {nn}",
                reaction.len()
            )));
        }
        let tau = self.params.tau;
        let nu = self.params.nu;
        let s = system_matrix(self.mass, tau, a_diff, nu, self.stiffness)?;

        // increment right-hand side: M.r - (A + nu K) n
        let a_n = a_diff.apply(n);
        let k_n = self.stiffness.apply(n);
        let mut rhs = vec![0.0; nn];
        for a in 0..nn {
            rhs[a] = self.mass.diag()[a] * reaction[a] - a_n[a] - nu * k_n[a];
        }

        let (increment, solve) = solve_spd(
            &s,
            &rhs,
            &vec![0.0; nn],
            self.opts.solver_tol,
            self.opts.solver_max_iter,
        )?;

        let mut next_vals = vec![0.0; nn];
        let mut snaps = 0;
        for a in 0..nn {
            let mut v = n[a] + increment[a];
            if v < 0.0 && v > -SNAP_EPS {
                v = 0.0;
                snaps += 1;
            }
            next_vals[a] = v;
        }

        let mut min_dtn = f64::INFINITY;
        let mut mass_flux = 0.0;
        let mut reaction_flux = 0.0;
        for a in 0..nn {
            let dtn = (next_vals[a] - n[a]) / tau;
            min_dtn = min_dtn.min(dtn);
            mass_flux += self.mass.diag()[a] * dtn;
            reaction_flux += self.mass.diag()[a] * reaction[a];
        }

        let next = Field::from_values(self.mesh, next_vals)?;
        let diff_quad = a_diff.quad_form(next.values());
        let visc_quad = nu * self.stiffness.quad_form(next.values());
        let state = SimState::new(self.params, next, state.t + tau, state.step + 1)?;

        Ok(StepOutput {
            state,
            solve,
            snaps,
            min_dtn,
            mass_balance_residual: (mass_flux - reaction_flux).abs(),
            diff_quad,
            visc_quad,
        })
    }
}

/// Trajectory summary of a completed (or aborted) run.
#[derive(Debug)]
pub struct RunOutcome {
    /// The mesh the run was integrated on (fields in this outcome belong
    /// to it).
    pub mesh: Mesh,
    pub final_state: SimState,
    pub records: Vec<DiagnosticsRecord>,
    /// Minimum entry of the initial residual vector (the discrete
    /// monotonicity precondition measured, not assumed).
    pub h4_min: f64,
    /// Nodes clamped when projecting the initial datum into [0, N_max].
    pub initial_clamped: usize,
    pub total_snaps: usize,
    pub energy_flagged: bool,
    /// Set when a step failed; the fields above hold the last good state.
    pub abort: Option<AbortInfo>,
}

#[derive(Debug)]
pub struct AbortInfo {
    pub step: usize,
    pub error: Error,
}

/// Run a configuration to t_final, producing one diagnostics record per step.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    run_observed(cfg, |_, _| {})
}

/// Like [`run`], invoking the observer after the initial state and after
/// every completed step.
pub fn run_observed(
    cfg: &RunConfig,
    mut observer: impl FnMut(&Mesh, &SimState),
) -> Result<RunOutcome> {
    cfg.validate()?;
    let mesh = Mesh::build_rect(
        cfg.mesh.x0,
        cfg.mesh.x1,
        cfg.mesh.y0,
        cfg.mesh.y1,
        cfg.mesh.nx,
        cfg.mesh.ny,
        Diagonal::SwNe,
    )?;
    let angles = mesh.angle_report();
    match cfg.scheme {
        Scheme::Fem if !angles.all_right_angled => {
            return Err(Error::UnsupportedMesh(
                "scheme `fem` requires a right-angled mesh".into(),
            ))
        }
        Scheme::Fem2 if !angles.all_nonobtuse => {
            return Err(Error::UnsupportedMesh(
                "scheme `fem2` requires a nonobtuse mesh".into(),
            ))
        }
        _ => {}
    }

    let mass = lumped_mass(&mesh);
    let stiffness = crate::assembly::stiffness(&mesh);
    let params = &cfg.model;
    let bound = params.n_max();

    let raw = match cfg.initial {
        InitialDatum::Gaussian => nodal_interpolate(&mesh, initial_gaussian(params.alpha))?,
        InitialDatum::Constant(c) => Field::constant(&mesh, c),
    };
    let n0 = raw.map(|v| v.clamp(0.0, bound));
    let initial_clamped = raw
        .values()
        .iter()
        .filter(|&&v| v < 0.0 || v > bound)
        .count();

    let (_, h4_min) = h4_residual(&n0, params, &mass, &stiffness)?;

    let opts = StepOptions {
        scheme: cfg.scheme,
        fem2_quadrature: cfg.fem2_quadrature,
        solver_tol: cfg.solver.tol,
        solver_max_iter: cfg.solver.max_iter_factor * mesh.num_nodes(),
    };
    let stepper = Stepper::new(&mesh, &mass, &stiffness, params, opts);

    let mut energy = EnergyTracker::new(&mass, &n0, params)?;
    let mut state = SimState::new(params, n0, 0.0, 0)?;

    let one = Field::constant(&mesh, 1.0);
    let (_, grad_p0) = gradient_bound_metrics(&state.n, params.k, &stiffness)?;
    let mut last_complementarity =
        complementarity_residual(&state.n, params, &mass, &stiffness)?;
    let e0 = energy.initial_energy();
    let mut records = vec![DiagnosticsRecord {
        t: 0.0,
        step: 0,
        min_n: state.n.min(),
        max_n: state.n.max(),
        min_dtn: 0.0,
        mass: inner_h(&mass, &state.n, &one)?,
        mass_balance_residual: 0.0,
        energy_lhs: e0,
        energy_rhs: e0,
        grad_p_norm: grad_p0,
        complementarity: last_complementarity,
        h4_min: Some(h4_min),
        snaps: 0,
    }];
    observer(&mesh, &state);

    let steps = cfg.steps();
    let mut total_snaps = 0;
    let mut energy_flagged = false;
    let monotonicity_applies = h4_min >= -1e-12;
    let monotonicity_slack = -1e-10 * bound / params.tau;
    let mut abort = None;

    for m in 1..=steps {
        let out = match stepper.step(&state) {
            Ok(out) => out,
            Err(error) => {
                abort = Some(AbortInfo { step: m, error });
                break;
            }
        };
        let t = m as f64 * params.tau;
        total_snaps += out.snaps;

        let (lhs, rhs, flagged) = energy.update(
            &mass,
            &out.state.n,
            out.diff_quad,
            out.visc_quad,
            params.tau,
            t,
        )?;
        let flagged = flagged && cfg.energy_check;
        energy_flagged |= flagged;

        if m % cfg.complementarity_every == 0 || m == steps {
            last_complementarity =
                complementarity_residual(&out.state.n, params, &mass, &stiffness)?;
        }
        let (_, grad_p) = gradient_bound_metrics(&out.state.n, params.k, &stiffness)?;
        let mass_total = inner_h(&mass, &out.state.n, &one)?;

        let record = DiagnosticsRecord {
            t,
            step: m,
            min_n: out.state.n.min(),
            max_n: out.state.n.max(),
            min_dtn: out.min_dtn,
            mass: mass_total,
            mass_balance_residual: out.mass_balance_residual,
            energy_lhs: lhs,
            energy_rhs: rhs,
            grad_p_norm: grad_p,
            complementarity: last_complementarity,
            h4_min: None,
            snaps: out.snaps,
        };

        if cfg.strict {
            let dmp = dmp_check(&out.state.n, params.k, params.p_max);
            let mut what = None;
            if !dmp.ok() {
                what = Some(format!(
                    "{} nodes outside [0 - {DMP_TOL:e}, N_max + {DMP_TOL:e}]",
                    dmp.violations.len()
                ));
            } else if record.mass_balance_residual > 1e-9 * record.mass.max(f64::MIN_POSITIVE) {
                what = Some(format!(
                    "mass balance residual {:e} exceeds 1e-9 * mass",
                    record.mass_balance_residual
                ));
            } else if flagged {
                what = Some(format!("energy inequality flagged: lhs {lhs:e} > rhs {rhs:e} + 5%"));
            } else if monotonicity_applies && record.min_dtn < monotonicity_slack {
                what = Some(format!(
                    "monotonicity violated: min dt n = {:e} below slack {:e}",
                    record.min_dtn, monotonicity_slack
                ));
            }
            if let Some(what) = what {
                records.push(record);
                abort = Some(AbortInfo {
                    step: m,
                    error: Error::InvariantViolation { step: m, t, what },
                });
                break;
            }
        }

        records.push(record);
        state = out.state;
        observer(&mesh, &state);
    }

    Ok(RunOutcome {
        mesh,
        final_state: state,
        records,
        h4_min,
        initial_clamped,
        total_snaps,
        energy_flagged,
        abort,
    })
}
