//! 2D mass-lumped P1 finite-element simulator for a degenerate
//! nonlinear-diffusion tumour-growth model with active motion,
//!
//!   dn/dt - div(n grad p(n)) - nu Lap(n) = n G(p(n)),   p(n) = k/(k-1) n^(k-1),
//!
//! with homogeneous Neumann boundary data on a rectangle. The discretisation
//! uses closed-nodal (mass-lumped) integration on right-angled structured
//! triangulations, which makes the semi-implicit step an M-matrix solve, so
//! nodal values provably stay in [0, N_max(k)]. Every provable discrete
//! property (maximum principle, nodal monotonicity under a nonnegative
//! initial residual, mass balance, the energy inequality, uniform gradient
//! bounds) is verified at runtime, and a sweep harness quantifies the stiff
//! k -> infinity limit toward the Hele-Shaw free-boundary problem through a
//! complementarity residual.
//!
//! Crate layout follows the solver pipeline: [`mesh`] -> [`fespace`] ->
//! [`model`] -> [`assembly`] -> [`solver`] -> [`stepper`] -> [`diagnostics`],
//! with [`config`], [`output`] and [`harness`] wrapping it into the `hsfem`
//! command-line tool.

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fespace;
pub mod harness;
pub mod mesh;
pub mod model;
pub mod output;
pub mod solver;
pub mod sparse;
pub mod stepper;

pub use assembly::{
    diffusion_fem, diffusion_fem2, offdiag_sign_check, stiffness, system_matrix, Fem2Quadrature,
    OffdiagReport,
};
pub use config::{
    config_from_pairs, is_known_key, parse_config, parse_config_str, parse_config_with_env,
    parse_pairs, FieldFormat, InitialDatum, MeshSpec, RunConfig, Scheme, SweepParam, SweepSpec,
};
pub use diagnostics::{
    complementarity_residual, dmp_check, gradient_bound_metrics, h4_residual,
    monotonicity_check, DiagnosticsRecord, DmpReport,
};
pub use error::{Error, Result};
pub use fespace::{
    consistent_mass, discrete_laplacian, inner_h, inner_l2, interp_product_l1_error, lumped_mass,
    nodal_interpolate, norm_h, norm_l2, Field, LumpedMass,
};
pub use harness::{front_radius, k_sweep, param_study, run_to_dir, KSweepResult, StudyResult};
pub use mesh::{AngleReport, Diagonal, ElemGeom, GridInfo, Mesh};
pub use model::{
    density_of_pressure, growth, initial_gaussian, n_max, pressure, GrowthLaw, ModelParams,
};
pub use solver::{solve_spd, SolveReport};
pub use sparse::SparseOperator;
pub use stepper::{run, run_observed, RunOutcome, SimState, StepOptions, StepOutput, Stepper};
