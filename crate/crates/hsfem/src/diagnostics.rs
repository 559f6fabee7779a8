//! Runtime verification of the provable discrete properties: maximum
//! principle, nodal monotonicity, mass balance, the energy inequality, the
//! uniform gradient bounds, the initial-residual condition behind
//! monotonicity, and the complementarity residual that measures distance
//! from the stiff-limit free-boundary relation.

use crate::error::Result;
use crate::fespace::{discrete_laplacian, Field, LumpedMass};
use crate::model::{growth, pow_ki, pressure, ModelParams};
use crate::sparse::SparseOperator;

/// Per-step monitor values.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: usize,
    pub min_n: f64,
    pub max_n: f64,
    /// Minimal nodal forward difference quotient (n^{m} - n^{m-1}) / tau;
    /// zero on the initial record.
    pub min_dtn: f64,
    /// (n, 1)_h.
    pub mass: f64,
    /// |(dt n, 1)_h - (G(p(n^{m-1})) n^{m-1}, 1)_h|.
    pub mass_balance_residual: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    /// ||grad I_h(n^k)||_{L2}.
    pub grad_p_norm: f64,
    pub complementarity: f64,
    /// Minimum of the initial residual vector; present on the first record.
    pub h4_min: Option<f64>,
    /// Nodal round-off snaps applied after the step's solve.
    pub snaps: usize,
}

/// Nodal residual of the initial-positivity condition: R[a] =
/// -(K I_h(n0^k))[a] - nu (K n0)[a] + diag(M)[a] G(p(n0[a])) n0[a].
/// With lumped products the variational condition over nonnegative test
/// functions holds iff R >= 0 componentwise.
pub fn h4_residual(
    n0: &Field,
    params: &ModelParams,
    mass: &LumpedMass,
    stiffness: &SparseOperator,
) -> Result<(Vec<f64>, f64)> {
    mass.check_field(n0)?;
    let nk = n0.map(|v| pow_ki(v, params.k));
    let k_nk = stiffness.apply(nk.values());
    let k_n = stiffness.apply(n0.values());
    let mut residual = Vec::with_capacity(n0.len());
    let mut min = f64::INFINITY;
    for a in 0..n0.len() {
        let na = n0.values()[a];
        let p = pressure(na, params.k)?;
        let g = growth(p, &params.growth, params.p_max);
        let r = -k_nk[a] - params.nu * k_n[a] + mass.diag()[a] * g * na;
        min = min.min(r);
        residual.push(r);
    }
    Ok((residual, min))
}

/// Weighted l2 residual of p_h (Delta_h p_h + G(p_h)) with p_h = I_h(n^k),
/// the discrete counterpart of the limit relation p (Delta p + G(p)) = 0.
pub fn complementarity_residual(
    n: &Field,
    params: &ModelParams,
    mass: &LumpedMass,
    stiffness: &SparseOperator,
) -> Result<f64> {
    mass.check_field(n)?;
    let p_h = n.map(|v| pow_ki(v, params.k));
    let lap = discrete_laplacian(stiffness, mass, &p_h)?;
    let mut acc = 0.0;
    for a in 0..n.len() {
        let p = p_h.values()[a];
        let g = growth(p, &params.growth, params.p_max);
        let contrib = p * (lap.values()[a] + g);
        acc += mass.diag()[a] * contrib * contrib;
    }
    Ok(acc.sqrt())
}

/// Dirichlet seminorms (||grad n||, ||grad I_h(n^k)||) via the stiffness
/// quadratic form.
pub fn gradient_bound_metrics(
    n: &Field,
    k: u32,
    stiffness: &SparseOperator,
) -> Result<(f64, f64)> {
    if stiffness.dim() != n.len() {
        return Err(crate::error::Error::InvalidArgument(
            "stiffness dimension does not match field".into(),
        ));
    }
    let grad_n = stiffness.quad_form(n.values()).max(0.0).sqrt();
    let nk = n.map(|v| pow_ki(v, k));
    let grad_nk = stiffness.quad_form(nk.values()).max(0.0).sqrt();
    Ok((grad_n, grad_nk))
}

/// One out-of-bounds node.
#[derive(Debug, Clone, Copy)]
pub struct BoundViolation {
    pub node: usize,
    pub value: f64,
    /// How far past the admissible interval the value lies.
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct DmpReport {
    pub min_n: f64,
    pub max_n: f64,
    pub n_max_bound: f64,
    pub violations: Vec<BoundViolation>,
}

impl DmpReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const DMP_TOL: f64 = 1e-12;

/// Check 0 <= n <= N_max(k) nodally, with tolerance [`DMP_TOL`].
pub fn dmp_check(n: &Field, k: u32, p_max: f64) -> DmpReport {
    let bound = crate::model::n_max(k, p_max);
    let mut violations = Vec::new();
    for (a, &v) in n.values().iter().enumerate() {
        let excess = if v < -DMP_TOL {
            -v
        } else if v > bound + DMP_TOL {
            v - bound
        } else {
            continue;
        };
        violations.push(BoundViolation {
            node: a,
            value: v,
            magnitude: excess,
        });
    }
    DmpReport {
        min_n: n.min(),
        max_n: n.max(),
        n_max_bound: bound,
        violations,
    }
}

/// Minimal nodal (cur - prev)/tau.
pub fn monotonicity_check(prev: &Field, cur: &Field, tau: f64) -> Result<f64> {
    prev.same_mesh(cur)?;
    let mut min = f64::INFINITY;
    for (p, c) in prev.values().iter().zip(cur.values()) {
        min = min.min((c - p) / tau);
    }
    Ok(min)
}

/// Accumulates the discrete energy inequality along a trajectory:
/// 1/2 ||n^m||_h^2 + sum_{j<m} tau (A(n^j) n^{j+1}, n^{j+1}) + nu tau
/// (K n^{j+1}, n^{j+1}) <= exp(2 G(0) t_m) 1/2 ||n^0||_h^2, with 5% slack
/// for the left-rectangle time integral.
#[derive(Debug, Clone)]
pub struct EnergyTracker {
    half_norm0_sq: f64,
    g0: f64,
    dissipation: f64,
    pub slack: f64,
}

impl EnergyTracker {
    pub fn new(mass: &LumpedMass, n0: &Field, params: &ModelParams) -> Result<EnergyTracker> {
        let norm0_sq = crate::fespace::inner_h(mass, n0, n0)?;
        Ok(EnergyTracker {
            half_norm0_sq: 0.5 * norm0_sq,
            g0: params.growth_at_zero(),
            dissipation: 0.0,
            slack: 0.05,
        })
    }

    /// Fold in one completed step; returns (lhs, rhs, flagged).
    pub fn update(
        &mut self,
        mass: &LumpedMass,
        n_next: &Field,
        diff_quad: f64,
        visc_quad: f64,
        tau: f64,
        t_next: f64,
    ) -> Result<(f64, f64, bool)> {
        self.dissipation += tau * (diff_quad + visc_quad);
        let half_norm_sq = 0.5 * crate::fespace::inner_h(mass, n_next, n_next)?;
        let lhs = half_norm_sq + self.dissipation;
        let rhs = (2.0 * self.g0 * t_next).exp() * self.half_norm0_sq;
        Ok((lhs, rhs, lhs > rhs * (1.0 + self.slack)))
    }

    pub fn initial_energy(&self) -> f64 {
        self.half_norm0_sq
    }
}
