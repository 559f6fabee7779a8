//! Jacobi-preconditioned conjugate gradients for the SPD, strictly
//! diagonally dominant systems produced by the semi-implicit step.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, SparseOperator};

#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
}

impl std::fmt::Display for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}, converged: {}",
            self.iterations, self.final_relative_residual, self.converged
        )
    }
}

pub const DEFAULT_TOL: f64 = 1e-12;

pub fn default_max_iter(n: usize) -> usize {
    10 * n
}

/// Solve S x = b for SPD S to a relative residual ||Sx - b|| / ||b|| <= tol,
/// starting from x0 (pass zeros when no better guess exists).
pub fn solve_spd(
    s: &SparseOperator,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = s.dim();
    if b.len() != n || x0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "system dimension {n} does not match rhs {} / guess {}",
            b.len(),
            x0.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("solver tolerance must be positive, got {tol}")));
    }

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            final_relative_residual: 0.0,
            converged: true,
        };
        return Ok((vec![0.0; n], report));
    }

    let diag = s.diagonal();
    if let Some(row) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "matrix diagonal must be positive for the Jacobi preconditioner; row {row} has {}",
            diag[row]
        )));
    }

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    s.matvec(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }

    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let mut iterations = 0;
    let mut res = norm2(&r) / b_norm;
    while res > tol {
        if iterations >= max_iter {
            return Err(Error::SolverDiverged {
                report: SolveReport {
                    iterations,
                    final_relative_residual: res,
                    converged: false,
                },
            });
        }
        s.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not positive definite: p'Sp = {pq}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        res = norm2(&r) / b_norm;
    }

    Ok((
        x,
        SolveReport {
            iterations,
            final_relative_residual: res,
            converged: true,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{diffusion_fem, stiffness, system_matrix};
    use crate::fespace::{lumped_mass, nodal_interpolate};
    use crate::mesh::{Diagonal, Mesh};
    use crate::sparse::CsrPattern;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    #[test]
    fn two_by_two_row_sums() {
        let pattern = Arc::new(CsrPattern::from_adjacency(vec![vec![0, 1], vec![0, 1]]));
        let mut s = SparseOperator::zeros(Arc::clone(&pattern));
        for (r, c, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)] {
            let slot = pattern.slot(r, c).unwrap();
            s.values_mut()[slot] = v;
        }
        let (x, rep) = solve_spd(&s, &[1.0, 1.0], &[0.0, 0.0], 1e-14, 100).unwrap();
        assert!(rep.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_system_converges_in_one_iteration() {
        let pattern = Arc::new(CsrPattern::from_adjacency(vec![vec![0], vec![1], vec![2]]));
        let mut s = SparseOperator::zeros(Arc::clone(&pattern));
        for (i, v) in [3.0, 5.0, 7.0].iter().enumerate() {
            let slot = pattern.slot(i, i).unwrap();
            s.values_mut()[slot] = *v;
        }
        let (x, rep) = solve_spd(&s, &[3.0, 10.0, 21.0], &[0.0; 3], 1e-13, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 1.0).abs() < 1e-13);
        assert!((x[1] - 2.0).abs() < 1e-13);
        assert!((x[2] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let pattern = Arc::new(CsrPattern::from_adjacency(vec![vec![0]]));
        let mut s = SparseOperator::zeros(Arc::clone(&pattern));
        s.values_mut()[0] = 1.0;
        let (x, rep) = solve_spd(&s, &[0.0], &[5.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn max_iter_exceeded_carries_report() {
        let pattern = Arc::new(CsrPattern::from_adjacency(vec![vec![0, 1], vec![0, 1]]));
        let mut s = SparseOperator::zeros(Arc::clone(&pattern));
        for (r, c, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)] {
            let slot = pattern.slot(r, c).unwrap();
            s.values_mut()[slot] = v;
        }
        match solve_spd(&s, &[1.0, -2.0], &[0.0, 0.0], 1e-16, 0) {
            Err(Error::SolverDiverged { report }) => assert!(!report.converged),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn paper_parameter_system_solves_tightly() {
        let mesh = Mesh::build_rect(-10.0, 10.0, -10.0, 10.0, 20, 20, Diagonal::SwNe).unwrap();
        let mass = lumped_mass(&mesh);
        let k_geo = stiffness(&mesh);
        let n = nodal_interpolate(&mesh, crate::model::initial_gaussian(1.0)).unwrap();
        let a = diffusion_fem(&mesh, &n, 100).unwrap();
        let s = system_matrix(&mass, 1e-5, &a, 0.5, &k_geo).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let b: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, rep) =
            solve_spd(&s, &b, &vec![0.0; b.len()], DEFAULT_TOL, default_max_iter(b.len())).unwrap();
        assert!(rep.converged);
        assert!(rep.final_relative_residual <= 1e-12);

        let mut check = vec![0.0; b.len()];
        s.matvec(&x, &mut check);
        let err: f64 = check
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / bn <= 1e-12);
    }
}
