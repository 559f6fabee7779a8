//! Operator assembly: the geometric stiffness matrix, the divided-difference
//! diagonal diffusion operator (right-angled meshes), the scalar-weighted
//! diffusion operator (nonobtuse meshes), the semi-implicit system matrix,
//! and the off-diagonal sign certificate behind the discrete maximum
//! principle.
//!
//! Assembly is element-major in element index order with precomputed value
//! slots, so repeated assemblies are bitwise identical.

use crate::error::{Error, Result};
use crate::fespace::{Field, LumpedMass};
use crate::mesh::Mesh;
use crate::model::pow_ki;
use crate::sparse::SparseOperator;

/// Quadrature used for the n^(k-1) weight of the scalar-coefficient scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fem2Quadrature {
    /// Vertex average of n^(k-1); keeps the weight nonnegative and O(1) per
    /// element for any k.
    #[default]
    VertexAverage,
    /// n^(k-1) evaluated at the centroid value of n (sensitivity alternative).
    Centroid,
}

/// Geometric stiffness K[a,b] = (grad phi_a, grad phi_b).
pub fn stiffness(mesh: &Mesh) -> SparseOperator {
    let mut k = SparseOperator::zeros(mesh.pattern());
    let scatter = mesh.scatter();
    for e in 0..mesh.num_elements() {
        let g = &mesh.geometries()[e];
        let slots = &scatter[e];
        for i in 0..3 {
            for j in 0..3 {
                let v = g.area * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]);
                k.values_mut()[slots[i][j] as usize] += v;
            }
        }
    }
    k
}

/// Divided difference of x -> x^k between two nodal values. Near-equal
/// arguments switch to the mean-value limit k*((a+b)/2)^(k-1), which the
/// defining identity also satisfies there since the directional gradient of
/// n vanishes; the raw quotient would cancel catastrophically.
fn divided_difference_pow(a: f64, b: f64, k: u32) -> f64 {
    let gap = b - a;
    if gap.abs() < 1e-8 * a.abs().max(b.abs()).max(1.0) {
        k as f64 * pow_ki(0.5 * (a + b), k - 1)
    } else {
        (pow_ki(b, k) - pow_ki(a, k)) / gap
    }
}

fn check_nonnegative(n: &Field) -> Result<()> {
    if let Some(bad) = n.values().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "diffusion coefficients need a nonnegative density; node {bad} carries {}",
            n.values()[bad]
        )));
    }
    Ok(())
}

/// Diffusion operator of the divided-difference scheme: per element the
/// diagonal coefficient along axis i is (n^k(a_i) - n^k(a_0)) / (n(a_i) -
/// n(a_0)) with a_0 the right-angle vertex, so that A(n) n = K I_h(n^k)
/// rowwise.
pub fn diffusion_fem(mesh: &Mesh, n: &Field, k: u32) -> Result<SparseOperator> {
    n.check_mesh(mesh)?;
    check_nonnegative(n)?;
    if !mesh.angle_report().all_right_angled {
        return Err(Error::UnsupportedMesh(
            "the divided-difference diffusion operator requires a right-angled triangulation".into(),
        ));
    }
    let vals = n.values();
    let mut a = SparseOperator::zeros(mesh.pattern());
    let scatter = mesh.scatter();
    for (e, t) in mesh.elements().enumerate() {
        let g = &mesh.geometries()[e];
        let ra = g.right_angle.ok_or_else(|| {
            Error::UnsupportedMesh(format!(
                "element {e} has no axis-aligned right angle; the diagonal coefficient needs one"
            ))
        })?;
        let n0 = vals[t[ra.vertex as usize]];
        let dx = divided_difference_pow(n0, vals[t[ra.x_neighbor as usize]], k);
        let dy = divided_difference_pow(n0, vals[t[ra.y_neighbor as usize]], k);
        let slots = &scatter[e];
        for i in 0..3 {
            for j in 0..3 {
                let v = g.area
                    * (dx * g.grad[i][0] * g.grad[j][0] + dy * g.grad[i][1] * g.grad[j][1]);
                a.values_mut()[slots[i][j] as usize] += v;
            }
        }
    }
    Ok(a)
}

/// Diffusion operator of the scalar-coefficient scheme: per element a single
/// nonnegative weight w_K ~ k n^(k-1) multiplies the local stiffness, so
/// nonobtuse meshes keep the off-diagonal sign property.
pub fn diffusion_fem2(
    mesh: &Mesh,
    n: &Field,
    k: u32,
    quadrature: Fem2Quadrature,
) -> Result<SparseOperator> {
    n.check_mesh(mesh)?;
    check_nonnegative(n)?;
    if !mesh.angle_report().all_nonobtuse {
        return Err(Error::UnsupportedMesh(
            "the scalar-coefficient diffusion operator requires a nonobtuse triangulation".into(),
        ));
    }
    let vals = n.values();
    let kf = k as f64;
    let mut a = SparseOperator::zeros(mesh.pattern());
    let scatter = mesh.scatter();
    for (e, t) in mesh.elements().enumerate() {
        let g = &mesh.geometries()[e];
        let w = match quadrature {
            Fem2Quadrature::VertexAverage => {
                kf * (pow_ki(vals[t[0]], k - 1)
                    + pow_ki(vals[t[1]], k - 1)
                    + pow_ki(vals[t[2]], k - 1))
                    / 3.0
            }
            Fem2Quadrature::Centroid => {
                kf * pow_ki((vals[t[0]] + vals[t[1]] + vals[t[2]]) / 3.0, k - 1)
            }
        };
        let slots = &scatter[e];
        for i in 0..3 {
            for j in 0..3 {
                let v = w * g.area * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]);
                a.values_mut()[slots[i][j] as usize] += v;
            }
        }
    }
    Ok(a)
}

/// Off-diagonal sign certificate.
#[derive(Debug, Clone)]
pub struct OffdiagReport {
    pub max_offdiag: f64,
    /// Entries exceeding 1e-14, as (row, col, value).
    pub violations: Vec<(usize, usize, f64)>,
}

pub fn offdiag_sign_check(a: &SparseOperator) -> OffdiagReport {
    let mut max_offdiag = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    a.for_each_entry(|r, c, v| {
        if r != c {
            if v > max_offdiag {
                max_offdiag = v;
            }
            if v > 1e-14 {
                violations.push((r, c, v));
            }
        }
    });
    if max_offdiag == f64::NEG_INFINITY {
        max_offdiag = 0.0;
    }
    OffdiagReport {
        max_offdiag,
        violations,
    }
}

/// System matrix of one semi-implicit step: S = diag(M)/tau + A_diff + nu K.
pub fn system_matrix(
    mass: &LumpedMass,
    tau: f64,
    a_diff: &SparseOperator,
    nu: f64,
    stiffness: &SparseOperator,
) -> Result<SparseOperator> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be nonnegative, got {nu}")));
    }
    if a_diff.dim() != mass.diag().len() || stiffness.dim() != mass.diag().len() {
        return Err(Error::InvalidArgument(format!(
            "system dimensions disagree: mass {}, diffusion {}, stiffness {}",
            mass.diag().len(),
            a_diff.dim(),
            stiffness.dim()
        )));
    }
    let mut s = a_diff.add_scaled(nu, stiffness)?;
    let scaled: Vec<f64> = mass.diag().iter().map(|m| m / tau).collect();
    s.add_diagonal(&scaled)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{lumped_mass, nodal_interpolate};
    use crate::mesh::Diagonal;
    use rand::{Rng, SeedableRng};

    fn unit_right_triangle() -> Mesh {
        Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn local_stiffness_of_reference_triangle() {
        let m = unit_right_triangle();
        let k = stiffness(&m);
        let expected = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (k.get(i, j) - expected[i][j]).abs() < 1e-15,
                    "K[{i}][{j}] = {}",
                    k.get(i, j)
                );
            }
        }
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let m = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 6, 6, Diagonal::SwNe).unwrap();
        let k = stiffness(&m);
        let ones = vec![1.0; m.num_nodes()];
        assert!(k.apply(&ones).iter().all(|v| v.abs() < 1e-14));
        assert!(k.asymmetry() < 1e-15);
        for rs in k.row_sums() {
            assert!(rs.abs() < 1e-12);
        }
    }

    #[test]
    fn divided_difference_values() {
        assert_eq!(divided_difference_pow(1.0, 3.0, 2), 4.0);
        assert_eq!(divided_difference_pow(0.0, 1.0, 3), 1.0);
        // near-equal arguments take the mean-value limit k * mid^(k-1)
        let d = divided_difference_pow(0.5, 0.5 + 1e-12, 2);
        assert!((d - 2.0 * 0.5).abs() < 1e-9);
        let d = divided_difference_pow(0.7, 0.7, 5);
        assert!((d - 5.0 * 0.7f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn fem2_weights_on_single_elements() {
        let m = unit_right_triangle();
        let k_geo = stiffness(&m);

        // n constant c with k = 2: operator = 2c K
        let c = Field::from_values(&m, vec![0.8, 0.8, 0.8]).unwrap();
        let a = diffusion_fem2(&m, &c, 2, Fem2Quadrature::VertexAverage).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - 1.6 * k_geo.get(i, j)).abs() < 1e-14);
            }
        }

        // n = 0 gives the zero operator
        let z = Field::from_values(&m, vec![0.0; 3]).unwrap();
        let a = diffusion_fem2(&m, &z, 4, Fem2Quadrature::VertexAverage).unwrap();
        a.for_each_entry(|_, _, v| assert_eq!(v, 0.0));

        // nodal (0, 1, 1) with k = 3: w = 3 * (0 + 1 + 1)/3 = 2
        let u = Field::from_values(&m, vec![0.0, 1.0, 1.0]).unwrap();
        let a = diffusion_fem2(&m, &u, 3, Fem2Quadrature::VertexAverage).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - 2.0 * k_geo.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fem_b_identity_on_random_fields() {
        let mesh = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 8, 8, Diagonal::SwNe).unwrap();
        let k_geo = stiffness(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in [2u32, 3, 5] {
            for _ in 0..10 {
                let vals: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.gen_range(0.1..1.0)).collect();
                let n = Field::from_values(&mesh, vals).unwrap();
                let a = diffusion_fem(&mesh, &n, k).unwrap();
                let lhs = a.apply(n.values());
                let nk = n.map(|v| pow_ki(v, k));
                let rhs = k_geo.apply(nk.values());
                let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (l, r) in lhs.iter().zip(&rhs) {
                    assert!((l - r).abs() <= 1e-10 * scale.max(r.abs()));
                }
            }
        }
    }

    #[test]
    fn sign_certificates() {
        let mesh = Mesh::build_rect(-1.0, 1.0, -1.0, 1.0, 5, 5, Diagonal::SwNe).unwrap();
        let k = stiffness(&mesh);
        assert!(offdiag_sign_check(&k).max_offdiag <= 0.0);

        let n = nodal_interpolate(&mesh, crate::model::initial_gaussian(1.0)).unwrap();
        let a = diffusion_fem(&mesh, &n, 5).unwrap();
        let rep = offdiag_sign_check(&a);
        assert!(rep.max_offdiag <= 1e-14, "max offdiag {}", rep.max_offdiag);
        assert!(rep.violations.is_empty());

        // obtuse triangle produces a positive off-diagonal stiffness entry
        let bad = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.1, 0.1]], vec![[0, 1, 2]]).unwrap();
        let kb = stiffness(&bad);
        let rep = offdiag_sign_check(&kb);
        assert!(rep.max_offdiag > 0.0);
        assert!(!rep.violations.is_empty());
    }

    #[test]
    fn unsupported_meshes_and_negative_densities_are_rejected() {
        let acute =
            Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]], vec![[0, 1, 2]]).unwrap();
        let n = Field::from_values(&acute, vec![0.5, 0.5, 0.5]).unwrap();
        assert!(matches!(
            diffusion_fem(&acute, &n, 2),
            Err(Error::UnsupportedMesh(_))
        ));

        let obtuse =
            Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.1, 0.1]], vec![[0, 1, 2]]).unwrap();
        let n = Field::from_values(&obtuse, vec![0.5, 0.5, 0.5]).unwrap();
        assert!(matches!(
            diffusion_fem2(&obtuse, &n, 2, Fem2Quadrature::VertexAverage),
            Err(Error::UnsupportedMesh(_))
        ));

        let m = unit_right_triangle();
        let neg = Field::from_values(&m, vec![0.5, -0.1, 0.5]).unwrap();
        assert!(matches!(diffusion_fem(&m, &neg, 2), Err(Error::Domain(_))));
        assert!(matches!(
            diffusion_fem2(&m, &neg, 2, Fem2Quadrature::VertexAverage),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn system_matrix_structure() {
        let mesh = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 4, 4, Diagonal::SwNe).unwrap();
        let mass = lumped_mass(&mesh);
        let k = stiffness(&mesh);
        let tau = 1e-3;

        // no diffusion, nu = 0: purely diagonal action
        let zero = k.add_scaled(-1.0, &k).unwrap();
        let s = system_matrix(&mass, tau, &zero, 0.0, &k).unwrap();
        let x: Vec<f64> = (0..mesh.num_nodes()).map(|i| i as f64).collect();
        let y = s.apply(&x);
        for (a, (yi, xi)) in y.iter().zip(&x).enumerate() {
            assert!((yi - mass.diag()[a] / tau * xi).abs() < 1e-10);
        }

        // full system: rows sum to diag(M)/tau, dominance margin matches
        let n = nodal_interpolate(&mesh, crate::model::initial_gaussian(0.5)).unwrap();
        let a = diffusion_fem(&mesh, &n, 3).unwrap();
        let s = system_matrix(&mass, tau, &a, 0.5, &k).unwrap();
        for (row, rs) in s.row_sums().iter().enumerate() {
            let expect = mass.diag()[row] / tau;
            assert!((rs - expect).abs() < 1e-9 * expect);
        }
        let margins = s.dominance_margins();
        let min_margin = margins.iter().cloned().fold(f64::MAX, f64::min);
        let min_mass = mass.diag().iter().cloned().fold(f64::MAX, f64::min);
        assert!(min_margin >= min_mass / tau - 1e-9);

        // constant vector: S c = (c/tau) diag(M)
        let c = vec![2.0; mesh.num_nodes()];
        let sc = s.apply(&c);
        for (a, v) in sc.iter().enumerate() {
            assert!((v - 2.0 * mass.diag()[a] / tau).abs() < 1e-9);
        }
        assert!(s.asymmetry() < 1e-13);
    }
}
