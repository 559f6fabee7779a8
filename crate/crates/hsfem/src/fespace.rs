//! P1 finite-element primitives: nodal interpolation, the mass-lumped
//! (closed-nodal) inner product, the exact L2 product, the lumped discrete
//! Laplacian, and the product-interpolation L1 error functional.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::SparseOperator;

/// Nodal coefficient vector of a P1 function on a specific mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh_id: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Field> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::InvalidArgument(format!(
                "field length {} does not match node count {}",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite value at node {bad}")));
        }
        Ok(Field {
            mesh_id: mesh.id(),
            values,
        })
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Field {
        Field {
            mesh_id: mesh.id(),
            values: vec![c; mesh.num_nodes()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    /// Nodewise map, staying on the same mesh.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            mesh_id: self.mesh_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn same_mesh(&self, other: &Field) -> Result<()> {
        if self.mesh_id != other.mesh_id {
            return Err(Error::InvalidArgument(
                "fields live on different meshes".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::InvalidArgument(
                "field does not belong to this mesh".into(),
            ));
        }
        Ok(())
    }
}

/// Diagonal of the lumped mass matrix: diag[a] = integral of phi_a
/// (area/3 per incident triangle in 2D).
#[derive(Debug, Clone)]
pub struct LumpedMass {
    mesh_id: u64,
    diag: Vec<f64>,
}

impl LumpedMass {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub(crate) fn check_field(&self, u: &Field) -> Result<()> {
        if self.mesh_id != u.mesh_id() {
            return Err(Error::InvalidArgument(
                "field does not belong to the lumped-mass mesh".into(),
            ));
        }
        Ok(())
    }
}

pub fn lumped_mass(mesh: &Mesh) -> LumpedMass {
    let mut diag = vec![0.0; mesh.num_nodes()];
    for (e, v) in mesh.elements().enumerate() {
        let third = mesh.geometries()[e].area / 3.0;
        for a in v {
            diag[a] += third;
        }
    }
    LumpedMass {
        mesh_id: mesh.id(),
        diag,
    }
}

/// Nodal interpolation I_h: evaluate f at every node.
pub fn nodal_interpolate(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
    let mut values = Vec::with_capacity(mesh.num_nodes());
    for (a, p) in mesh.nodes().iter().enumerate() {
        let v = f(p[0], p[1]);
        if !v.is_finite() {
            return Err(Error::Evaluation(format!(
                "initial datum evaluates to a non-finite value at node {a} ({}, {})",
                p[0], p[1]
            )));
        }
        values.push(v);
    }
    Ok(Field {
        mesh_id: mesh.id(),
        values,
    })
}

/// Discrete (mass-lumped) inner product (u, v)_h = sum_a u_a v_a diag[a].
pub fn inner_h(mass: &LumpedMass, u: &Field, v: &Field) -> Result<f64> {
    mass.check_field(u)?;
    u.same_mesh(v)?;
    Ok(u.values()
        .iter()
        .zip(v.values())
        .zip(&mass.diag)
        .map(|((a, b), m)| a * b * m)
        .sum())
}

pub fn norm_h(mass: &LumpedMass, u: &Field) -> Result<f64> {
    Ok(inner_h(mass, u, u)?.sqrt())
}

/// Exact L2 inner product of two P1 functions via the consistent element
/// mass matrix area/12 * [[2,1,1],[1,2,1],[1,1,2]].
pub fn inner_l2(mesh: &Mesh, u: &Field, v: &Field) -> Result<f64> {
    u.check_mesh(mesh)?;
    u.same_mesh(v)?;
    let uu = u.values();
    let vv = v.values();
    let mut acc = 0.0;
    for (e, t) in mesh.elements().enumerate() {
        let area = mesh.geometries()[e].area;
        let (u0, u1, u2) = (uu[t[0]], uu[t[1]], uu[t[2]]);
        let (v0, v1, v2) = (vv[t[0]], vv[t[1]], vv[t[2]]);
        let su = u0 + u1 + u2;
        let sv = v0 + v1 + v2;
        acc += area / 12.0 * (su * sv + u0 * v0 + u1 * v1 + u2 * v2);
    }
    Ok(acc)
}

pub fn norm_l2(mesh: &Mesh, u: &Field) -> Result<f64> {
    Ok(inner_l2(mesh, u, u)?.sqrt())
}

/// Consistent P1 mass matrix (used for verification; the scheme itself is
/// mass-lumped throughout).
pub fn consistent_mass(mesh: &Mesh) -> SparseOperator {
    let mut m = SparseOperator::zeros(mesh.pattern());
    let scatter = mesh.scatter();
    for (e, _) in mesh.elements().enumerate() {
        let w = mesh.geometries()[e].area / 12.0;
        let slots = &scatter[e];
        for i in 0..3 {
            for j in 0..3 {
                let coef = if i == j { 2.0 } else { 1.0 };
                m.values_mut()[slots[i][j] as usize] += coef * w;
            }
        }
    }
    m
}

/// Lumped discrete Laplacian: (L v)[a] = -(K v)[a] / diag[a], so that
/// -(L v, w)_h = (grad v, grad w) for all w.
pub fn discrete_laplacian(stiffness: &SparseOperator, mass: &LumpedMass, v: &Field) -> Result<Field> {
    mass.check_field(v)?;
    if stiffness.dim() != v.len() {
        return Err(Error::InvalidArgument(format!(
            "stiffness dimension {} does not match field length {}",
            stiffness.dim(),
            v.len()
        )));
    }
    let kv = stiffness.apply(v.values());
    let values = kv
        .iter()
        .zip(&mass.diag)
        .map(|(x, m)| -x / m)
        .collect();
    Ok(Field {
        mesh_id: v.mesh_id(),
        values,
    })
}

// Dunavant 6-point rule, degree of precision 4, barycentric points and
// weights normalised to sum to 1.
const DUNAVANT4: [([f64; 3], f64); 6] = [
    (
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
        0.223381589678011,
    ),
    (
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        0.109951743655322,
    ),
];

/// Exact L1 norm of uv - I_h(uv). Per element the integrand is
/// -sum_{i<j} (u_i-u_j)(v_i-v_j) phi_i phi_j; with a uniform sign pattern its
/// absolute integral is |sum c_ij| * area/12, otherwise a degree-4 rule
/// integrates the absolute value.
pub fn interp_product_l1_error(mesh: &Mesh, u: &Field, v: &Field) -> Result<f64> {
    u.check_mesh(mesh)?;
    u.same_mesh(v)?;
    let uu = u.values();
    let vv = v.values();
    let mut acc = 0.0;
    for (e, t) in mesh.elements().enumerate() {
        let area = mesh.geometries()[e].area;
        let mut c = [0.0; 3]; // pairs (0,1), (0,2), (1,2)
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        for (slot, (i, j)) in pairs.iter().enumerate() {
            c[slot] = (uu[t[*i]] - uu[t[*j]]) * (vv[t[*i]] - vv[t[*j]]);
        }
        let pos = c.iter().any(|&x| x > 0.0);
        let neg = c.iter().any(|&x| x < 0.0);
        if !(pos && neg) {
            acc += (c[0] + c[1] + c[2]).abs() * area / 12.0;
        } else {
            let mut elem = 0.0;
            for (bary, w) in DUNAVANT4 {
                let prods = [bary[0] * bary[1], bary[0] * bary[2], bary[1] * bary[2]];
                let q = -(c[0] * prods[0] + c[1] * prods[1] + c[2] * prods[2]);
                elem += w * q.abs();
            }
            acc += elem * area;
        }
    }
    Ok(acc)
}
