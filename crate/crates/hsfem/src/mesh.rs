//! Structured right-angled triangulations of axis-aligned rectangles, plus
//! angle classification for arbitrary triangulations.
//!
//! The generator splits every grid cell along its SW-NE diagonal, so each
//! triangle has a right angle at an axis-aligned corner with legs parallel
//! to the axes. Node ordering is lexicographic by (row, column) and element
//! ordering is cell-major with the lower triangle first, which makes every
//! assembly downstream bitwise reproducible.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::CsrPattern;

/// Which diagonal splits each rectangular cell. Only the SW-NE family is
/// provided; one canonical family keeps the test oracles exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagonal {
    SwNe,
}

/// Grid parameters of a generated mesh (absent for raw meshes).
#[derive(Debug, Clone, Copy)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub bbox: [f64; 4], // x0, x1, y0, y1
    pub dx: f64,
    pub dy: f64,
}

/// Local right-angle structure of an element: the vertex carrying the right
/// angle and its neighbours along the x- and y-parallel legs.
#[derive(Debug, Clone, Copy)]
pub struct RightAngle {
    pub vertex: u8,
    pub x_neighbor: u8,
    pub y_neighbor: u8,
}

/// Per-element geometry: area and the constant gradients of the three local
/// P1 basis functions, ordered like the element's vertex triple.
#[derive(Debug, Clone)]
pub struct ElemGeom {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
    pub right_angle: Option<RightAngle>,
}

/// Angle classification of a whole triangulation.
#[derive(Debug, Clone, Copy)]
pub struct AngleReport {
    pub all_right_angled: bool,
    pub all_nonobtuse: bool,
    pub max_angle: f64,
}

const ANGLE_TOL: f64 = 1e-12;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Immutable conforming triangulation. Safe to share across threads.
#[derive(Debug)]
pub struct Mesh {
    id: u64,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[u32; 3]>,
    geoms: Vec<ElemGeom>,
    pattern: Arc<CsrPattern>,
    /// Value-array slots for the 3x3 local blocks, in element order.
    scatter: Vec<[[u32; 3]; 3]>,
    angles: AngleReport,
    grid: Option<GridInfo>,
    bbox: [f64; 4],
    area: f64,
}

impl Mesh {
    /// Triangulate [x0,x1] x [y0,y1] into nx*ny cells, two triangles each.
    pub fn build_rect(
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
        diagonal: Diagonal,
    ) -> Result<Mesh> {
        let Diagonal::SwNe = diagonal;
        if !(x1 > x0) || !(y1 > y0) {
            return Err(Error::InvalidArgument(format!(
                "rectangle extents must be positive: x ({x0}, {x1}), y ({y0}, {y1})"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be at least 1, got nx={nx}, ny={ny}"
            )));
        }
        let dx = (x1 - x0) / nx as f64;
        let dy = (y1 - y0) / ny as f64;

        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = if j == ny { y1 } else { y0 + j as f64 * dy };
            for i in 0..=nx {
                let x = if i == nx { x1 } else { x0 + i as f64 * dx };
                nodes.push([x, y]);
            }
        }

        let at = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let sw = at(i, j);
                let se = at(i + 1, j);
                let nw = at(i, j + 1);
                let ne = at(i + 1, j + 1);
                elements.push([sw, se, ne]); // lower: right angle at SE
                elements.push([sw, ne, nw]); // upper: right angle at NW
            }
        }

        let grid = GridInfo {
            nx,
            ny,
            bbox: [x0, x1, y0, y1],
            dx,
            dy,
        };
        Mesh::assemble(nodes, elements, Some(grid))
    }

    /// Build from explicit nodes and counterclockwise vertex triples.
    pub fn from_raw(nodes: Vec<[f64; 2]>, elements: Vec<[usize; 3]>) -> Result<Mesh> {
        let elems: Vec<[u32; 3]> = elements
            .iter()
            .map(|e| [e[0] as u32, e[1] as u32, e[2] as u32])
            .collect();
        Mesh::assemble(nodes, elems, None)
    }

    fn assemble(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[u32; 3]>,
        grid: Option<GridInfo>,
    ) -> Result<Mesh> {
        let nn = nodes.len();
        for (a, p) in nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Geometry(format!("node {a} has non-finite coordinates")));
            }
        }
        let mut geoms = Vec::with_capacity(elements.len());
        let mut area = 0.0;
        for (e, v) in elements.iter().enumerate() {
            let [a, b, c] = *v;
            if a as usize >= nn || b as usize >= nn || c as usize >= nn {
                return Err(Error::InvalidArgument(format!(
                    "element {e} references a node out of range"
                )));
            }
            if a == b || b == c || a == c {
                return Err(Error::InvalidArgument(format!(
                    "element {e} has repeated vertices"
                )));
            }
            let g = element_geometry_from(
                nodes[a as usize],
                nodes[b as usize],
                nodes[c as usize],
            )
            .map_err(|err| match err {
                Error::Geometry(m) => Error::Geometry(format!("element {e}: {m}")),
                other => other,
            })?;
            area += g.area;
            geoms.push(g);
        }

        let mut adjacency = vec![Vec::new(); nn];
        for v in &elements {
            for &i in v {
                for &j in v {
                    adjacency[i as usize].push(j);
                }
            }
        }
        let pattern = Arc::new(CsrPattern::from_adjacency(adjacency));
        let scatter = elements
            .iter()
            .map(|v| {
                let mut block = [[0u32; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        block[i][j] =
                            pattern.slot(v[i] as usize, v[j] as usize).unwrap() as u32;
                    }
                }
                block
            })
            .collect();

        let angles = classify(&nodes, &elements);
        let bbox = grid.map(|g| g.bbox).unwrap_or_else(|| {
            let mut bb = [f64::MAX, f64::MIN, f64::MAX, f64::MIN];
            for p in &nodes {
                bb[0] = bb[0].min(p[0]);
                bb[1] = bb[1].max(p[0]);
                bb[2] = bb[2].min(p[1]);
                bb[3] = bb[3].max(p[1]);
            }
            bb
        });

        Ok(Mesh {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            nodes,
            elements,
            geoms,
            pattern,
            scatter,
            angles,
            grid,
            bbox,
            area,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, a: usize) -> [f64; 2] {
        self.nodes[a]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        let [a, b, c] = self.elements[e];
        [a as usize, b as usize, c as usize]
    }

    pub fn elements(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.elements.iter().map(|&[a, b, c]| [a as usize, b as usize, c as usize])
    }

    /// Area and P1 basis gradients of one element.
    pub fn geometry(&self, e: usize) -> Result<&ElemGeom> {
        self.geoms
            .get(e)
            .ok_or_else(|| Error::InvalidArgument(format!("element index {e} out of range")))
    }

    pub(crate) fn geometries(&self) -> &[ElemGeom] {
        &self.geoms
    }

    pub fn angle_report(&self) -> AngleReport {
        self.angles
    }

    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    pub fn bbox(&self) -> [f64; 4] {
        self.bbox
    }

    /// Total mesh area (tiles the generating rectangle).
    pub fn area(&self) -> f64 {
        self.area
    }

    /// h as the maximal element diameter (hypotenuse on right-angled meshes).
    pub fn h_diameter(&self) -> f64 {
        let mut h = 0.0f64;
        for v in &self.elements {
            let p = [self.nodes[v[0] as usize], self.nodes[v[1] as usize], self.nodes[v[2] as usize]];
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                h = h.max(((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Longest axis-parallel leg of a generated mesh.
    pub fn h_leg(&self) -> Option<f64> {
        self.grid.map(|g| g.dx.max(g.dy))
    }

    pub fn is_boundary_node(&self, a: usize) -> bool {
        let [x, y] = self.nodes[a];
        let [x0, x1, y0, y1] = self.bbox;
        let tol = 1e-12 * (x1 - x0).abs().max((y1 - y0).abs()).max(1.0);
        (x - x0).abs() <= tol || (x - x1).abs() <= tol || (y - y0).abs() <= tol || (y - y1).abs() <= tol
    }

    pub(crate) fn pattern(&self) -> Arc<CsrPattern> {
        Arc::clone(&self.pattern)
    }

    pub(crate) fn scatter(&self) -> &[[[u32; 3]; 3]] {
        &self.scatter
    }

    /// Evaluate nodal values as a P1 function at (x, y). Structured meshes only.
    pub fn eval(&self, values: &[f64], x: f64, y: f64) -> Result<f64> {
        let g = self.grid.ok_or_else(|| {
            Error::InvalidArgument("point evaluation requires a generated grid mesh".into())
        })?;
        if values.len() != self.num_nodes() {
            return Err(Error::InvalidArgument(format!(
                "value vector length {} does not match node count {}",
                values.len(),
                self.num_nodes()
            )));
        }
        let [x0, x1, y0, y1] = g.bbox;
        let tol = 1e-12 * (x1 - x0).max(y1 - y0);
        if x < x0 - tol || x > x1 + tol || y < y0 - tol || y > y1 + tol {
            return Err(Error::InvalidArgument(format!(
                "point ({x}, {y}) lies outside the mesh bounding box"
            )));
        }
        let i = (((x - x0) / g.dx).floor() as isize).clamp(0, g.nx as isize - 1) as usize;
        let j = (((y - y0) / g.dy).floor() as isize).clamp(0, g.ny as isize - 1) as usize;
        let xi = ((x - x0) / g.dx - i as f64).clamp(0.0, 1.0);
        let eta = ((y - y0) / g.dy - j as f64).clamp(0.0, 1.0);
        let at = |i: usize, j: usize| values[j * (g.nx + 1) + i];
        let (sw, se, nw, ne) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
        Ok(if xi >= eta {
            sw * (1.0 - xi) + se * (xi - eta) + ne * eta
        } else {
            sw * (1.0 - eta) + ne * xi + nw * (eta - xi)
        })
    }
}

/// Geometry of the triangle (p0, p1, p2), counterclockwise.
fn element_geometry_from(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> Result<ElemGeom> {
    let twice_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let scale = (p1[0] - p0[0])
        .abs()
        .max((p2[0] - p0[0]).abs())
        .max((p1[1] - p0[1]).abs())
        .max((p2[1] - p0[1]).abs());
    if twice_area <= f64::EPSILON * scale * scale {
        return Err(Error::Geometry(format!(
            "degenerate or clockwise element (signed doubled area {twice_area:e})"
        )));
    }
    let area = 0.5 * twice_area;
    // grad phi_i = rot90(opposite edge) / (2A)
    let grad = [
        [(p1[1] - p2[1]) / twice_area, (p2[0] - p1[0]) / twice_area],
        [(p2[1] - p0[1]) / twice_area, (p0[0] - p2[0]) / twice_area],
        [(p0[1] - p1[1]) / twice_area, (p1[0] - p0[0]) / twice_area],
    ];
    Ok(ElemGeom {
        area,
        grad,
        right_angle: detect_right_angle([p0, p1, p2], scale),
    })
}

/// Right angle with axis-parallel legs, if the element has one.
fn detect_right_angle(p: [[f64; 2]; 3], scale: f64) -> Option<RightAngle> {
    let tol = 1e-14 * scale.max(1.0);
    for v in 0..3u8 {
        let a = p[v as usize];
        let nbr = [(v + 1) % 3, (v + 2) % 3];
        let e = [
            [p[nbr[0] as usize][0] - a[0], p[nbr[0] as usize][1] - a[1]],
            [p[nbr[1] as usize][0] - a[0], p[nbr[1] as usize][1] - a[1]],
        ];
        let along_x = |d: &[f64; 2]| d[1].abs() <= tol && d[0].abs() > tol;
        let along_y = |d: &[f64; 2]| d[0].abs() <= tol && d[1].abs() > tol;
        if along_x(&e[0]) && along_y(&e[1]) {
            return Some(RightAngle {
                vertex: v,
                x_neighbor: nbr[0],
                y_neighbor: nbr[1],
            });
        }
        if along_y(&e[0]) && along_x(&e[1]) {
            return Some(RightAngle {
                vertex: v,
                x_neighbor: nbr[1],
                y_neighbor: nbr[0],
            });
        }
    }
    None
}

fn classify(nodes: &[[f64; 2]], elements: &[[u32; 3]]) -> AngleReport {
    let mut all_right = true;
    let mut all_nonobtuse = true;
    let mut max_angle = 0.0f64;
    for v in elements {
        let p = [
            nodes[v[0] as usize],
            nodes[v[1] as usize],
            nodes[v[2] as usize],
        ];
        let mut has_right = false;
        for i in 0..3 {
            let a = p[i];
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let w = [c[0] - a[0], c[1] - a[1]];
            let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
            let nw = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let cosang = ((u[0] * w[0] + u[1] * w[1]) / (nu * nw)).clamp(-1.0, 1.0);
            let angle = cosang.acos();
            max_angle = max_angle.max(angle);
            if (angle - std::f64::consts::FRAC_PI_2).abs() <= ANGLE_TOL {
                has_right = true;
            }
            if angle > std::f64::consts::FRAC_PI_2 + ANGLE_TOL {
                all_nonobtuse = false;
            }
        }
        if !has_right {
            all_right = false;
        }
    }
    AngleReport {
        all_right_angled: all_right,
        all_nonobtuse,
        max_angle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn unit_square_two_triangles() {
        let m = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 1, 1, Diagonal::SwNe).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_elements(), 2);
        for e in 0..2 {
            assert!((m.geometry(e).unwrap().area - 0.5).abs() < 1e-15);
        }
        assert!((m.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn paper_scale_mesh_counts() {
        let m = Mesh::build_rect(-10.0, 10.0, -10.0, 10.0, 100, 100, Diagonal::SwNe).unwrap();
        assert_eq!(m.num_nodes(), 10201);
        assert_eq!(m.num_elements(), 20000);
        let g = m.grid().unwrap();
        assert!((g.dx - 0.2).abs() < 1e-15 && (g.dy - 0.2).abs() < 1e-15);
        assert!((m.h_leg().unwrap() - 0.2).abs() < 1e-15);
        assert!((m.h_diameter() - 0.2 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rectangular_tiling() {
        let m = Mesh::build_rect(0.0, 2.0, 0.0, 1.0, 2, 1, Diagonal::SwNe).unwrap();
        assert_eq!(m.num_nodes(), 6);
        assert_eq!(m.num_elements(), 4);
        assert!((m.area() - 2.0).abs() < 1e-12 * 2.0);
    }

    #[test]
    fn tiling_many_resolutions() {
        for (nx, ny) in [(1, 1), (3, 7), (10, 4), (25, 25)] {
            let m = Mesh::build_rect(-3.0, 5.0, 1.0, 2.5, nx, ny, Diagonal::SwNe).unwrap();
            let exact = 8.0 * 1.5;
            assert!(
                (m.area() - exact).abs() <= 1e-12 * exact,
                "tiling failed for {nx}x{ny}"
            );
        }
    }

    #[test]
    fn gradients_of_reference_right_triangle() {
        let m = Mesh::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let g = m.geometry(0).unwrap();
        assert_eq!(g.grad[0], [-1.0, -1.0]);
        assert_eq!(g.grad[1], [1.0, 0.0]);
        assert_eq!(g.grad[2], [0.0, 1.0]);
        let ra = g.right_angle.unwrap();
        assert_eq!(ra.vertex, 0);
        assert_eq!(ra.x_neighbor, 1);
        assert_eq!(ra.y_neighbor, 2);
    }

    #[test]
    fn gradients_partition_of_unity_and_nodal_property() {
        let m = Mesh::build_rect(-2.0, 3.0, 0.0, 4.0, 7, 5, Diagonal::SwNe).unwrap();
        for e in 0..m.num_elements() {
            let g = m.geometry(e).unwrap();
            let sum = [
                g.grad[0][0] + g.grad[1][0] + g.grad[2][0],
                g.grad[0][1] + g.grad[1][1] + g.grad[2][1],
            ];
            assert!(sum[0].abs() <= 1e-14 && sum[1].abs() <= 1e-14);
            // phi_i(a_j) = delta_ij reconstructed from the gradient and the vertex a_i
            let v = m.element(e);
            for i in 0..3 {
                for j in 0..3 {
                    let pi = m.node(v[i]);
                    let pj = m.node(v[j]);
                    let phi_at_j =
                        1.0 + g.grad[i][0] * (pj[0] - pi[0]) + g.grad[i][1] * (pj[1] - pi[1]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (phi_at_j - expect).abs() <= 1e-12,
                        "nodal property violated on element {e} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_scaling_with_leg_length() {
        let small = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let big = Mesh::from_raw(vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]], vec![[0, 1, 2]]).unwrap();
        let gs = small.geometry(0).unwrap();
        let gb = big.geometry(0).unwrap();
        for i in 0..3 {
            for d in 0..2 {
                assert!((gb.grad[i][d] - gs.grad[i][d] / 4.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn structured_meshes_are_right_angled_for_any_aspect() {
        for (nx, ny) in [(1, 1), (4, 9), (20, 3)] {
            let m = Mesh::build_rect(0.0, 10.0, 0.0, 1.0, nx, ny, Diagonal::SwNe).unwrap();
            let rep = m.angle_report();
            assert!(rep.all_right_angled);
            assert!(rep.all_nonobtuse);
            assert!((rep.max_angle - FRAC_PI_2).abs() <= 1e-12);
            for e in 0..m.num_elements() {
                assert!(m.geometry(e).unwrap().right_angle.is_some());
            }
        }
    }

    #[test]
    fn classification_of_hand_triangles() {
        let acute = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 2.0]], vec![[0, 1, 2]]).unwrap();
        let rep = acute.angle_report();
        assert!(!rep.all_right_angled);
        assert!(rep.all_nonobtuse);

        let obtuse = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.1, 0.1]], vec![[0, 1, 2]]).unwrap();
        let rep = obtuse.angle_report();
        assert!(!rep.all_nonobtuse);
        assert!(rep.max_angle > FRAC_PI_2 + 1e-6);
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(Mesh::build_rect(1.0, 0.0, 0.0, 1.0, 2, 2, Diagonal::SwNe).is_err());
        assert!(Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 0, 2, Diagonal::SwNe).is_err());
        // degenerate (collinear) element
        let r = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]);
        assert!(matches!(r, Err(Error::Geometry(_))));
        // repeated vertex
        let r = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 1]]);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn point_evaluation_is_exact_for_linears() {
        let m = Mesh::build_rect(-1.0, 3.0, 0.0, 2.0, 5, 4, Diagonal::SwNe).unwrap();
        let vals: Vec<f64> = m.nodes().iter().map(|p| 2.0 * p[0] - 0.5 * p[1] + 1.0).collect();
        for (x, y) in [(-1.0, 0.0), (3.0, 2.0), (0.3, 1.7), (2.999, 0.001), (1.0, 1.0)] {
            let v = m.eval(&vals, x, y).unwrap();
            assert!((v - (2.0 * x - 0.5 * y + 1.0)).abs() < 1e-12);
        }
        assert!(m.eval(&vals, 5.0, 0.0).is_err());
    }

    #[test]
    fn boundary_node_detection() {
        let m = Mesh::build_rect(0.0, 1.0, 0.0, 1.0, 4, 4, Diagonal::SwNe).unwrap();
        let n_boundary = (0..m.num_nodes()).filter(|&a| m.is_boundary_node(a)).count();
        assert_eq!(n_boundary, 16);
    }
}
