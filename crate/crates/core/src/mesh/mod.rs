//! Tetrahedral meshes of convex polyhedra.
//!
//! The unit cube is the canonical domain. [`build_cube_mesh`] produces the
//! Kuhn triangulation (six tetrahedra per subcube, all sharing the main
//! diagonal), and [`refine_uniform`] performs regular red refinement with a
//! fixed interior-diagonal rule. On Kuhn meshes the rule reproduces the Kuhn
//! triangulation of the doubled grid, so `h_max` halves exactly per level.

mod io;
mod quadrature;

pub use io::{mesh_hash, read_mesh, write_mesh};
pub use quadrature::{quadrature, QuadratureRule, SUPPORTED_ORDERS};

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 3];

/// Barycentric tolerance used by [`locate_point`].
pub const LOCATE_TOL: f64 = 1e-10;

/// Local vertex pairs of the six edges, in the order used by the P2 basis.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// A boundary face, identified by the owning tet and the local index of the
/// vertex opposite to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryFace {
    pub tet: usize,
    pub local: usize,
    pub vertices: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    boundary_faces: Vec<BoundaryFace>,
    h_max: f64,
    level: u32,
    parents: Option<Vec<usize>>,
}

/// Edge numbering of a mesh: global edge list plus the six edges of every tet.
#[derive(Debug, Clone)]
pub struct EdgeTopology {
    pub edges: Vec<[usize; 2]>,
    pub tet_edges: Vec<[usize; 6]>,
}

/// Affine data of one tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    /// Gradients of the four barycentric coordinates.
    pub grad_lambda: [[f64; 3]; 4],
    pub vertices: [Point; 4],
}

impl TetGeometry {
    pub fn new(vertices: [Point; 4]) -> Self {
        let e = |k: usize| sub(vertices[k], vertices[0]);
        let (e1, e2, e3) = (e(1), e(2), e(3));
        let det = dot(e1, cross(e2, e3));
        // Rows of J^{-1} are the gradients of lambda_1..lambda_3.
        let g1 = scale(cross(e2, e3), 1.0 / det);
        let g2 = scale(cross(e3, e1), 1.0 / det);
        let g3 = scale(cross(e1, e2), 1.0 / det);
        let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
        Self { volume: det / 6.0, grad_lambda: [g0, g1, g2, g3], vertices }
    }

    pub fn barycentric(&self, x: Point) -> [f64; 4] {
        let d = sub(x, self.vertices[0]);
        let l1 = dot(self.grad_lambda[1], d);
        let l2 = dot(self.grad_lambda[2], d);
        let l3 = dot(self.grad_lambda[3], d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn point(&self, bary: &[f64; 4]) -> Point {
        let mut x = [0.0; 3];
        for (b, v) in bary.iter().zip(&self.vertices) {
            for c in 0..3 {
                x[c] += b * v[c];
            }
        }
        x
    }

    pub fn diameter(&self) -> f64 {
        LOCAL_EDGES
            .iter()
            .map(|&[a, b]| norm(sub(self.vertices[a], self.vertices[b])))
            .fold(0.0, f64::max)
    }
}

impl TetMesh {
    /// Builds a mesh from raw arrays, orienting every tet positively and
    /// deriving the boundary faces.
    pub fn from_parts(vertices: Vec<Point>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        for (t, tet) in tets.iter_mut().enumerate() {
            if tet.iter().any(|&v| v >= vertices.len()) {
                return Err(invalid(format!("tet {t} references a missing vertex")));
            }
            let vol = signed_volume(&vertices, tet);
            if vol == 0.0 || !vol.is_finite() {
                return Err(invalid(format!("tet {t} is degenerate")));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        let boundary_faces = find_boundary_faces(&tets)?;
        let mut mesh = Self { vertices, tets, boundary_faces, h_max: 0.0, level: 0, parents: None };
        mesh.h_max = (0..mesh.tets.len()).map(|t| mesh.geometry(t).diameter()).fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    /// Parent tet (in the mesh this one was refined from) of every tet.
    pub fn parents(&self) -> Option<&[usize]> {
        self.parents.as_deref()
    }

    pub fn geometry(&self, t: usize) -> TetGeometry {
        let tet = self.tets[t];
        TetGeometry::new([
            self.vertices[tet[0]],
            self.vertices[tet[1]],
            self.vertices[tet[2]],
            self.vertices[tet[3]],
        ])
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.geometry(t).volume).sum()
    }

    /// Vertices lying on a boundary face.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for f in &self.boundary_faces {
            for &v in &f.vertices {
                mask[v] = true;
            }
        }
        mask
    }

    /// Global edge numbering; edges are numbered in order of first appearance
    /// when sweeping tets and their local edges.
    pub fn edge_topology(&self) -> EdgeTopology {
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.tets.len() * 2);
        let mut edges = Vec::new();
        let mut tet_edges = Vec::with_capacity(self.tets.len());
        for tet in &self.tets {
            let mut local = [0usize; 6];
            for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = ordered(tet[a], tet[b]);
                local[k] = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
            }
            tet_edges.push(local);
        }
        EdgeTopology { edges, tet_edges }
    }
}

/// Kuhn triangulation of the unit cube with `n` subdivisions per axis.
pub fn build_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(invalid("cube mesh needs n >= 1 subdivisions"));
    }
    let m = n + 1;
    let id = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    TetMesh::from_parts(vertices, tets)
}

/// Regular red refinement: every tet is split into eight children.
///
/// The parent's vertices are ordered by coordinate sum (ties by index); the
/// interior octahedron is cut along the diagonal joining the midpoints of
/// edges (0,2) and (1,3) in that ordering.
pub fn refine_uniform(mesh: &TetMesh) -> Result<TetMesh> {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.tets.len() * 2);
    let mut tets = Vec::with_capacity(mesh.tets.len() * 8);
    let mut parents = Vec::with_capacity(mesh.tets.len() * 8);
    for (t, tet) in mesh.tets.iter().enumerate() {
        let mut p = *tet;
        p.sort_by(|&a, &b| {
            let sa: f64 = mesh.vertices[a].iter().sum();
            let sb: f64 = mesh.vertices[b].iter().sum();
            sa.total_cmp(&sb).then(a.cmp(&b))
        });
        let mut mid = |a: usize, b: usize| -> usize {
            let key = ordered(p[a], p[b]);
            *midpoint.entry(key).or_insert_with(|| {
                let (va, vb) = (vertices[key.0], vertices[key.1]);
                vertices.push([0.5 * (va[0] + vb[0]), 0.5 * (va[1] + vb[1]), 0.5 * (va[2] + vb[2])]);
                vertices.len() - 1
            })
        };
        let (x01, x02, x03) = (mid(0, 1), mid(0, 2), mid(0, 3));
        let (x12, x13, x23) = (mid(1, 2), mid(1, 3), mid(2, 3));
        let children = [
            [p[0], x01, x02, x03],
            [x01, p[1], x12, x13],
            [x02, x12, p[2], x23],
            [x03, x13, x23, p[3]],
            [x01, x02, x03, x13],
            [x01, x02, x12, x13],
            [x02, x03, x13, x23],
            [x02, x12, x13, x23],
        ];
        for c in children {
            tets.push(c);
            parents.push(t);
        }
    }
    let mut fine = TetMesh::from_parts(vertices, tets)?;
    fine.level = mesh.level + 1;
    fine.parents = Some(parents);
    Ok(fine)
}

/// Finds the tet containing `x` by linear scan; ties go to the lowest index.
pub fn locate_point(mesh: &TetMesh, x: Point) -> Result<(usize, [f64; 4])> {
    for t in 0..mesh.tets.len() {
        let geo = mesh.geometry(t);
        let mut bary = geo.barycentric(x);
        if bary.iter().all(|&b| b >= -LOCATE_TOL) {
            if bary.iter().any(|&b| b < 0.0) {
                for b in bary.iter_mut() {
                    *b = b.max(0.0);
                }
                let s: f64 = bary.iter().sum();
                for b in bary.iter_mut() {
                    *b /= s;
                }
            }
            return Ok((t, bary));
        }
    }
    Err(Error::PointNotFound(x))
}

/// Result of [`audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeshAudit {
    pub min_volume: f64,
    pub total_volume: f64,
    /// Faces shared by more than two tets, or interior faces not matched.
    pub nonconforming_faces: usize,
    pub boundary_faces: usize,
    /// Boundary area; equals the surface area of the polyhedron.
    pub boundary_area: f64,
}

impl MeshAudit {
    pub fn is_valid(&self, expected_volume: f64, expected_area: f64) -> bool {
        self.min_volume > 0.0
            && self.nonconforming_faces == 0
            && ((self.total_volume - expected_volume) / expected_volume).abs() < 1e-12
            && ((self.boundary_area - expected_area) / expected_area).abs() < 1e-12
    }
}

/// Orientation, conformity and boundary-closure check.
///
/// Conformity is checked combinatorially: every face is shared by at most two
/// tets, and the boundary faces (those owned by one tet) close up into a
/// surface whose area matches the polyhedron's.
pub fn audit(mesh: &TetMesh) -> MeshAudit {
    let mut min_volume = f64::INFINITY;
    let mut total_volume = 0.0;
    for t in 0..mesh.n_tets() {
        let v = mesh.geometry(t).volume;
        min_volume = min_volume.min(v);
        total_volume += v;
    }
    let mut count: HashMap<[usize; 3], usize> = HashMap::new();
    for tet in &mesh.tets {
        for k in 0..4 {
            *count.entry(face_key(tet, k)).or_default() += 1;
        }
    }
    let nonconforming_faces = count.values().filter(|&&c| c > 2).count();
    let mut boundary_area = 0.0;
    for f in &mesh.boundary_faces {
        let [a, b, c] = f.vertices.map(|v| mesh.vertices[v]);
        boundary_area += 0.5 * norm(cross(sub(b, a), sub(c, a)));
    }
    // Edges of the boundary surface must each be shared by exactly two faces.
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for f in &mesh.boundary_faces {
        let [a, b, c] = f.vertices;
        for e in [ordered(a, b), ordered(b, c), ordered(a, c)] {
            *edge_count.entry(e).or_default() += 1;
        }
    }
    let open_edges = edge_count.values().filter(|&&c| c != 2).count();
    MeshAudit {
        min_volume,
        total_volume,
        nonconforming_faces: nonconforming_faces + open_edges,
        boundary_faces: mesh.boundary_faces.len(),
        boundary_area,
    }
}

fn find_boundary_faces(tets: &[[usize; 4]]) -> Result<Vec<BoundaryFace>> {
    let mut owner: HashMap<[usize; 3], (usize, usize, usize)> = HashMap::with_capacity(tets.len() * 2);
    for (t, tet) in tets.iter().enumerate() {
        for k in 0..4 {
            let e = owner.entry(face_key(tet, k)).or_insert((t, k, 0));
            e.2 += 1;
        }
    }
    if owner.values().any(|&(_, _, c)| c > 2) {
        return Err(invalid("non-manifold mesh: a face is shared by more than two tets"));
    }
    let mut faces: Vec<BoundaryFace> = owner
        .into_values()
        .filter(|&(_, _, c)| c == 1)
        .map(|(tet, local, _)| {
            let verts: Vec<usize> = (0..4).filter(|&i| i != local).map(|i| tets[tet][i]).collect();
            BoundaryFace { tet, local, vertices: [verts[0], verts[1], verts[2]] }
        })
        .collect();
    faces.sort_by_key(|f| (f.tet, f.local));
    Ok(faces)
}

fn face_key(tet: &[usize; 4], opposite: usize) -> [usize; 3] {
    let mut f = [0; 3];
    let mut n = 0;
    for (i, &v) in tet.iter().enumerate() {
        if i != opposite {
            f[n] = v;
            n += 1;
        }
    }
    f.sort_unstable();
    f
}

fn signed_volume(vertices: &[Point], tet: &[usize; 4]) -> f64 {
    let v0 = vertices[tet[0]];
    let e1 = sub(vertices[tet[1]], v0);
    let e2 = sub(vertices[tet[2]], v0);
    let e3 = sub(vertices[tet[3]], v0);
    dot(e1, cross(e2, e3)) / 6.0
}

pub(crate) fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

/// Distance from `x` to the boundary of the unit cube.
pub fn dist_to_cube_boundary(x: Point) -> f64 {
    x.iter().map(|&c| c.min(1.0 - c)).fold(f64::INFINITY, f64::min).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn canonical_tets(mesh: &TetMesh) -> BTreeSet<Vec<[i64; 3]>> {
        mesh.tets()
            .iter()
            .map(|tet| {
                let mut v: Vec<[i64; 3]> = tet
                    .iter()
                    .map(|&i| mesh.vertices()[i].map(|c| (c * 1024.0).round() as i64))
                    .collect();
                v.sort();
                v
            })
            .collect()
    }

    #[test]
    fn cube_counts() {
        let m1 = build_cube_mesh(1).unwrap();
        assert_eq!((m1.n_vertices(), m1.n_tets()), (8, 6));
        let m2 = build_cube_mesh(2).unwrap();
        assert_eq!((m2.n_vertices(), m2.n_tets()), (27, 48));
        for n in 1..5 {
            let m = build_cube_mesh(n).unwrap();
            assert!((m.total_volume() - 1.0).abs() < 1e-12);
            assert!((m.h_max() - 3f64.sqrt() / n as f64).abs() < 1e-14);
            assert_eq!(m.boundary_faces().len(), 12 * n * n);
            assert!(audit(&m).is_valid(1.0, 6.0));
        }
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(build_cube_mesh(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn refinement_counts_volumes_and_h() {
        let coarse = build_cube_mesh(1).unwrap();
        let fine = refine_uniform(&coarse).unwrap();
        assert_eq!(fine.n_tets(), 48);
        assert_eq!(fine.level(), 1);
        let parents = fine.parents().unwrap();
        let mut child_vol = vec![0.0; coarse.n_tets()];
        for t in 0..fine.n_tets() {
            child_vol[parents[t]] += fine.geometry(t).volume;
        }
        for t in 0..coarse.n_tets() {
            let pv = coarse.geometry(t).volume;
            assert!((child_vol[t] - pv).abs() < 1e-15 * pv.max(1.0));
        }
        // Check over all child edges.
        let longest = (0..fine.n_tets()).map(|t| fine.geometry(t).diameter()).fold(0.0, f64::max);
        assert_eq!(longest, fine.h_max());
        assert!((fine.h_max() - coarse.h_max() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn refinement_of_kuhn_mesh_is_kuhn_mesh() {
        let mut m = build_cube_mesh(1).unwrap();
        for n in [2usize, 4, 8] {
            m = refine_uniform(&m).unwrap();
            let direct = build_cube_mesh(n).unwrap();
            assert_eq!(canonical_tets(&m), canonical_tets(&direct));
            assert!(audit(&m).is_valid(1.0, 6.0));
            assert!(((m.total_volume() - 1.0) / 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_of_irregular_tet_keeps_volume() {
        let mesh = TetMesh::from_parts(
            vec![[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 0.9, 0.1], [0.3, 0.2, 1.3]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let v = mesh.total_volume();
        let mut m = mesh;
        for _ in 0..3 {
            m = refine_uniform(&m).unwrap();
            assert!(((m.total_volume() - v) / v).abs() < 1e-12);
            let a = audit(&m);
            assert!(a.min_volume > 0.0);
            assert_eq!(a.nonconforming_faces, 0);
        }
    }

    #[test]
    fn locate_center_and_vertex() {
        let m = build_cube_mesh(2).unwrap();
        let (_, b) = locate_point(&m, [0.5, 0.5, 0.5]).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (t, b) = locate_point(&m, [0.5, 0.0, 0.5]).unwrap();
        let k = b.iter().position(|&x| (x - 1.0).abs() < 1e-12).expect("canonical basis vector");
        assert_eq!(m.vertices()[m.tets()[t][k]], [0.5, 0.0, 0.5]);
        for (i, &x) in b.iter().enumerate() {
            if i != k {
                assert!(x.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn locate_outside_fails() {
        let m = build_cube_mesh(2).unwrap();
        assert!(matches!(locate_point(&m, [1.2, 0.5, 0.5]), Err(Error::PointNotFound(_))));
    }

    #[test]
    fn locate_ties_pick_lowest_index() {
        let m = build_cube_mesh(2).unwrap();
        let (t, _) = locate_point(&m, [0.5, 0.5, 0.5]).unwrap();
        let first = (0..m.n_tets())
            .find(|&s| m.geometry(s).barycentric([0.5, 0.5, 0.5]).iter().all(|&b| b >= -LOCATE_TOL))
            .unwrap();
        assert_eq!(t, first);
    }
}
