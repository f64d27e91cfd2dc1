//! Taylor-Hood P2/P1 spaces on tetrahedral meshes.
//!
//! Velocity nodes are the mesh vertices followed by the edges, and the
//! velocity dof of component `c` at node `i` is `3 * i + c`. Pressure dofs are
//! the vertices.

mod delta;
mod function;

pub use delta::{build_regularized_delta, RegularizedDelta};
pub use function::{
    interpolate_pressure, interpolate_velocity, read_fe_function, weighted_norm, weighted_norm_of, write_fe_function,
    zero_mean_project, Derivative, FEFunction, Role,
};

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::error::{invalid, Result};
use crate::mesh::{build_cube_mesh, refine_uniform, EdgeTopology, Point, TetGeometry, TetMesh, LOCAL_EDGES};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug)]
pub struct TaylorHoodSpace {
    mesh: Arc<TetMesh>,
    topology: EdgeTopology,
    geometry: Vec<TetGeometry>,
    tet_nodes: Vec<[usize; 10]>,
    boundary_node: Vec<bool>,
    boundary_dofs: Vec<usize>,
    coarse: Option<Arc<TaylorHoodSpace>>,
    pattern: OnceLock<NodePattern>,
}

/// Node-to-node sparsity in CSR form: node `j` is a neighbor of node `i`
/// when both belong to a common tet. Vertex rows double as the pattern of
/// the pressure-velocity coupling.
#[derive(Debug, Clone)]
pub struct NodePattern {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: Arc<TetMesh>) -> Self {
        let topology = mesh.edge_topology();
        let nv = mesh.n_vertices();
        let geometry = (0..mesh.n_tets()).map(|t| mesh.geometry(t)).collect();
        let tet_nodes = mesh
            .tets()
            .iter()
            .zip(&topology.tet_edges)
            .map(|(v, e)| [v[0], v[1], v[2], v[3], nv + e[0], nv + e[1], nv + e[2], nv + e[3], nv + e[4], nv + e[5]])
            .collect();
        let edge_index: HashMap<(usize, usize), usize> =
            topology.edges.iter().enumerate().map(|(i, e)| ((e[0], e[1]), i)).collect();
        let mut boundary_node = vec![false; nv + topology.edges.len()];
        for f in mesh.boundary_faces() {
            for a in 0..3 {
                boundary_node[f.vertices[a]] = true;
                for b in a + 1..3 {
                    let (x, y) = (f.vertices[a], f.vertices[b]);
                    let e = edge_index[&(x.min(y), x.max(y))];
                    boundary_node[nv + e] = true;
                }
            }
        }
        let boundary_dofs = boundary_node
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .flat_map(|(i, _)| [3 * i, 3 * i + 1, 3 * i + 2])
            .collect();
        Self { mesh, topology, geometry, tet_nodes, boundary_node, boundary_dofs, coarse: None, pattern: OnceLock::new() }
    }

    /// Space on the uniform refinement, remembering `self` as its coarse level.
    pub fn refine(self: &Arc<Self>) -> Result<Arc<Self>> {
        let fine = refine_uniform(&self.mesh)?;
        let mut space = Self::new(Arc::new(fine));
        space.coarse = Some(self.clone());
        Ok(Arc::new(space))
    }

    /// Space on the Kuhn cube mesh with `n` cells per axis, built by
    /// refining the coarsest mesh `n / 2^k` so that multigrid has a hierarchy.
    pub fn unit_cube(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(invalid("cube mesh needs n >= 1 subdivisions"));
        }
        let k = n.trailing_zeros();
        let mut space = Arc::new(Self::new(Arc::new(build_cube_mesh(n >> k)?)));
        for _ in 0..k {
            space = space.refine()?;
        }
        Ok(space)
    }

    /// The space this one was refined from, if any.
    pub fn coarse(&self) -> Option<&Arc<TaylorHoodSpace>> {
        self.coarse.as_ref()
    }

    /// Number of refinement generations above the coarsest linked space.
    pub fn depth(&self) -> usize {
        self.coarse.as_ref().map_or(0, |c| c.depth() + 1)
    }

    pub fn mesh(&self) -> &TetMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TetMesh> {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_vertices() + self.topology.edges.len()
    }

    pub fn n_edges(&self) -> usize {
        self.topology.edges.len()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        3 * self.n_nodes()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.topology.edges
    }

    /// The ten velocity nodes of a tet: its vertices, then its edges in
    /// [`LOCAL_EDGES`] order.
    pub fn tet_nodes(&self, t: usize) -> &[usize; 10] {
        &self.tet_nodes[t]
    }

    pub fn geometry(&self, t: usize) -> &TetGeometry {
        &self.geometry[t]
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_node[node]
    }

    pub fn boundary_node_mask(&self) -> &[bool] {
        &self.boundary_node
    }

    /// Sorted velocity dofs on the boundary.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn node_pattern(&self) -> &NodePattern {
        self.pattern.get_or_init(|| {
            let mut rows: Vec<Vec<u32>> = vec![Vec::new(); self.n_nodes()];
            for nodes in &self.tet_nodes {
                for &i in nodes {
                    rows[i].extend(nodes.iter().map(|&j| j as u32));
                }
            }
            let mut row_ptr = Vec::with_capacity(rows.len() + 1);
            row_ptr.push(0);
            let mut cols = Vec::new();
            for r in rows.iter_mut() {
                r.sort_unstable();
                r.dedup();
                cols.extend_from_slice(r);
                row_ptr.push(cols.len());
                *r = Vec::new();
            }
            cols.shrink_to_fit();
            NodePattern { row_ptr, cols }
        })
    }

    pub fn node_position(&self, node: usize) -> Point {
        let v = self.mesh.vertices();
        if node < v.len() {
            v[node]
        } else {
            let [a, b] = self.topology.edges[node - v.len()];
            [0.5 * (v[a][0] + v[b][0]), 0.5 * (v[a][1] + v[b][1]), 0.5 * (v[a][2] + v[b][2])]
        }
    }
}

/// Quadratic Lagrange basis in barycentric coordinates.
pub fn p2_values(l: &[f64; 4]) -> [f64; 10] {
    let mut v = [0.0; 10];
    for i in 0..4 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        v[4 + k] = 4.0 * l[a] * l[b];
    }
    v
}

/// Physical gradients of the quadratic basis.
pub fn p2_gradients(l: &[f64; 4], gl: &[[f64; 3]; 4]) -> [[f64; 3]; 10] {
    let mut g = [[0.0; 3]; 10];
    for i in 0..4 {
        let s = 4.0 * l[i] - 1.0;
        for d in 0..3 {
            g[i][d] = s * gl[i][d];
        }
    }
    for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        for d in 0..3 {
            g[4 + k][d] = 4.0 * (l[a] * gl[b][d] + l[b] * gl[a][d]);
        }
    }
    g
}

pub fn sym(g: &Mat3) -> Mat3 {
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = 0.5 * (g[i][j] + g[j][i]);
        }
    }
    e
}

pub fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn ddot(a: &Mat3, b: &Mat3) -> f64 {
    (0..3).map(|i| (0..3).map(|j| a[i][j] * b[i][j]).sum::<f64>()).sum()
}
