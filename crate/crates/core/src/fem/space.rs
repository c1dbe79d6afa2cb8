use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::poly::{lattice_nodes, Exponents};
use crate::mesh::TetMesh;

/// A global lattice node: the mesh vertices carrying nonzero barycentric
/// weight, with integer weights summing to the space order. Sorted by vertex id,
/// so the key is independent of which tet produced it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeNode(pub Vec<(usize, u8)>);

impl LatticeNode {
    pub fn vertex_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&(v, _)| v)
    }
}

/// Continuous P^k Lagrange space on a tetrahedral mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<TetMesh>,
    order: u8,
    local_nodes: Vec<Exponents>,
    element_dofs: Vec<Vec<usize>>,
    nodes: Vec<LatticeNode>,
    dof_coords: Vec<[f64; 3]>,
    is_boundary: Vec<bool>,
}

impl FeSpace {
    pub fn new(mesh: Arc<TetMesh>, order: u8) -> Result<Self> {
        if !(1..=4).contains(&order) {
            return Err(Error::InvalidArgument(format!("unsupported element order {order} (expected 1..=4)")));
        }
        let local_nodes = lattice_nodes(order);
        let key_of = |tet: &[usize; 4], alpha: &Exponents| {
            let mut key: Vec<(usize, u8)> = (0..4).filter(|&a| alpha[a] > 0).map(|a| (tet[a], alpha[a])).collect();
            key.sort_unstable();
            LatticeNode(key)
        };

        let mut index: HashMap<LatticeNode, usize> = HashMap::new();
        let mut nodes = Vec::new();
        // vertex DOFs first, numbered by ascending vertex id
        let mut used = vec![false; mesh.n_vertices()];
        for t in mesh.tets() {
            for &v in t {
                used[v] = true;
            }
        }
        for (v, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            let key = LatticeNode(vec![(v, order)]);
            index.insert(key.clone(), nodes.len());
            nodes.push(key);
        }
        let mut element_dofs = Vec::with_capacity(mesh.n_tets());
        for tet in mesh.tets() {
            let mut dofs = Vec::with_capacity(local_nodes.len());
            for alpha in &local_nodes {
                let key = key_of(tet, alpha);
                let id = match index.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = nodes.len();
                        index.insert(key.clone(), id);
                        nodes.push(key);
                        id
                    }
                };
                dofs.push(id);
            }
            element_dofs.push(dofs);
        }

        let k = order as f64;
        let verts = mesh.vertices();
        let dof_coords = nodes
            .iter()
            .map(|n| {
                let mut p = [0.0; 3];
                for &(v, c) in &n.0 {
                    for d in 0..3 {
                        p[d] += c as f64 / k * verts[v][d];
                    }
                }
                p
            })
            .collect();

        let bverts = mesh.boundary_vertex_flags();
        let mut bedges = HashSet::new();
        let mut bfaces = HashSet::new();
        for f in mesh.boundary_faces() {
            let mut s = f.vertices;
            s.sort_unstable();
            bfaces.insert(s);
            bedges.insert([s[0], s[1]]);
            bedges.insert([s[0], s[2]]);
            bedges.insert([s[1], s[2]]);
        }
        let is_boundary = nodes
            .iter()
            .map(|n| {
                let ids: Vec<usize> = n.vertex_ids().collect();
                match ids.len() {
                    1 => bverts[ids[0]],
                    2 => bedges.contains(&[ids[0], ids[1]]),
                    3 => bfaces.contains(&[ids[0], ids[1], ids[2]]),
                    _ => false,
                }
            })
            .collect();

        Ok(Self {
            mesh,
            order,
            local_nodes,
            element_dofs,
            nodes,
            dof_coords,
            is_boundary,
        })
    }

    pub fn mesh(&self) -> &Arc<TetMesh> {
        &self.mesh
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    /// Local lattice ordering shared by every element.
    pub fn local_nodes(&self) -> &[Exponents] {
        &self.local_nodes
    }

    pub fn element_dofs(&self, tet: usize) -> &[usize] {
        &self.element_dofs[tet]
    }

    pub fn node(&self, dof: usize) -> &LatticeNode {
        &self.nodes[dof]
    }

    pub fn dof_coords(&self) -> &[[f64; 3]] {
        &self.dof_coords
    }

    pub fn is_boundary(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn n_boundary(&self) -> usize {
        self.is_boundary.iter().filter(|b| **b).count()
    }

    /// Index maps between the full DOF set and the interior (non-boundary) DOFs.
    pub fn interior_maps(&self) -> (Vec<usize>, Vec<Option<usize>>) {
        let mut interior = Vec::new();
        let mut full_to_int = vec![None; self.n_dofs()];
        for (i, &b) in self.is_boundary.iter().enumerate() {
            if !b {
                full_to_int[i] = Some(interior.len());
                interior.push(i);
            }
        }
        (interior, full_to_int)
    }

    /// The node's dof id within this space, if present.
    pub fn find(&self, node: &LatticeNode) -> Option<usize> {
        // vertex nodes are numbered first by ascending id
        if node.0.len() == 1 && node.0[0].1 == self.order {
            let v = node.0[0].0;
            if v < self.n_dofs() && self.nodes[v] == *node {
                return Some(v);
            }
        }
        self.nodes.iter().position(|n| n == node)
    }

    /// Nodal interpolant of `f` (coefficient vector over the full DOF set).
    pub fn interpolate<T: crate::Real>(&self, f: impl Fn([T; 3]) -> T) -> Vec<T> {
        self.dof_coords.iter().map(|p| f(p.map(T::lit))).collect()
    }
}

pub fn build_space(mesh: &Arc<TetMesh>, k: u8) -> Result<FeSpace> {
    FeSpace::new(Arc::clone(mesh), k)
}
