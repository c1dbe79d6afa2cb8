//! Conforming tetrahedral meshes of box domains.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A boundary triangle together with the tetrahedron that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub tet: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    vertices: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    boundary_faces: Vec<BoundaryFace>,
}

const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

pub(crate) fn signed_volume(p: &[[f64; 3]; 4]) -> f64 {
    let d = |a: usize| [p[a][0] - p[0][0], p[a][1] - p[0][1], p[a][2] - p[0][2]];
    let (a, b, c) = (d(1), d(2), d(3));
    let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0]);
    det / 6.0
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

impl TetMesh {
    /// Validates and canonicalizes a mesh: every tet is reordered to positive
    /// orientation, and boundary faces are recomputed from face multiplicities.
    pub fn new(vertices: Vec<[f64; 3]>, mut tets: Vec<[usize; 4]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tet) in tets.iter_mut().enumerate() {
            if tet.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument(format!("tet {t} references a missing vertex")));
            }
            let mut s = tet.to_vec();
            s.sort_unstable();
            s.dedup();
            if s.len() != 4 {
                return Err(Error::DegenerateElement { tet: t, volume: 0.0 });
            }
            let vol = signed_volume(&tet.map(|v| vertices[v]));
            if vol < 0.0 {
                tet.swap(2, 3);
            }
            let scale = tet
                .iter()
                .flat_map(|&a| tet.iter().map(move |&b| (a, b)))
                .map(|(a, b)| dist(&vertices[a], &vertices[b]))
                .fold(0.0f64, f64::max);
            if vol.abs() <= 1e-14 * scale.powi(3) {
                return Err(Error::DegenerateElement { tet: t, volume: vol.abs() });
            }
        }
        let mut faces: HashMap<[usize; 3], (usize, usize, [usize; 3])> = HashMap::new();
        let mut order = Vec::new();
        for (t, tet) in tets.iter().enumerate() {
            for lf in LOCAL_FACES {
                let f = [tet[lf[0]], tet[lf[1]], tet[lf[2]]];
                let key = sorted3(f);
                let e = faces.entry(key).or_insert_with(|| {
                    order.push(key);
                    (0, t, f)
                });
                e.0 += 1;
                if e.0 > 2 {
                    return Err(Error::InvalidArgument(format!("face {key:?} shared by more than two tets")));
                }
            }
        }
        let boundary_faces = order
            .iter()
            .filter_map(|k| {
                let (count, tet, f) = faces[k];
                (count == 1).then_some(BoundaryFace { vertices: f, tet })
            })
            .collect();
        Ok(Self {
            vertices,
            tets,
            boundary_faces,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_coords(&self, t: usize) -> [[f64; 3]; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_coords(t))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_tets()).map(|t| self.tet_volume(t)).sum()
    }

    /// Unique edges as sorted vertex pairs, in first-encounter order over tets.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tet in &self.tets {
            for a in 0..4 {
                for b in (a + 1)..4 {
                    let e = if tet[a] < tet[b] { [tet[a], tet[b]] } else { [tet[b], tet[a]] };
                    seen.entry(e).or_insert_with(|| {
                        out.push(e);
                    });
                }
            }
        }
        out
    }

    /// Flags vertices that lie on some boundary face.
    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n_vertices()];
        for f in &self.boundary_faces {
            for &v in &f.vertices {
                flags[v] = true;
            }
        }
        flags
    }

    /// Mesh size: the longest edge.
    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|e| dist(&self.vertices[e[0]], &self.vertices[e[1]]))
            .fold(0.0, f64::max)
    }

    /// Edge-midpoint (red) refinement: every tet is split into eight.
    pub fn refine_uniform(&self) -> Result<Self> {
        let edges = self.edges();
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<[usize; 2], usize> = HashMap::with_capacity(edges.len());
        for e in &edges {
            let (a, b) = (self.vertices[e[0]], self.vertices[e[1]]);
            mid.insert(*e, vertices.len());
            vertices.push([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]);
        }
        let m = |a: usize, b: usize| mid[&if a < b { [a, b] } else { [b, a] }];
        let mut tets = Vec::with_capacity(8 * self.n_tets());
        for &[v0, v1, v2, v3] in &self.tets {
            let (m01, m02, m03, m12, m13, m23) = (m(v0, v1), m(v0, v2), m(v0, v3), m(v1, v2), m(v1, v3), m(v2, v3));
            tets.push([v0, m01, m02, m03]);
            tets.push([m01, v1, m12, m13]);
            tets.push([m02, m12, v2, m23]);
            tets.push([m03, m13, m23, v3]);
            // inner octahedron split along its shortest diagonal
            let options = [
                ([m01, m23], [m02, m03, m13, m12]),
                ([m02, m13], [m01, m03, m23, m12]),
                ([m03, m12], [m01, m02, m23, m13]),
            ];
            let len = |d: [usize; 2]| dist(&vertices[d[0]], &vertices[d[1]]);
            let mut best = 0;
            for i in 1..3 {
                if len(options[i].0) < len(options[best].0) - 1e-14 {
                    best = i;
                }
            }
            let (diag, ring) = options[best];
            for i in 0..4 {
                tets.push([diag[0], diag[1], ring[i], ring[(i + 1) % 4]]);
            }
        }
        Self::new(vertices, tets)
    }

    /// Moves every interior vertex by a random displacement of length at most
    /// `fraction` times its shortest incident edge. Boundary vertices stay put.
    pub fn perturb_interior(&self, fraction: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let on_boundary = self.boundary_vertex_flags();
        let mut hmin = vec![f64::INFINITY; self.n_vertices()];
        for e in self.edges() {
            let l = dist(&self.vertices[e[0]], &self.vertices[e[1]]);
            hmin[e[0]] = hmin[e[0]].min(l);
            hmin[e[1]] = hmin[e[1]].min(l);
        }
        let mut vertices = self.vertices.clone();
        for (v, p) in vertices.iter_mut().enumerate() {
            if on_boundary[v] {
                continue;
            }
            // uniform point in the ball by rejection from the cube
            let d = loop {
                let d: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if d.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break d;
                }
            };
            for c in 0..3 {
                p[c] += fraction * hmin[v] * d[c];
            }
        }
        let out = Self::new(vertices, self.tets.clone())?;
        for t in 0..out.n_tets() {
            if (signed_volume(&self.tet_coords(t)) > 0.0) != (signed_volume(&out.tet_coords(t)) > 0.0)
                || out.tets[t] != self.tets[t]
            {
                return Err(Error::InvalidArgument(format!("perturbation inverted tet {t}")));
            }
        }
        Ok(out)
    }

    /// Writes `<base>.node` and `<base>.ele` (counts header, 0-based ids).
    pub fn write_node_ele(&self, base: impl AsRef<Path>) -> Result<()> {
        let base = base.as_ref();
        let node_path = base.with_extension("node");
        let ele_path = base.with_extension("ele");
        fs::write(&node_path, self.node_text()).map_err(|e| Error::io(&node_path, e))?;
        fs::write(&ele_path, self.ele_text()).map_err(|e| Error::io(&ele_path, e))
    }

    pub fn node_text(&self) -> String {
        let mut s = format!("{} 3\n", self.n_vertices());
        for (i, p) in self.vertices.iter().enumerate() {
            s.push_str(&format!("{i} {:?} {:?} {:?}\n", p[0], p[1], p[2]));
        }
        s
    }

    pub fn ele_text(&self) -> String {
        let mut s = format!("{} 4\n", self.n_tets());
        for (i, t) in self.tets.iter().enumerate() {
            s.push_str(&format!("{i} {} {} {} {}\n", t[0], t[1], t[2], t[3]));
        }
        s
    }

    pub fn read_node_ele(base: impl AsRef<Path>) -> Result<Self> {
        let base = base.as_ref();
        let node_path = base.with_extension("node");
        let ele_path = base.with_extension("ele");
        let node = fs::read_to_string(&node_path).map_err(|e| Error::io(&node_path, e))?;
        let ele = fs::read_to_string(&ele_path).map_err(|e| Error::io(&ele_path, e))?;
        Self::from_node_ele_text(&node, &ele)
    }

    pub fn from_node_ele_text(node: &str, ele: &str) -> Result<Self> {
        let vertices: Vec<[f64; 3]> = parse_table(node, 3, |s| s.parse::<f64>().ok())?;
        let tets: Vec<[usize; 4]> = parse_table(ele, 4, |s| s.parse::<usize>().ok())?;
        Self::new(vertices, tets)
    }
}

fn parse_table<V: Copy + Default, const N: usize>(
    text: &str,
    width: usize,
    parse: impl Fn(&str) -> Option<V>,
) -> Result<Vec<[V; N]>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim();
        !l.is_empty() && !l.starts_with('#')
    });
    let (_, header) = lines.next().ok_or_else(|| Error::parse(Some(1), "missing count header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let count: usize = h
        .first()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::parse(Some(1), "bad count"))?;
    if h.get(1).and_then(|w| w.parse::<usize>().ok()) != Some(width) {
        return Err(Error::parse(Some(1), format!("expected width {width}")));
    }
    let mut out = Vec::with_capacity(count);
    for (ln, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != N + 1 || parts[0].parse::<usize>().ok() != Some(out.len()) {
            return Err(Error::parse(Some(ln + 1), "malformed record"));
        }
        let mut rec = [V::default(); N];
        for k in 0..N {
            rec[k] = parse(parts[k + 1]).ok_or_else(|| Error::parse(Some(ln + 1), "bad field"))?;
        }
        out.push(rec);
    }
    if out.len() != count {
        return Err(Error::parse(None, format!("expected {count} records, found {}", out.len())));
    }
    Ok(out)
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Unit cube split into `n³` subcubes, each cut into six Kuhn tetrahedra.
pub fn build_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("cube mesh needs n >= 1".into()));
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
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
    TetMesh::new(vertices, tets)
}

/// The reference tetrahedron with vertices at the origin and unit axis points.
pub fn reference_tet() -> TetMesh {
    TetMesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        vec![[0, 1, 2, 3]],
    )
    .expect("reference tet is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conformity_ok(m: &TetMesh) -> bool {
        let mut counts: HashMap<[usize; 3], usize> = HashMap::new();
        for t in m.tets() {
            for lf in LOCAL_FACES {
                *counts.entry(sorted3([t[lf[0]], t[lf[1]], t[lf[2]]])).or_default() += 1;
            }
        }
        let once = counts.values().filter(|&&c| c == 1).count();
        counts.values().all(|&c| c == 1 || c == 2) && once == m.boundary_faces().len()
    }

    #[test]
    fn cube_counts() {
        let m = build_cube_mesh(1).unwrap();
        assert_eq!((m.n_vertices(), m.n_tets(), m.boundary_faces().len()), (8, 6, 12));
        assert!((m.total_volume() - 1.0).abs() <= 1e-14);
        let m2 = build_cube_mesh(2).unwrap();
        assert_eq!((m2.n_vertices(), m2.n_tets()), (27, 48));
        assert_eq!(m2.boundary_faces().len(), 48);
        assert!(conformity_ok(&m2));
        assert!(build_cube_mesh(0).is_err());
    }

    #[test]
    fn all_tets_positively_oriented() {
        let m = build_cube_mesh(3).unwrap();
        assert!((0..m.n_tets()).all(|t| m.tet_volume(t) > 0.0));
    }

    #[test]
    fn refine_counts_and_volume() {
        let r = reference_tet().refine_uniform().unwrap();
        assert_eq!((r.n_tets(), r.n_vertices()), (8, 10));
        assert!((r.total_volume() - 1.0 / 6.0).abs() <= 1e-14);
        let c = build_cube_mesh(1).unwrap();
        let cr = c.refine_uniform().unwrap();
        assert_eq!(cr.n_tets(), 48);
        assert_eq!(cr.n_vertices(), 8 + c.edges().len());
        assert!((cr.total_volume() - 1.0).abs() <= 1e-14);
        assert!(conformity_ok(&cr));
        assert!(conformity_ok(&cr.refine_uniform().unwrap()));
    }

    #[test]
    fn perturbation_keeps_boundary_and_volume() {
        let m = build_cube_mesh(3).unwrap();
        let p = m.perturb_interior(0.2, 42).unwrap();
        let flags = m.boundary_vertex_flags();
        let mut moved = 0;
        for v in 0..m.n_vertices() {
            if flags[v] {
                assert_eq!(m.vertices()[v], p.vertices()[v]);
            } else if m.vertices()[v] != p.vertices()[v] {
                moved += 1;
            }
        }
        assert_eq!(moved, 8);
        assert!((p.total_volume() - 1.0).abs() <= 1e-13);
        assert_eq!(p, m.perturb_interior(0.2, 42).unwrap());
    }

    #[test]
    fn node_ele_round_trip() {
        let m = build_cube_mesh(2).unwrap().perturb_interior(0.2, 1).unwrap();
        let back = TetMesh::from_node_ele_text(&m.node_text(), &m.ele_text()).unwrap();
        assert_eq!(m, back);
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("cube");
        m.write_node_ele(&base).unwrap();
        assert_eq!(TetMesh::read_node_ele(&base).unwrap(), m);
    }

    #[test]
    fn degenerate_tet_rejected() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(matches!(TetMesh::new(v, vec![[0, 1, 2, 3]]), Err(Error::DegenerateElement { tet: 0, .. })));
    }
}
