//! Triangle meshes, validation and per-vertex area weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Vec3};

/// A validated triangle mesh: non-degenerate faces, in-range indices and a
/// single connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

/// Relative area threshold below which a face counts as degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriangleMesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::FaceIndexOutOfRange {
                        face: fi,
                        index: v,
                        n,
                    });
                }
            }
            if f[0] == f[1] || f[0] == f[2] {
                return Err(Error::RepeatedFaceIndex {
                    face: fi,
                    index: f[0],
                });
            }
            if f[1] == f[2] {
                return Err(Error::RepeatedFaceIndex {
                    face: fi,
                    index: f[1],
                });
            }
        }
        let diag = self.bounding_box_diagonal();
        let min_area = DEGENERATE_AREA_RATIO * diag * diag;
        for fi in 0..self.faces.len() {
            let area = self.face_area(fi);
            if !(area > min_area) {
                return Err(Error::DegenerateFace { face: fi, area });
            }
        }
        self.check_connected()?;
        let non_manifold = self.non_manifold_edge_count();
        if non_manifold > 0 {
            log::warn!("mesh has {non_manifold} non-manifold edges");
        }
        Ok(())
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for f in &self.faces {
            for e in 0..3 {
                let a = find(&mut parent, f[e]);
                let b = find(&mut parent, f[(e + 1) % 3]);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut components = 0;
        let mut first_bad = None;
        let root0 = find(&mut parent, 0);
        for v in 0..n {
            let r = find(&mut parent, v);
            if r == v {
                components += 1;
            }
            if r != root0 && first_bad.is_none() {
                first_bad = Some(v);
            }
        }
        match first_bad {
            Some(vertex) => Err(Error::Disconnected { components, vertex }),
            None => Ok(()),
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        math::triangle_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        math::dist(lo, hi)
    }

    /// Sorted, de-duplicated vertex neighbours via face edges.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Undirected edges `(min, max, face)` sorted by edge key; one entry per
    /// face incidence.
    pub(crate) fn edge_face_incidence(&self) -> Vec<(usize, usize, usize)> {
        let mut inc = Vec::with_capacity(3 * self.faces.len());
        for (fi, f) in self.faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                inc.push((a.min(b), a.max(b), fi));
            }
        }
        inc.sort_unstable();
        inc
    }

    /// Number of edges shared by more than two faces.
    pub fn non_manifold_edge_count(&self) -> usize {
        let inc = self.edge_face_incidence();
        let mut count = 0;
        let mut i = 0;
        while i < inc.len() {
            let mut j = i + 1;
            while j < inc.len() && inc[j].0 == inc[i].0 && inc[j].1 == inc[i].1 {
                j += 1;
            }
            if j - i > 2 {
                count += 1;
            }
            i = j;
        }
        count
    }

    /// Relabels vertices so that old vertex `i` becomes vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<TriangleMesh> {
        let n = self.vertices.len();
        if perm.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "permutation has {} entries for {} vertices",
                perm.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        let mut vertices = vec![[0.0; 3]; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument(alloc::format!(
                    "not a permutation at entry {i}"
                )));
            }
            seen[p] = true;
            vertices[p] = self.vertices[i];
        }
        let faces = self
            .faces
            .iter()
            .map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]])
            .collect();
        Ok(TriangleMesh { vertices, faces })
    }

    /// Applies `f` to every vertex position and re-validates the result.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> Result<TriangleMesh> {
        TriangleMesh::new(
            self.vertices.iter().map(|&v| f(v)).collect(),
            self.faces.clone(),
        )
    }
}

/// Lumped per-vertex areas.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexWeights {
    areas: Vec<f64>,
}

impl VertexWeights {
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }
}

/// Barycentric lumping: every face gives a third of its area to each corner.
pub fn vertex_areas(mesh: &TriangleMesh) -> VertexWeights {
    let mut areas = vec![0.0; mesh.n_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let third = mesh.face_area(fi) / 3.0;
        for &v in f {
            areas[v] += third;
        }
    }
    VertexWeights { areas }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn tetrahedron() -> TriangleMesh {
        let s = 1.0 / math::sqrt(2.0);
        TriangleMesh::new(
            vec![
                [1.0, 0.0, -s],
                [-1.0, 0.0, -s],
                [0.0, 1.0, s],
                [0.0, -1.0, s],
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn tetrahedron_counts_and_equal_areas() {
        let m = tetrahedron();
        assert_eq!((m.n_vertices(), m.n_faces()), (4, 4));
        let w = vertex_areas(&m);
        let quarter = m.total_area() / 4.0;
        for &a in w.areas() {
            assert!((a - quarter).abs() < 1e-12);
        }
    }

    #[test]
    fn equilateral_triangle_thirds() {
        let h = math::sqrt(3.0) / 2.0;
        let m = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let w = vertex_areas(&m);
        let expect = (math::sqrt(3.0) / 4.0) / 3.0;
        for &a in w.areas() {
            assert!((a - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_grid_area_sums_to_one() {
        let m = shapes::unit_square_grid(10);
        assert_eq!((m.n_vertices(), m.n_faces()), (100, 162));
        assert!((m.total_area() - 1.0).abs() < 1e-9);
        assert!((vertex_areas(&m).total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_faces() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(Error::FaceIndexOutOfRange {
                face: 0,
                index: 3,
                ..
            })
        ));
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 1]]),
            Err(Error::RepeatedFaceIndex { face: 0, .. })
        ));
        let collinear = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(
            TriangleMesh::new(collinear, vec![[0, 1, 2]]),
            Err(Error::DegenerateFace { face: 0, .. })
        ));
        assert_eq!(TriangleMesh::new(v, vec![]), Err(Error::EmptyMesh));
    }

    #[test]
    fn rejects_disconnected() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [5.0, 0.0, 0.0],
            [6.0, 0.0, 0.0],
            [5.0, 1.0, 0.0],
        ];
        let err = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap_err();
        assert_eq!(
            err,
            Error::Disconnected {
                components: 2,
                vertex: 3
            }
        );
    }

    #[test]
    fn isolated_vertex_is_disconnected() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [3.0, 3.0, 3.0],
        ];
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 2]]),
            Err(Error::Disconnected { vertex: 3, .. })
        ));
    }

    #[test]
    fn non_manifold_edge_is_allowed() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, 1.0, 0.0],
            [0.5, -1.0, 0.0],
            [0.5, 0.0, 1.0],
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        assert_eq!(m.non_manifold_edge_count(), 1);
    }

    #[test]
    fn permutation_preserves_geometry() {
        let m = shapes::unit_square_grid(4);
        let perm: Vec<usize> = (0..16).map(|i| (i * 5 + 3) % 16).collect();
        let p = m.permuted(&perm).unwrap();
        for i in 0..16 {
            assert_eq!(p.vertices()[perm[i]], m.vertices()[i]);
        }
        assert!((p.total_area() - m.total_area()).abs() < 1e-15);
    }
}
