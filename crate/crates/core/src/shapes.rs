//! Procedurally generated meshes used as fixtures and for smoke runs.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math::{self, Vec3};
use crate::mesh::TriangleMesh;

/// Regular `res × res` vertex grid over the unit square in the z = 0 plane.
///
/// Vertex `(i, j)` (column `i`, row `j`) has index `j * res + i`; each cell
/// is split along its `(i, j)–(i+1, j+1)` diagonal.
pub fn unit_square_grid(res: usize) -> TriangleMesh {
    rectangle_grid(res, 1.0, 1.0)
}

pub fn rectangle_grid(res: usize, width: f64, height: f64) -> TriangleMesh {
    assert!(res >= 2, "grid needs at least 2 vertices per side");
    let step_x = width / (res - 1) as f64;
    let step_y = height / (res - 1) as f64;
    let mut vertices = Vec::with_capacity(res * res);
    for j in 0..res {
        for i in 0..res {
            vertices.push([i as f64 * step_x, j as f64 * step_y, 0.0]);
        }
    }
    let mut faces = Vec::with_capacity(2 * (res - 1) * (res - 1));
    for j in 0..res - 1 {
        for i in 0..res - 1 {
            let v00 = j * res + i;
            let v10 = v00 + 1;
            let v01 = v00 + res;
            let v11 = v01 + 1;
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("grid mesh is valid")
}

const PHI: f64 = 1.618_033_988_749_895;

fn icosahedron() -> ([Vec3; 12], [[usize; 3]; 20]) {
    let v = [
        [-1.0, PHI, 0.0],
        [1.0, PHI, 0.0],
        [-1.0, -PHI, 0.0],
        [1.0, -PHI, 0.0],
        [0.0, -1.0, PHI],
        [0.0, 1.0, PHI],
        [0.0, -1.0, -PHI],
        [0.0, 1.0, -PHI],
        [PHI, 0.0, -1.0],
        [PHI, 0.0, 1.0],
        [-PHI, 0.0, -1.0],
        [-PHI, 0.0, 1.0],
    ];
    let f = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Geodesic sphere: every icosahedron face split into `frequency²`
/// triangles, projected onto the unit sphere. Has `10·f² + 2` vertices.
pub fn icosphere(frequency: usize) -> TriangleMesh {
    assert!(frequency >= 1);
    let f = frequency;
    let (base, base_faces) = icosahedron();
    // A lattice point is keyed by its integer barycentric weights on the
    // icosahedron vertices, so points on shared edges coincide.
    let mut index: BTreeMap<[(usize, usize); 3], usize> = BTreeMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    for tri in base_faces.iter() {
        let mut local = alloc::vec![alloc::vec![0usize; f + 1]; f + 1];
        for i in 0..=f {
            for j in 0..=(f - i) {
                let w = [(tri[0], f - i - j), (tri[1], i), (tri[2], j)];
                let mut key = [(usize::MAX, 0); 3];
                let mut parts: Vec<(usize, usize)> =
                    w.iter().copied().filter(|p| p.1 > 0).collect();
                parts.sort_unstable();
                for (slot, p) in parts.into_iter().enumerate() {
                    key[slot] = p;
                }
                let id = *index.entry(key).or_insert_with(|| {
                    let mut p = [0.0; 3];
                    for &(v, wt) in &w {
                        for d in 0..3 {
                            p[d] += base[v][d] * wt as f64 / f as f64;
                        }
                    }
                    let r = math::norm(p);
                    vertices.push([p[0] / r, p[1] / r, p[2] / r]);
                    vertices.len() - 1
                });
                local[i][j] = id;
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                faces.push([local[i][j], local[i + 1][j], local[i][j + 1]]);
                if i + j + 1 < f {
                    faces.push([local[i + 1][j], local[i + 1][j + 1], local[i][j + 1]]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("icosphere is valid")
}

/// A deformed, asymmetric ellipsoid: an icosphere with a smooth radial bump
/// field, stretched to semi-axes of roughly (1.0, 0.7, 0.5). It has no
/// exact symmetries, so its distance spectrum has no repeated eigenvalues.
pub fn bumpy_ellipsoid(frequency: usize) -> TriangleMesh {
    icosphere(frequency)
        .map_vertices(|p| {
            let r = 1.0
                + 0.12 * libm::sin(3.0 * p[0] + 1.0)
                + 0.08 * libm::cos(2.0 * p[1] - 0.3) * p[2]
                + 0.05 * libm::sin(4.0 * p[2] + 2.0 * p[0]);
            [r * p[0], 0.7 * r * p[1], 0.5 * r * p[2]]
        })
        .expect("bumpy ellipsoid is valid")
}
