//! Single-source geodesic distances on triangle meshes and farthest point
//! sampling.
//!
//! The fast-marching solver uses the first-order triangle update of Kimmel and
//! Sethian: the arrival time at a vertex is extrapolated from a planar front
//! crossing the opposite edge. Obtuse corners are split by unfolding
//! neighbouring triangles into the corner's plane until a vertex falls inside
//! the obtuse wedge; the two resulting virtual triangles are acute at the
//! updated vertex.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math::{self, Vec2};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Solver {
    #[default]
    FastMarching,
    Dijkstra,
}

/// Distances from one source vertex to every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    source: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Result of farthest point sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    indices: Vec<usize>,
    covering_radius: f64,
}

impl SampleSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Largest distance from any vertex to its nearest sample.
    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Maximum number of triangles crossed while unfolding an obtuse corner.
const MAX_UNFOLD_STEPS: usize = 16;

#[derive(Debug, Clone)]
struct Stencil {
    target: usize,
    a: usize,
    b: usize,
    // positions of a and b in a planar frame with the target at the origin
    pa: Vec2,
    pb: Vec2,
}

#[derive(PartialEq)]
struct Front {
    dist: f64,
    vertex: usize,
}

impl Eq for Front {}

impl Ord for Front {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, lowest index first on ties
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Precomputed propagation structure for one mesh and solver.
#[derive(Debug, Clone)]
pub struct GeodesicEngine<'m> {
    mesh: &'m TriangleMesh,
    solver: Solver,
    edges: Vec<Vec<(usize, f64)>>,
    stencils: Vec<Stencil>,
    stencils_by_vertex: Vec<Vec<usize>>,
}

impl<'m> GeodesicEngine<'m> {
    pub fn new(mesh: &'m TriangleMesh, solver: Solver) -> Self {
        let n = mesh.n_vertices();
        let pos = mesh.vertices();
        let mut edges: Vec<Vec<(usize, f64)>> = mesh
            .vertex_neighbors()
            .into_iter()
            .enumerate()
            .map(|(v, nb)| {
                nb.into_iter()
                    .map(|u| (u, math::dist(pos[v], pos[u])))
                    .collect()
            })
            .collect();
        let mut stencils = Vec::new();
        if solver == Solver::FastMarching {
            let incidence = mesh.edge_face_incidence();
            for (fi, f) in mesh.faces().iter().enumerate() {
                for corner in 0..3 {
                    let c = f[corner];
                    let a = f[(corner + 1) % 3];
                    let b = f[(corner + 2) % 3];
                    corner_stencils(mesh, &incidence, fi, c, a, b, &mut stencils, &mut edges);
                }
            }
        }
        let mut stencils_by_vertex = vec![Vec::new(); n];
        for (id, s) in stencils.iter().enumerate() {
            stencils_by_vertex[s.a].push(id);
            stencils_by_vertex[s.b].push(id);
        }
        GeodesicEngine {
            mesh,
            solver,
            edges,
            stencils,
            stencils_by_vertex,
        }
    }

    pub fn mesh(&self) -> &'m TriangleMesh {
        self.mesh
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    fn check_index(&self, v: usize) -> Result<()> {
        let n = self.mesh.n_vertices();
        if v >= n {
            Err(Error::IndexOutOfRange { index: v, n })
        } else {
            Ok(())
        }
    }

    /// Runs the propagation from `source`, calling `on_accept` for every
    /// vertex whose distance becomes final; stops early when it returns true.
    fn propagate(&self, source: usize, mut on_accept: impl FnMut(usize) -> bool) -> Vec<f64> {
        let n = self.mesh.n_vertices();
        let mut dist = vec![f64::INFINITY; n];
        let mut alive = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Front {
            dist: 0.0,
            vertex: source,
        });
        while let Some(Front { dist: d, vertex: v }) = heap.pop() {
            if alive[v] || d > dist[v] {
                continue;
            }
            alive[v] = true;
            if on_accept(v) {
                break;
            }
            for &(u, len) in &self.edges[v] {
                if !alive[u] {
                    let t = d + len;
                    if t < dist[u] {
                        dist[u] = t;
                        heap.push(Front { dist: t, vertex: u });
                    }
                }
            }
            for &id in &self.stencils_by_vertex[v] {
                let s = &self.stencils[id];
                if alive[s.target] || !alive[s.a] || !alive[s.b] {
                    continue;
                }
                let t = triangle_update(s.pa, s.pb, dist[s.a], dist[s.b]);
                if t < dist[s.target] {
                    dist[s.target] = t;
                    heap.push(Front {
                        dist: t,
                        vertex: s.target,
                    });
                }
            }
        }
        dist
    }

    pub fn distance_field(&self, source: usize) -> Result<DistanceField> {
        self.check_index(source)?;
        let values = self.propagate(source, |_| false);
        if let Some(vertex) = values.iter().position(|d| !d.is_finite()) {
            return Err(Error::Unreachable {
                origin: source,
                vertex,
            });
        }
        Ok(DistanceField { source, values })
    }

    /// Distances from `source` to each of `targets`, stopping the front as
    /// soon as every target is final.
    pub fn distances_to(&self, source: usize, targets: &[usize]) -> Result<Vec<f64>> {
        self.check_index(source)?;
        for &t in targets {
            self.check_index(t)?;
        }
        let n = self.mesh.n_vertices();
        let mut wanted = vec![false; n];
        let mut remaining = 0usize;
        for &t in targets {
            if !wanted[t] {
                wanted[t] = true;
                remaining += 1;
            }
        }
        if remaining == 0 {
            return Ok(Vec::new());
        }
        let values = self.propagate(source, |v| {
            if wanted[v] {
                remaining -= 1;
            }
            remaining == 0
        });
        targets
            .iter()
            .map(|&t| {
                if values[t].is_finite() {
                    Ok(values[t])
                } else {
                    Err(Error::Unreachable {
                        origin: source,
                        vertex: t,
                    })
                }
            })
            .collect()
    }

    /// Greedy farthest point sampling; also returns the distance field of
    /// every chosen sample, in sample order.
    pub fn farthest_point_sampling_with_fields(
        &self,
        p: usize,
        seed_vertex: usize,
    ) -> Result<(SampleSet, Vec<Vec<f64>>)> {
        let n = self.mesh.n_vertices();
        if p == 0 || p > n {
            return Err(Error::InvalidSampleCount { p, min: 1, n });
        }
        self.check_index(seed_vertex)?;
        let mut indices = Vec::with_capacity(p);
        let mut fields = Vec::with_capacity(p);
        let mut chosen = vec![false; n];
        let mut min_dist = vec![f64::INFINITY; n];
        let mut next = seed_vertex;
        loop {
            chosen[next] = true;
            indices.push(next);
            let field = self.distance_field(next)?.into_values();
            for (m, &d) in min_dist.iter_mut().zip(&field) {
                if d < *m {
                    *m = d;
                }
            }
            min_dist[next] = 0.0;
            fields.push(field);
            if indices.len() == p {
                break;
            }
            let mut best = usize::MAX;
            for v in 0..n {
                if !chosen[v] && (best == usize::MAX || min_dist[v] > min_dist[best]) {
                    best = v;
                }
            }
            next = best;
        }
        for (v, m) in min_dist.iter_mut().enumerate() {
            if chosen[v] {
                *m = 0.0;
            }
        }
        let covering_radius = min_dist.iter().copied().fold(0.0, f64::max);
        Ok((
            SampleSet {
                indices,
                covering_radius,
            },
            fields,
        ))
    }

    pub fn farthest_point_sampling(&self, p: usize, seed_vertex: usize) -> Result<SampleSet> {
        self.farthest_point_sampling_with_fields(p, seed_vertex)
            .map(|(s, _)| s)
    }

    /// `sources.len() × n` matrix whose row `i` is the distance field of
    /// `sources[i]`. Rows are computed independently (in parallel with the
    /// `parallel` feature), so the result does not depend on scheduling.
    pub fn rows(&self, sources: &[usize]) -> Result<DMatrix<f64>> {
        let n = self.mesh.n_vertices();
        let fields = crate::par_map(sources.len(), |i| self.distance_field(sources[i]));
        let mut out = DMatrix::zeros(sources.len(), n);
        for (i, field) in fields.into_iter().enumerate() {
            let field = field?;
            for (j, &d) in field.values().iter().enumerate() {
                out[(i, j)] = d;
            }
        }
        Ok(out)
    }
}

fn faces_of_edge(
    incidence: &[(usize, usize, usize)],
    u: usize,
    w: usize,
) -> &[(usize, usize, usize)] {
    let key = (u.min(w), u.max(w));
    let start = incidence.partition_point(|e| (e.0, e.1) < key);
    let end = incidence.partition_point(|e| (e.0, e.1) <= key);
    &incidence[start..end]
}

#[allow(clippy::too_many_arguments)]
fn corner_stencils(
    mesh: &TriangleMesh,
    incidence: &[(usize, usize, usize)],
    face: usize,
    c: usize,
    a: usize,
    b: usize,
    stencils: &mut Vec<Stencil>,
    edges: &mut [Vec<(usize, f64)>],
) {
    let pos = mesh.vertices();
    let ea = math::sub(pos[a], pos[c]);
    let eb = math::sub(pos[b], pos[c]);
    let la = math::norm(ea);
    let lb = math::norm(eb);
    let cos = math::dot(ea, eb) / (la * lb);
    let sin = math::norm(math::cross(ea, eb)) / (la * lb);
    let pa = [la, 0.0];
    let pb = [lb * cos, lb * sin];
    if cos >= 0.0 {
        stencils.push(Stencil {
            target: c,
            a,
            b,
            pa,
            pb,
        });
        return;
    }
    // Obtuse at c: walk across the opposite edge until a vertex lands in the wedge.
    let (mut u, mut pu) = (a, pa);
    let (mut w, mut pw) = (b, pb);
    let mut current = face;
    for _ in 0..MAX_UNFOLD_STEPS {
        let adjacent = faces_of_edge(incidence, u, w);
        if adjacent.len() != 2 {
            break;
        }
        let next = if adjacent[0].2 == current {
            adjacent[1].2
        } else {
            adjacent[0].2
        };
        let d = match mesh.faces()[next]
            .iter()
            .copied()
            .find(|&x| x != u && x != w)
        {
            Some(d) => d,
            None => break,
        };
        if d == c {
            break;
        }
        let lud = math::dist(pos[u], pos[d]);
        let lwd = math::dist(pos[w], pos[d]);
        let e = math::sub2(pw, pu);
        let l = math::norm2(e);
        let along = (lud * lud - lwd * lwd + l * l) / (2.0 * l);
        let h = math::sqrt((lud * lud - along * along).max(0.0));
        let eh = [e[0] / l, e[1] / l];
        let mut normal = [-eh[1], eh[0]];
        // the unfolded triangle lies on the far side of edge (u, w) from c
        if math::dot2(normal, [-pu[0], -pu[1]]) > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let pd = [
            pu[0] + along * eh[0] + h * normal[0],
            pu[1] + along * eh[1] + h * normal[1],
        ];
        let left = math::cross2(pa, pd);
        let right = math::cross2(pd, pb);
        if left > 0.0 && right > 0.0 {
            stencils.push(Stencil {
                target: c,
                a,
                b: d,
                pa,
                pb: pd,
            });
            stencils.push(Stencil {
                target: c,
                a: d,
                b,
                pa: pd,
                pb,
            });
            let len = math::norm2(pd);
            edges[c].push((d, len));
            edges[d].push((c, len));
            return;
        }
        if left <= 0.0 {
            u = d;
            pu = pd;
        } else {
            w = d;
            pw = pd;
        }
        current = next;
    }
    stencils.push(Stencil {
        target: c,
        a,
        b,
        pa,
        pb,
    });
}

/// Arrival time at the origin from known times `ta`, `tb` at planar
/// positions `pa`, `pb`, assuming a planar front with unit speed. Falls back
/// to the cheaper of the two edge paths when the front's characteristic does
/// not reach the origin through the segment `pa–pb`.
fn triangle_update(pa: Vec2, pb: Vec2, ta: f64, tb: f64) -> f64 {
    let edge_only = (ta + math::norm2(pa)).min(tb + math::norm2(pb));
    let e = math::sub2(pb, pa);
    let l = math::norm2(e);
    let dt = tb - ta;
    if dt.abs() >= l {
        return edge_only;
    }
    let eh = [e[0] / l, e[1] / l];
    let mut perp = [-eh[1], eh[0]];
    let to_origin = [-pa[0], -pa[1]];
    if math::dot2(perp, to_origin) < 0.0 {
        perp = [-perp[0], -perp[1]];
    }
    let s = dt / l;
    let c = math::sqrt(1.0 - s * s);
    let dir = [s * eh[0] + c * perp[0], s * eh[1] + c * perp[1]];
    let t = ta + math::dot2(dir, to_origin);
    // foot of the characteristic through the origin on the line (pa, pb)
    let lambda = math::dot2(perp, to_origin) / c;
    let foot = [-lambda * dir[0], -lambda * dir[1]];
    let param = math::dot2(eh, math::sub2(foot, pa)) / l;
    if (0.0..=1.0).contains(&param) && t >= ta.max(tb) {
        t.min(edge_only)
    } else {
        edge_only
    }
}

pub fn geodesic_from(mesh: &TriangleMesh, source: usize, solver: Solver) -> Result<DistanceField> {
    GeodesicEngine::new(mesh, solver).distance_field(source)
}

pub fn farthest_point_sampling(
    mesh: &TriangleMesh,
    p: usize,
    seed_vertex: usize,
    solver: Solver,
) -> Result<SampleSet> {
    GeodesicEngine::new(mesh, solver).farthest_point_sampling(p, seed_vertex)
}

pub fn geodesic_rows(
    mesh: &TriangleMesh,
    sources: &SampleSet,
    solver: Solver,
) -> Result<DMatrix<f64>> {
    GeodesicEngine::new(mesh, solver).rows(sources.indices())
}

/// Averages the two computed directions of every sample-to-sample distance
/// in a `p × n` row block: entries `(i, s_j)` and `(j, s_i)`.
pub fn symmetrize_sampled(rows: &mut DMatrix<f64>, sources: &[usize]) {
    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            let avg = 0.5 * (rows[(i, sources[j])] + rows[(j, sources[i])]);
            rows[(i, sources[j])] = avg;
            rows[(j, sources[i])] = avg;
        }
    }
}

/// Full `n × n` symmetrized geodesic distance matrix.
pub fn distance_matrix(mesh: &TriangleMesh, solver: Solver) -> Result<DMatrix<f64>> {
    let sources: Vec<usize> = (0..mesh.n_vertices()).collect();
    let mut d = GeodesicEngine::new(mesh, solver).rows(&sources)?;
    symmetrize_sampled(&mut d, &sources);
    Ok(d)
}
