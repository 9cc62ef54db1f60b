use gdd_core::eval::{distortion_errors, objective_table};
use gdd_core::gdd::{build_gdd, descriptor_distance, gh_objective_sampled, reconstruct_distance};
use gdd_core::geodesics::{distance_matrix, GeodesicEngine};
use gdd_core::lbo::{build_laplacian, lbo_eigenbasis, project};
use gdd_core::linalg::polar_orthogonal;
use gdd_core::lowrank::{exact_basis, orthogonalize, LowRankFactorization};
use gdd_core::matching::{icp_match, procrustes, IcpInit, IcpOptions};
use gdd_core::mesh::vertex_areas;
use gdd_core::shapes::{bumpy_ellipsoid, icosphere, unit_square_grid};
use gdd_core::{Alignment, GeodesicDistanceDescriptor, Solver, TriangleMesh};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn random_signature(rng: &mut ChaCha8Rng, k: usize) -> Vec<i8> {
    (0..k)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect()
}

fn block_orthogonal(rng: &mut ChaCha8Rng, sig: &[i8]) -> DMatrix<f64> {
    let k = sig.len();
    let mut m = gaussian(rng, k, k);
    for i in 0..k {
        for j in 0..k {
            if sig[i] != sig[j] {
                m[(i, j)] = 0.0;
            }
        }
    }
    polar_orthogonal(&m)
}

fn small_mesh() -> &'static (TriangleMesh, DMatrix<f64>) {
    static CELL: OnceLock<(TriangleMesh, DMatrix<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = bumpy_ellipsoid(3);
        let d = distance_matrix(&m, Solver::FastMarching).unwrap();
        (m, d)
    })
}

fn full_gdd() -> &'static GeodesicDistanceDescriptor {
    static CELL: OnceLock<GeodesicDistanceDescriptor> = OnceLock::new();
    CELL.get_or_init(|| {
        let (_, d) = small_mesh();
        build_gdd(&exact_basis(d, d.nrows()).unwrap())
    })
}

fn sym(d: &DMatrix<f64>) -> DMatrix<f64> {
    (d + d.transpose()) * 0.5
}

fn rotation(a: f64, b: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cb, -sb], [0.0, sb, cb]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|l| rz[i][l] * rx[l][j]).sum();
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vertex_areas_ignore_face_order(seed in any::<u64>()) {
        let m = bumpy_ellipsoid(2);
        let mut faces = m.faces().to_vec();
        faces.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = TriangleMesh::new(m.vertices().to_vec(), faces).unwrap();
        let (a, b) = (vertex_areas(&m), vertex_areas(&shuffled));
        for (x, y) in a.areas().iter().zip(b.areas()) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn fps_is_deterministic_and_radius_shrinks(seed_vertex in 0usize..162) {
        let m = bumpy_ellipsoid(4);
        let e = GeodesicEngine::new(&m, Solver::FastMarching);
        let a = e.farthest_point_sampling(12, seed_vertex).unwrap();
        let b = e.farthest_point_sampling(12, seed_vertex).unwrap();
        prop_assert_eq!(a.indices(), b.indices());
        let mut last = f64::INFINITY;
        for p in 1..=12 {
            let r = e.farthest_point_sampling(p, seed_vertex).unwrap().covering_radius();
            prop_assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn exact_basis_beats_random_orthonormal_projection(seed in any::<u64>(), k in 1usize..30) {
        let (_, d) = small_mesh();
        let d = sym(d);
        let n = d.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gaussian(&mut rng, n, k).qr().q();
        let projected = (&d - &b * (b.transpose() * &d)).norm();
        let exact = (&d - exact_basis(&d, k).unwrap().reconstruct()).norm();
        prop_assert!(exact <= projected + 1e-9, "{exact} > {projected}");
    }

    #[test]
    fn orthogonalize_preserves_the_matrix(seed in any::<u64>(), n in 5usize..60, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(n);
        let s = gaussian(&mut rng, n, k);
        let t = sym(&gaussian(&mut rng, k, k));
        let f = LowRankFactorization::new(s, t).unwrap();
        let dense = f.to_dense();
        let err = (orthogonalize(&f).reconstruct() - &dense).norm() / dense.norm();
        prop_assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn lbo_projection_is_idempotent_and_error_shrinks(seed in any::<u64>()) {
        static BASIS: OnceLock<gdd_core::LboBasis> = OnceLock::new();
        let basis = BASIS.get_or_init(|| lbo_eigenbasis(&build_laplacian(&bumpy_ellipsoid(3)), 30).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = DVector::from_fn(basis.n_vertices(), |_, _| rng.random::<f64>());
        let a = project(basis, &f).unwrap();
        let again = project(basis, &(basis.phi() * &a)).unwrap();
        prop_assert!((&again - &a).amax() <= 1e-8);
        let mass = DVector::from_vec(basis.mass().to_vec());
        let mut last = f64::INFINITY;
        for k in 1..=basis.len() {
            let tk = basis.truncated(k);
            let r = &f - tk.phi() * project(&tk, &f).unwrap();
            let e = r.component_mul(&r).dot(&mass).sqrt();
            prop_assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn descriptor_distances_survive_block_rotation(seed in any::<u64>()) {
        let x = full_gdd().truncated(40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = block_orthogonal(&mut rng, x.signature());
        let y = x.transformed(&c).unwrap();
        for _ in 0..50 {
            let (i, j) = (rng.random_range(0..x.n_vertices()), rng.random_range(0..x.n_vertices()));
            let (a, b) = (descriptor_distance(&x, i, j).unwrap(), descriptor_distance(&y, i, j).unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            let (a, b) = (reconstruct_distance(&x, i, j).unwrap(), reconstruct_distance(&y, i, j).unwrap());
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn procrustes_beats_random_block_rotations(seed in any::<u64>(), n in 4usize..40, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = random_signature(&mut rng, k);
        let (a, b) = (gaussian(&mut rng, n, k), gaussian(&mut rng, n, k));
        let best = (&a * procrustes(&a, &b, &sig).unwrap().c() - &b).norm();
        for _ in 0..50 {
            let probe = (&a * block_orthogonal(&mut rng, &sig) - &b).norm();
            prop_assert!(best <= probe + 1e-10);
        }
    }

    #[test]
    fn icp_history_never_increases(seed in any::<u64>(), k in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = random_signature(&mut rng, k);
        let eig: Vec<f64> = sig.iter().map(|&s| f64::from(s)).collect();
        let x1 = GeodesicDistanceDescriptor::new(gaussian(&mut rng, 60, k), sig.clone(), eig.clone()).unwrap();
        let x2 = GeodesicDistanceDescriptor::new(gaussian(&mut rng, 50, k), sig.clone(), eig).unwrap();
        let init = IcpInit::Alignment(Alignment::new(block_orthogonal(&mut rng, &sig), sig).unwrap());
        let r = icp_match(&x1, &x2, &init, IcpOptions::default()).unwrap();
        for w in r.history.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", r.history);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn rigid_motion_leaves_descriptor_distances(a in 0.0..6.3f64, b in 0.0..6.3f64, t in -3.0..3.0f64) {
        let (m, _) = small_mesh();
        let r = rotation(a, b);
        let moved = m
            .map_vertices(|v| core::array::from_fn(|i| (0..3).map(|j| r[i][j] * v[j]).sum::<f64>() + t))
            .unwrap();
        let d = distance_matrix(&moved, Solver::FastMarching).unwrap();
        let y = build_gdd(&exact_basis(&d, d.nrows()).unwrap());
        let x = full_gdd();
        for i in (0..x.n_vertices()).step_by(7) {
            for j in 0..x.n_vertices() {
                let (p, q) = (descriptor_distance(x, i, j).unwrap(), descriptor_distance(&y, i, j).unwrap());
                prop_assert!((p - q).abs() <= 1e-6, "{i},{j}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn vertex_relabelling_permutes_descriptor_distances(seed in any::<u64>()) {
        let (m, _) = small_mesh();
        let mut perm: Vec<usize> = (0..m.n_vertices()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pm = m.permuted(&perm).unwrap();
        let d = distance_matrix(&pm, Solver::FastMarching).unwrap();
        let y = build_gdd(&exact_basis(&d, d.nrows()).unwrap());
        let x = full_gdd();
        for i in (0..x.n_vertices()).step_by(5) {
            for j in 0..x.n_vertices() {
                let (p, q) = (descriptor_distance(x, i, j).unwrap(), descriptor_distance(&y, perm[i], perm[j]).unwrap());
                prop_assert!((p - q).abs() <= 1e-6, "{i},{j}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn matched_map_ignores_a_change_of_basis(seed in any::<u64>()) {
        let x1 = full_gdd().truncated(20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..x1.n_vertices()).collect();
        perm.shuffle(&mut rng);
        let sig = x1.signature().to_vec();
        let x2 = x1.permuted_rows(&perm).unwrap().transformed(&block_orthogonal(&mut rng, &sig)).unwrap();
        let c = block_orthogonal(&mut rng, &sig);
        let c0 = block_orthogonal(&mut rng, &sig);
        let rotated = x1.transformed(&c0).unwrap();
        let run = |x: &GeodesicDistanceDescriptor, c: DMatrix<f64>| {
            let init = IcpInit::Alignment(Alignment::new(c, sig.clone()).unwrap());
            icp_match(x, &x2, &init, IcpOptions::default()).unwrap().correspondence
        };
        let base = run(&x1, c.clone());
        let moved = run(&rotated, c0.transpose() * c);
        prop_assert_eq!(base.map(), moved.map());
    }

    #[test]
    fn uniform_scaling_leaves_normalised_errors(s in 0.1..10.0f64, seed in any::<u64>()) {
        let m = icosphere(2);
        let n = m.n_vertices();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corr: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let truth: Vec<usize> = (0..n).collect();
        let scaled = m.map_vertices(|v| v.map(|c| c * s)).unwrap();
        let a = distortion_errors(&corr, &truth, &m, Solver::FastMarching).unwrap();
        let b = distortion_errors(&corr, &truth, &scaled, Solver::FastMarching).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }
}

#[test]
fn objective_table_scores_every_map_on_one_sample() {
    let m = icosphere(2);
    let n = m.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let maps: Vec<(String, Vec<usize>)> = (0..3)
        .map(|i| {
            (
                format!("m{i}"),
                (0..n).map(|_| rng.random_range(0..n)).collect(),
            )
        })
        .collect();
    let rows = objective_table(&maps, &m, &m, 30, 11, Solver::FastMarching).unwrap();
    for ((_, map), row) in maps.iter().zip(&rows) {
        let one = gh_objective_sampled(map, &m, &m, 30, 11, Solver::FastMarching).unwrap();
        assert_eq!((row.rms, row.raw_sq_sum), (one.rms, one.raw_sq_sum));
    }
}

#[test]
fn approximate_basis_improves_with_more_samples() {
    let m = bumpy_ellipsoid(4);
    let d = sym(&distance_matrix(&m, Solver::FastMarching).unwrap());
    let k = 10;
    let mut means = Vec::new();
    for p in [20, 40, 80] {
        let mut total = 0.0;
        for seed_vertex in [0, 31, 62, 93, 124] {
            let opts = gdd_core::lowrank::FactorizationOptions {
                seed_vertex,
                ..gdd_core::lowrank::FactorizationOptions::new(p)
            };
            let basis =
                orthogonalize(&gdd_core::lowrank::build_factorization_with(&m, &opts).unwrap())
                    .truncated(k);
            total += (&d - basis.reconstruct()).norm();
        }
        means.push(total / 5.0);
    }
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
}

#[test]
fn fast_marching_converges_on_the_plane() {
    let err = |res: usize| {
        let m = unit_square_grid(res);
        let d = GeodesicEngine::new(&m, Solver::FastMarching)
            .distance_field(0)
            .unwrap();
        m.vertices()
            .iter()
            .zip(d.values())
            .map(|(v, x)| (x - (v[0] * v[0] + v[1] * v[1]).sqrt()).abs())
            .fold(0.0, f64::max)
    };
    let (a, b, c) = (err(8), err(16), err(32));
    assert!(a > b && b > c, "{a} {b} {c}");
}
