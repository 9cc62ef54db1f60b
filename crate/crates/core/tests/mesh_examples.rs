use gdd_core::eval::{default_thresholds, distortion_curve, objective_table};
use gdd_core::gdd::{
    build_gdd, descriptor_distance, gh_objective_sampled, reconstruct_distance, sample_vertices,
};
use gdd_core::geodesics::{distance_matrix, GeodesicEngine};
use gdd_core::lbo::{build_laplacian, lbo_eigenbasis};
use gdd_core::linalg::polar_orthogonal;
use gdd_core::lowrank::{build_factorization, exact_basis, orthogonalize};
use gdd_core::matching::{
    align_signatures, init_from_correspondence, init_from_descriptors, init_from_landmarks,
    postprocess_lbo, IcpOptions,
};
use gdd_core::shapes::{bumpy_ellipsoid, unit_square_grid};
use gdd_core::{Correspondence, GeodesicDistanceDescriptor, LandmarkSet, Solver, TriangleMesh};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FMM: Solver = Solver::FastMarching;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &t in &idx[i..=j] {
            r[t] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn sampled_gdd(mesh: &TriangleMesh, p: usize) -> GeodesicDistanceDescriptor {
    build_gdd(&orthogonalize(&build_factorization(mesh, p, FMM).unwrap()))
}

#[test]
fn factorization_with_every_sample_is_the_best_truncation() {
    let m = bumpy_ellipsoid(5);
    let n = m.n_vertices();
    let d = distance_matrix(&m, FMM).unwrap();
    let fact = build_factorization(&m, n, FMM).unwrap();
    let approx = (fact.to_dense() - &d).norm() / d.norm();
    let best = (exact_basis(&d, n.div_ceil(2)).unwrap().reconstruct() - &d).norm() / d.norm();
    assert!(approx <= 1.1 * best, "{approx} vs {best}");
}

#[test]
fn hundred_samples_reconstruct_probed_entries() {
    let m = bumpy_ellipsoid(12);
    let n = m.n_vertices();
    let basis = orthogonalize(&build_factorization(&m, 100, FMM).unwrap());
    let engine = GeodesicEngine::new(&m, FMM);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut err, mut total) = (0.0, 0.0);
    for _ in 0..500 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let there = engine.distances_to(i, &[j]).unwrap()[0];
        let back = engine.distances_to(j, &[i]).unwrap()[0];
        let truth = 0.5 * (there + back);
        err += (basis.reconstruct_entry(i, j).unwrap() - truth).powi(2);
        total += truth * truth;
    }
    let rel = (err / total).sqrt();
    assert!(rel <= 0.05, "{rel}");
}

#[test]
fn exact_basis_beats_lbo_on_a_grid() {
    let m = unit_square_grid(10);
    let d = distance_matrix(&m, FMM).unwrap();
    let k = 10;
    let exact = (exact_basis(&d, k).unwrap().reconstruct() - &d).norm();
    let lbo = lbo_eigenbasis(&build_laplacian(&m), k).unwrap();
    let phi = lbo.phi();
    let mass = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lbo.mass().to_vec()));
    let plain = (phi * (phi.transpose() * &d) - &d).norm();
    let weighted = (phi * (phi.transpose() * &mass * &d) - &d).norm();
    assert!(
        exact <= plain && exact <= weighted,
        "{exact} {plain} {weighted}"
    );
}

#[test]
fn full_rank_basis_and_descriptor_reproduce_distances() {
    let m = bumpy_ellipsoid(4);
    let d = distance_matrix(&m, FMM).unwrap();
    let n = d.nrows();
    let b = exact_basis(&d, n).unwrap();
    assert!((b.reconstruct() - &d).amax() <= 1e-8 * d.amax());
    let x = build_gdd(&b);
    for i in 0..n {
        assert!(reconstruct_distance(&x, i, i).unwrap().abs() <= 1e-6 * d.amax());
        for j in (0..n).step_by(9) {
            let v = reconstruct_distance(&x, i, j).unwrap();
            assert!((v - d[(i, j)]).abs() <= 1e-6 * d.amax());
            assert!((v - b.reconstruct_entry(i, j).unwrap()).abs() <= 1e-12 * d.amax().max(1.0));
        }
    }
}

#[test]
fn descriptor_distance_tracks_geodesic_distance() {
    let m = bumpy_ellipsoid(10);
    let n = m.n_vertices();
    let x = sampled_gdd(&m, 100).truncated(50);
    let engine = GeodesicEngine::new(&m, FMM);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut e, mut g) = (Vec::new(), Vec::new());
    for _ in 0..2000 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        e.push(descriptor_distance(&x, i, j).unwrap());
        g.push(engine.distances_to(i, &[j]).unwrap()[0]);
    }
    let rho = pearson(&ranks(&e), &ranks(&g));
    assert!(rho >= 0.9, "Spearman {rho}");
}

#[test]
fn objective_separates_true_and_random_maps() {
    let m = bumpy_ellipsoid(5);
    let n = m.n_vertices();
    let d = distance_matrix(&m, FMM).unwrap();
    let mean = d.sum() / (n * n) as f64;
    let id: Vec<usize> = (0..n).collect();
    let same = gh_objective_sampled(&id, &m, &m, 60, 0, FMM).unwrap();
    assert!(same.rms <= 1e-3 * mean);

    let perm = shuffled(n, 1);
    let m2 = m.permuted(&perm).unwrap();
    let moved = gh_objective_sampled(&perm, &m, &m2, 60, 0, FMM).unwrap();
    assert!(moved.rms <= 1e-3 * mean);

    let grid = unit_square_grid(10);
    let gid: Vec<usize> = (0..100).collect();
    let base = gh_objective_sampled(&gid, &grid, &grid, 40, 2, FMM)
        .unwrap()
        .rms;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random: Vec<usize> = (0..100).map(|_| rng.random_range(0..100)).collect();
        assert!(
            gh_objective_sampled(&random, &grid, &grid, 40, 2, FMM)
                .unwrap()
                .rms
                > base
        );
    }

    for seed in 0..10 {
        let table = vec![
            ("random".to_string(), shuffled(n, 100 + seed)),
            ("truth".to_string(), perm.clone()),
        ];
        let rows = objective_table(&table, &m, &m2, 60, seed, FMM).unwrap();
        assert_eq!(
            (rows[0].name.as_str(), rows[1].name.as_str()),
            ("random", "truth")
        );
        assert!(rows[1].rms < rows[0].rms);
    }
}

/// The mesh and a shuffled copy, with descriptors related by a known
/// permutation and either a random block rotation or random column signs.
struct SelfMatch {
    x1: GeodesicDistanceDescriptor,
    x2: GeodesicDistanceDescriptor,
    perm: Vec<usize>,
    c0: DMatrix<f64>,
}

fn construction(k: usize, seed: u64, rotate: bool) -> SelfMatch {
    let m = bumpy_ellipsoid(6);
    let x = sampled_gdd(&m, 2 * k).truncated(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = shuffled(x.n_vertices(), seed);
    let sig = x.signature().to_vec();
    let mut raw = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() - 0.5);
    for i in 0..k {
        for j in 0..k {
            if sig[i] != sig[j] {
                raw[(i, j)] = 0.0;
            }
        }
    }
    let c0 = if rotate {
        polar_orthogonal(&raw)
    } else {
        DMatrix::from_fn(k, k, |i, j| if i == j { raw[(i, i)].signum() } else { 0.0 })
    };
    let x2 = x.permuted_rows(&perm).unwrap().transformed(&c0).unwrap();
    SelfMatch {
        x1: x,
        x2,
        perm,
        c0,
    }
}

#[test]
fn correspondence_init_survives_corruption() {
    let s = construction(20, 4, true);
    let n = s.perm.len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut map = s.perm.clone();
    for v in 0..n {
        if rng.random::<f64>() < 0.2 {
            map[v] = rng.random_range(0..n);
        }
    }
    let c = init_from_correspondence(&Correspondence::new(map, n).unwrap(), &s.x1, &s.x2).unwrap();
    let dist = (c.c() - &s.c0).norm();
    assert!(dist <= 0.5, "{dist}");
}

#[test]
fn delta_descriptors_agree_with_landmarks() {
    let s = construction(20, 5, false);
    let n = s.perm.len();
    let lms = sample_vertices(n, 40, 5).unwrap();
    let d1 = DMatrix::from_fn(n, lms.len(), |v, c| if v == lms[c] { 1.0 } else { 0.0 });
    let d2 = DMatrix::from_fn(
        n,
        lms.len(),
        |v, c| if v == s.perm[lms[c]] { 1.0 } else { 0.0 },
    );
    let from_desc = init_from_descriptors(&d1, &d2, &s.x1, &s.x2).unwrap();
    assert!(!from_desc.underdetermined);
    let set = LandmarkSet::new(lms.iter().map(|&v| (v, s.perm[v])).collect(), n, n).unwrap();
    let from_lm = init_from_landmarks(&s.x1, &s.x2, &set, 20, None).unwrap();
    let dist = (from_desc.alignment.c() - from_lm.c()).norm();
    assert!(dist <= 0.5, "{dist}");
}

#[test]
fn lbo_refinement_does_not_lose_correct_vertices() {
    let m = bumpy_ellipsoid(6);
    let n = m.n_vertices();
    let perm = shuffled(n, 6);
    let m2 = m.permuted(&perm).unwrap();
    let phi1 = lbo_eigenbasis(&build_laplacian(&m), 30).unwrap();
    let phi2 = lbo_eigenbasis(&build_laplacian(&m2), 30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut map = perm.clone();
    for v in 0..n {
        if rng.random::<f64>() < 0.05 {
            map[v] = rng.random_range(0..n);
        }
    }
    let start = Correspondence::new(map, n).unwrap();
    let before = start.agreement(&perm);
    let refined = postprocess_lbo(&start, &phi1, &phi2, IcpOptions::default()).unwrap();
    assert!(refined.correspondence.agreement(&perm) >= before);
    assert!(refined.max_row_residual.is_finite() && refined.rms_residual.is_finite());
    assert!(refined.correspondence.map().iter().all(|&t| t < n));

    let exact = Correspondence::new(perm.clone(), n).unwrap();
    let kept = postprocess_lbo(&exact, &phi1, &phi2, IcpOptions::default()).unwrap();
    assert_eq!(kept.correspondence.map(), perm.as_slice());
}

#[test]
fn distortion_curve_ignores_vertex_order() {
    let m = unit_square_grid(9);
    let n = m.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth: Vec<usize> = (0..n).collect();
    let corr: Vec<usize> = (0..n)
        .map(|v| {
            if rng.random::<f64>() < 0.3 {
                rng.random_range(0..n)
            } else {
                v
            }
        })
        .collect();
    let order = shuffled(n, 7);
    let corr2: Vec<usize> = order.iter().map(|&i| corr[i]).collect();
    let truth2: Vec<usize> = order.iter().map(|&i| truth[i]).collect();
    let th = default_thresholds();
    let a = distortion_curve(&corr, &truth, &m, &th, FMM).unwrap();
    let b = distortion_curve(&corr2, &truth2, &m, &th, FMM).unwrap();
    assert_eq!(a, b);
}

#[test]
fn signature_alignment_is_a_no_op_on_matching_shapes() {
    let s = construction(20, 8, true);
    let (a, b) = align_signatures(&s.x1, &s.x2, 20).unwrap();
    assert_eq!(a, s.x1);
    assert_eq!(b, s.x2);
}
