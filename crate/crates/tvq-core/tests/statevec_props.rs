//! Integration properties of string-net states, projectors and moves.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvq_core::fusion::FusionData;
use tvq_core::lattice::{build_honeycomb_torus, build_planar_patch, build_theta_sphere, SurfaceLattice};
use tvq_core::statevec::*;

fn fib() -> FusionData<f64> {
    FusionData::fibonacci()
}

/// Dense Hamiltonian `-ΣQ_v - ΣB_p` restricted to the valid block (every
/// projector vanishes on invalid configurations there, so the invalid block
/// is diagonal with no zero-energy ground states of the same energy).
fn dense_ground_degeneracy(l: &SurfaceLattice) -> usize {
    let f = fib();
    let configs = enumerate_valid_configs(&f, l).unwrap();
    let n = configs.len();
    let index: std::collections::BTreeMap<Config, usize> = configs.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let nv = l.num_triangles() as f64;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] -= nv;
    }
    for p in l.stabilized_plaquettes() {
        for (j, &c) in configs.iter().enumerate() {
            let out = apply_bp(&f, l, &StringNetState::basis(l, c), p.vertex).unwrap();
            for (c2, a) in out.amplitudes() {
                h[(index[c2], j)] -= a.re;
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(h);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    eig.eigenvalues.iter().filter(|&&e| (e - min).abs() < 1e-8).count()
}

#[test]
fn code_space_dims_match_dense_diagonalization() {
    let theta = build_theta_sphere();
    let torus = build_honeycomb_torus(2, 2).unwrap();
    let patch = build_planar_patch(4, 4, &[]).unwrap();
    assert_eq!(code_space_dim(&fib(), &theta).unwrap(), 1);
    assert_eq!(dense_ground_degeneracy(&theta), 1);
    assert_eq!(code_space_dim(&fib(), &torus).unwrap(), 4);
    assert_eq!(dense_ground_degeneracy(&torus), 4);
    assert_eq!(code_space_dim(&fib(), &patch).unwrap(), 1);
    assert_eq!(dense_ground_degeneracy(&patch), 1);
}

#[test]
fn torus_config_count_matches_brute_force() {
    let f = fib();
    let l = build_honeycomb_torus(2, 2).unwrap();
    let fast = enumerate_valid_configs(&f, &l).unwrap();
    let brute: Vec<Config> = (0..(1u128 << 12)).filter(|&c| is_branching_valid(&f, &l, c)).collect();
    assert_eq!(fast, brute);
}

#[test]
fn projectors_commute_on_torus() {
    let f = fib();
    let l = build_honeycomb_torus(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = random_valid_state(&f, &l, &mut rng).unwrap();
    let ps = l.plaquettes();
    for p in &ps {
        for q in &ps {
            let a = apply_bp(&f, &l, &apply_bp(&f, &l, &s, q.vertex).unwrap(), p.vertex).unwrap();
            let b = apply_bp(&f, &l, &apply_bp(&f, &l, &s, p.vertex).unwrap(), q.vertex).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-10);
        }
    }
}

#[test]
fn fmove_preserves_code_space_and_inverts() {
    let f = fib();
    let l = build_honeycomb_torus(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_code_state(&f, &l, &mut rng).unwrap();
    for e in [0u32, 4, 11, 20] {
        let (s2, l2) = apply_fmove(&f, &l, &s, e).unwrap();
        assert!((s2.norm() - 1.0).abs() < 1e-12);
        let p = ground_project(&f, &l2, &s2).unwrap();
        assert!(p.max_abs_diff(&s2) < 1e-10);
        let (s3, l3) = apply_fmove(&f, &l2, &s2, e).unwrap();
        assert!(l3.same_structure(&l));
        let s3 = s3.with_tolerance(s.tolerance());
        let diff = s3.amplitudes().iter().map(|(c, a)| (a - s.amplitude(*c)).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12 && s3.support_len() == s.support_len(), "{diff} {} {}", s3.support_len(), s.support_len());
    }
}

#[test]
fn merge_rejects_excited_state() {
    let f = fib();
    let l = build_planar_patch(4, 4, &[]).unwrap();
    let t = l.triangles().nth(4).unwrap().id;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_code_state(&f, &l, &mut rng).unwrap();
    let (s2, l2) = apply_pachner13(&f, &l, &s, t).unwrap();
    let m = l2.vertices().map(|v| v.id).max().unwrap();
    // Excite by adding a branching-valid but non-projected component.
    let noise = random_valid_state(&f, &l2, &mut rng).unwrap();
    let bad = s2.axpy(Complex::new(0.3, 0.0), &noise).unwrap();
    assert!(matches!(apply_pachner31(&f, &l2, &bad, m), Err(tvq_core::TvqError::ResidualEntanglement { .. })));
}

#[test]
fn dim_invariant_under_random_moves() {
    let f = fib();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for base in [build_honeycomb_torus(2, 2).unwrap(), build_planar_patch(4, 4, &[]).unwrap()] {
        let d0 = code_space_dim(&f, &base).unwrap();
        for _ in 0..3 {
            let mut l = base.clone();
            for _ in 0..4 {
                let e: Vec<u32> = l.edges().filter(|e| e.qubit.is_some()).map(|e| e.id).collect();
                let pick = e[rng.gen_range(0..e.len())];
                if let Ok((l2, _)) = tvq_core::lattice::pachner_22(&l, pick) {
                    l = l2;
                }
            }
            assert_eq!(code_space_dim(&f, &l).unwrap(), d0);
        }
    }
}

#[test]
fn snapshot_round_trip() {
    let f = fib();
    let l = build_theta_sphere();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = random_valid_state(&f, &l, &mut rng).unwrap();
    let mut buf = Vec::new();
    write_snapshot(&s, &l, &mut buf).unwrap();
    let (h, back) = read_snapshot::<f64>(&buf[..]).unwrap();
    assert_eq!(h.edge_count, 3);
    assert_eq!(back, s);
}
