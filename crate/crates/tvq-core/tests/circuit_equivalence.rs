//! Gate-level lowering agrees with the semantic moves.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvq_core::circuits::*;
use tvq_core::fusion::FusionData;
use tvq_core::lattice::{build_honeycomb_torus, build_planar_patch, SurfaceLattice};
use tvq_core::statevec::*;

fn fib() -> FusionData<f64> {
    FusionData::fibonacci()
}

fn fidelity(a: &StringNetState<f64>, b: &StringNetState<f64>) -> f64 {
    let ov = inner(a, b).unwrap().norm();
    ov * ov / (a.norm() * a.norm() * b.norm() * b.norm())
}

/// Random code states as random complex combinations of a few projected
/// seeds (cheap, and still inside the code space).
fn code_states(l: &SurfaceLattice, n: usize, seed: u64) -> Vec<StringNetState<f64>> {
    let f = fib();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<_> = (0..4).map(|_| random_code_state(&f, l, &mut rng).unwrap()).collect();
    (0..n)
        .map(|_| {
            let mut s = seeds[0].scaled(Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            for b in &seeds[1..] {
                s = s.axpy(Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), b).unwrap();
            }
            s.normalized()
        })
        .collect()
}

fn interior_edges(l: &SurfaceLattice) -> Vec<u32> {
    l.edges().filter(|e| e.qubit.is_some()).map(|e| e.id).collect()
}

#[test]
fn compiled_fmove_matches_semantic_on_random_code_states() {
    let f = fib();
    let l = build_honeycomb_torus(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let edges = interior_edges(&l);
    for s in code_states(&l, 50, 22) {
        let e = edges[rng.gen_range(0..edges.len())];
        let c = compile_fmove(&l, e).unwrap();
        let (want, l2) = apply_fmove(&f, &l, &s, e).unwrap();
        let got = simulate_circuit(&c, &FullState::from_string_net(&s)).unwrap();
        let got = got.to_string_net(&l2, 1e-14).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-10, "edge {e}");
        assert!(fidelity(&got, &want) > 1.0 - 1e-10);
    }
}

#[test]
fn compiled_fmove_exhaustive_on_valid_configs() {
    let f = fib();
    let l = build_honeycomb_torus(2, 3).unwrap();
    for e in interior_edges(&l) {
        let Ok(c) = compile_fmove(&l, e) else {
            continue;
        };
        for cfg in enumerate_valid_configs(&f, &l).unwrap() {
            let s = StringNetState::basis(&l, cfg);
            let (want, l2) = apply_fmove(&f, &l, &s, e).unwrap();
            let got = simulate_circuit(&c, &FullState::from_string_net(&s)).unwrap();
            let got = got.to_string_net(&l2, 1e-14).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-10);
        }
    }
}

#[test]
fn compiled_split_matches_semantic() {
    let f = fib();
    let l = build_planar_patch(5, 5, &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tris: Vec<u32> = l.triangles().map(|t| t.id).collect();
    for s in code_states(&l, 50, 5) {
        let t = tris[rng.gen_range(0..tris.len())];
        let c = compile_pachner13(&l, t).unwrap();
        let (want, l2) = apply_pachner13(&f, &l, &s, t).unwrap();
        let got = simulate_circuit(&c, &FullState::from_string_net(&s)).unwrap();
        let got = got.to_string_net(&l2, 1e-14).unwrap();
        assert!(fidelity(&got, &want) > 1.0 - 1e-10);
        assert!(got.max_abs_diff(&want) < 1e-10);
        // Reversed circuit restores the input with the ancillas released.
        let back = simulate_circuit(&c.inverse(), &FullState::from_string_net(&got)).unwrap();
        let back = back.to_string_net(&l, 1e-14).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-10);
    }
}

#[test]
fn sprep_column_is_unit() {
    let a = sprep_angle() / 2.0;
    let v = vacuum_s_from_angle(a);
    assert!((v.0 * v.0 + v.1 * v.1 - 1.0).abs() < 1e-14);
    let s = tvq_core::fusion::vacuum_s_vector(&fib());
    assert!((v.0 - s[0]).abs() < 1e-14 && (v.1 - s[1]).abs() < 1e-14);
}

fn vacuum_s_from_angle(half: f64) -> (f64, f64) {
    (half.cos(), half.sin())
}

#[test]
fn vacuum_legs_leave_target_alone() {
    let g = controlled_f_gates(4, [Some(0), Some(1), Some(2), Some(3)]);
    let c = GateCircuit::from_sequence(0, 1, g);
    for t in 0..2u128 {
        let s = FullState::<f64> { version: 0, amps: [(t << 4, Complex::new(1.0, 0.0))].into_iter().collect() };
        let out = simulate_circuit(&c, &s).unwrap();
        assert!((out.amps[&(t << 4)] - Complex::new(1.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn export_round_trip_and_stability() {
    let l = build_honeycomb_torus(3, 3).unwrap();
    let c = compile_fmove(&l, 4).unwrap();
    let text = circuit_to_json(&c).unwrap();
    assert_eq!(circuit_from_json(&text).unwrap(), c);
    assert_eq!(circuit_to_json(&compile_fmove(&l, 4).unwrap()).unwrap(), text);
    let e = circuit_to_json(&GateCircuit::empty(0)).unwrap();
    assert!(e.contains("\"layers\": []"));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    export_circuit(&c, &p).unwrap();
    assert_eq!(import_circuit(&p).unwrap(), c);
    assert!(matches!(import_circuit(&dir.path().join("missing.json")), Err(tvq_core::TvqError::Io { .. })));
}
