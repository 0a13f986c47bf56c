//! Braiding gadgets: row split/merge, shear step, constant-depth braid and
//! the sequential baseline, at combinatorial and state level.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvq_core::circuits::compile_schedule;
use tvq_core::gadgets::{
    braid, braid_setup, hexagon_path, logical_action, merge_rows, phase_distance, sequential_baseline, shear_step,
    split_row, transfer_matrix, unitarity_defect, Direction, Matrix, RowSpec,
};
use tvq_core::lattice::{isomorphism_check, SurfaceLattice, VertexId};
use tvq_core::schedule::MoveSchedule;
use tvq_core::statevec::{code_space_basis, ground_project, random_code_state, StringNetState};
use tvq_core::{FusionDataF64, TvqError};

fn braid_patch(d: usize) -> (SurfaceLattice, VertexId, VertexId) {
    let s = braid_setup(d).unwrap();
    (s.lattice, s.moving, s.center)
}

/// The d = 2 state-level patch: 5 × 5 vertices, `II` at (2, 2), `I` at (3, 2).
fn small_patch() -> (SurfaceLattice, VertexId, VertexId) {
    let l = SurfaceLattice::planar_patch_with(5, 5, &[(2, 2), (2, 3)], true).unwrap();
    let center = l.vertex_at(2.0, 2.0).unwrap();
    let moving = l.vertex_at(3.0, 2.0).unwrap();
    (l, moving, center)
}

fn prefix(s: &MoveSchedule, groups: usize) -> MoveSchedule {
    MoveSchedule { input_version: s.input_version, groups: s.groups[..groups].to_vec() }
}

fn identity(n: usize) -> Matrix<f64> {
    (0..n).map(|i| (0..n).map(|j| Complex::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()).collect()
}

fn matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn max_entry_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm())).fold(0.0, f64::max)
}

// ----------------------------------------------------------------------
// Row split / merge
// ----------------------------------------------------------------------

#[test]
fn split_row_depth_is_independent_of_length() {
    let l = SurfaceLattice::planar_patch(6, 12, &[]).unwrap();
    let depths: Vec<usize> = [2usize, 4, 8]
        .iter()
        .map(|&len| {
            let (out, middle) = split_row(&l, RowSpec { row: 2, x0: 1, len }).unwrap();
            out.schedule.validate().unwrap();
            assert_eq!(middle.len(), len);
            out.lattice.validate().unwrap();
            out.schedule.depth_report().local_depth
        })
        .collect();
    assert_eq!(depths, vec![3, 3, 3]);
}

#[test]
fn split_row_touches_row_boundary_only_as_controls() {
    let l = SurfaceLattice::planar_patch(6, 12, &[]).unwrap();
    let spec = RowSpec { row: 2, x0: 1, len: 4 };
    let (out, _) = split_row(&l, spec).unwrap();
    let at = |x: i64, y: i64| l.vertex_at(x as f64, y as f64).unwrap();
    let boundary: Vec<_> = (1..5)
        .flat_map(|x| [l.edge_between(at(x, 2), at(x + 1, 2)), l.edge_between(at(x, 3), at(x + 1, 3))])
        .map(Option::unwrap)
        .collect();
    for m in out.schedule.moves() {
        match m {
            tvq_core::lattice::MoveRecord::FMove { edge, .. } => assert!(!boundary.contains(edge)),
            tvq_core::lattice::MoveRecord::Pachner13 { new_edges, .. } => {
                assert!(new_edges.iter().all(|e| !boundary.contains(e)))
            }
            other => panic!("unexpected move {}", other.kind()),
        }
    }
    for e in &boundary {
        let before = l.edge(*e).unwrap();
        let after = out.lattice.edge(*e).unwrap();
        assert!(after.joins(before.v1, before.v2));
    }
}

#[test]
fn split_and_merge_preserve_code_space_and_round_trip() {
    let f = FusionDataF64::fibonacci();
    let l = SurfaceLattice::planar_patch(5, 5, &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let psi = random_code_state(&f, &l, &mut rng).unwrap();
    let (split, middle) = split_row(&l, RowSpec { row: 1, x0: 1, len: 2 }).unwrap();
    let merge = merge_rows(&split.lattice, &middle).unwrap();
    assert_eq!(merge.schedule.depth_report().local_depth, 3);
    let mut full = split.schedule.clone();
    full.extend(merge.schedule.clone());
    let check = |_: usize, lat: &SurfaceLattice, s: &StringNetState<f64>| -> tvq_core::Result<()> {
        let p = ground_project(&f, lat, s)?;
        assert!(p.max_abs_diff(s) < 1e-10, "left the code space: {}", p.max_abs_diff(s));
        Ok(())
    };
    let (out, lat) = full.replay_state(&f, &l, &psi, check).unwrap();
    assert!(lat.same_structure(&l));
    assert!(isomorphism_check(&lat, &l).is_some());
    let back = out.transport_to(&lat, &l).unwrap();
    assert!(back.max_abs_diff(&psi) < 1e-10);
}

#[test]
fn row_gadget_errors() {
    let l = SurfaceLattice::planar_patch(6, 8, &[(2, 3)]).unwrap();
    assert!(matches!(split_row(&l, RowSpec { row: 2, x0: 1, len: 0 }), Err(TvqError::InvalidArgument(_))));
    assert!(matches!(split_row(&l, RowSpec { row: 2, x0: 1, len: 4 }), Err(TvqError::MoveRejected(_))));
    assert!(matches!(split_row(&l, RowSpec { row: 2, x0: 5, len: 6 }), Err(TvqError::InvalidArgument(_))));
    assert!(matches!(merge_rows(&l, &[]), Err(TvqError::InvalidArgument(_))));
}

// ----------------------------------------------------------------------
// Shear step
// ----------------------------------------------------------------------

#[test]
fn shear_step_moves_puncture_by_half_distance() {
    let d = 4;
    let (l, moving, center) = braid_patch(d);
    let (x, y) = l.position(moving);
    let out = shear_step(&l, moving, Direction::E2, d / 2).unwrap();
    out.schedule.validate().unwrap();
    let arrived = out.lattice.vertex_at(x, y + (d / 2) as f64).unwrap();
    assert!(out.lattice.is_puncture(arrived));
    assert!(!out.lattice.is_puncture(moving));
    assert!(out.lattice.is_puncture(center));
    // The anchor k steps behind keeps its place: separation doubles.
    let anchor = (x, y - (d / 2) as f64);
    let before = y - anchor.1;
    let after = out.lattice.position(arrived).1 - anchor.1;
    assert_eq!(after, 2.0 * before);
    let expected = l.with_punctures([center, arrived]).unwrap();
    assert!(out.lattice.same_structure(&expected));
    assert!(isomorphism_check(&out.lattice, &expected).is_some());
}

#[test]
fn shear_step_depth_is_constant_in_every_direction() {
    for k in 1..=4usize {
        let n = 6 * k + 5;
        let c = n / 2;
        let l = SurfaceLattice::planar_patch(n, n, &[(c, c)]).unwrap();
        let a = l.vertex_at(c as f64, c as f64).unwrap();
        for dir in Direction::ALL {
            let out = shear_step(&l, a, dir, k).unwrap();
            out.schedule.validate().unwrap();
            let r = out.schedule.depth_report();
            assert_eq!(r.local_depth, 8, "k={k} {dir:?}");
            let (dx, dy) = dir.vector();
            let target = l.vertex_at((c as i64 + dx * k as i64) as f64, (c as i64 + dy * k as i64) as f64).unwrap();
            assert!(out.lattice.same_structure(&l.with_punctures([target]).unwrap()), "k={k} {dir:?}");
        }
    }
}

#[test]
fn shear_step_rejects_blocked_corridor_and_bad_input() {
    let l = SurfaceLattice::planar_patch(17, 17, &[(8, 8), (10, 8)]).unwrap();
    let a = l.vertex_at(8.0, 8.0).unwrap();
    assert!(matches!(shear_step(&l, a, Direction::E2, 2), Err(TvqError::MoveRejected(_))));
    assert!(matches!(shear_step(&l, a, Direction::E2, 0), Err(TvqError::InvalidArgument(_))));
    let plain = l.vertex_at(3.0, 3.0).unwrap();
    assert!(matches!(shear_step(&l, plain, Direction::E1, 1), Err(TvqError::InvalidArgument(_))));
    // Too close to the patch edge for the corridor.
    let edge = SurfaceLattice::planar_patch(9, 9, &[(4, 6)]).unwrap();
    let p = edge.vertex_at(6.0, 4.0).unwrap();
    assert!(shear_step(&edge, p, Direction::E1, 2).is_err());
}

// ----------------------------------------------------------------------
// Braid and baseline, combinatorial
// ----------------------------------------------------------------------

#[test]
fn braid_depth_is_constant_and_range_scales_with_distance() {
    let (l4, m4, c4) = braid_patch(4);
    let (l8, m8, c8) = braid_patch(8);
    let b4 = braid(&l4, m4, c4).unwrap();
    let b8 = braid(&l8, m8, c8).unwrap();
    for (b, l) in [(&b4, &l4), (&b8, &l8)] {
        b.schedule.validate().unwrap();
        assert!(b.lattice.same_structure(l));
        assert!(isomorphism_check(&b.lattice, l).is_some());
    }
    let (r4, r8) = (b4.schedule.depth_report(), b8.schedule.depth_report());
    assert_eq!(r4.local_depth, r8.local_depth);
    assert_eq!(r4.total_steps, r8.total_steps);
    assert!((r8.permutation_range - 2.0 * r4.permutation_range).abs() <= 1.0, "{r4:?} {r8:?}");
    let (g4, g8) = (compile_schedule(&b4.schedule).unwrap(), compile_schedule(&b8.schedule).unwrap());
    assert_eq!(g4.depth(), g8.depth());
}

#[test]
fn baseline_depth_is_linear_in_path_length() {
    let (l4, m4, c4) = braid_patch(4);
    let (l8, m8, c8) = braid_patch(8);
    let s4 = sequential_baseline(&l4, m4, &hexagon_path(&l4, m4, c4).unwrap()).unwrap();
    let s8 = sequential_baseline(&l8, m8, &hexagon_path(&l8, m8, c8).unwrap()).unwrap();
    s4.schedule.validate().unwrap();
    s8.schedule.validate().unwrap();
    assert!(s4.lattice.same_structure(&l4));
    assert!(s8.lattice.same_structure(&l8));
    let (r4, r8) = (s4.schedule.depth_report(), s8.schedule.depth_report());
    let diff = r8.local_depth as i64 - 2 * r4.local_depth as i64;
    assert!(diff.unsigned_abs() as usize <= r4.max_group_depth, "{r4:?} {r8:?}");
    // Every hop costs the same.
    assert_eq!(r8.local_depth * 12, r4.local_depth * 24);
}

#[test]
fn baseline_rejects_invalid_paths() {
    let (l, moving, center) = braid_patch(4);
    let far = l.vertex_at(0.0, 0.0).unwrap();
    assert!(sequential_baseline(&l, moving, &[moving, far]).is_err());
    assert!(matches!(sequential_baseline(&l, moving, &[moving, center]), Err(TvqError::MoveRejected(_))));
    assert!(sequential_baseline(&l, center, &[moving]).is_err());
}

// ----------------------------------------------------------------------
// State level (d = 2)
// ----------------------------------------------------------------------

#[test]
fn braid_equals_baseline_on_punctured_code_space() {
    let f = FusionDataF64::fibonacci();
    let (l, moving, center) = small_patch();
    let basis = code_space_basis(&f, &l, 7).unwrap();
    assert_eq!(basis.len(), 5);
    let b = braid(&l, moving, center).unwrap();
    let s = sequential_baseline(&l, moving, &hexagon_path(&l, moving, center).unwrap()).unwrap();

    let ub = logical_action(&f, &l, &basis, &b.schedule).unwrap();
    let us = logical_action(&f, &l, &basis, &s.schedule).unwrap();
    assert!(unitarity_defect(&ub) < 1e-8);
    assert!(phase_distance(&ub, &us) < 1e-8);

    // Open paths: after every side of the hexagon the two protocols induce
    // the same (non-trivial) map between code spaces.
    for side in 1..=2 {
        let pb = prefix(&b.schedule, 4 * side);
        let ps = prefix(&s.schedule, 2 * side);
        let (lb, ls) = (pb.replay(&l).unwrap(), ps.replay(&l).unwrap());
        assert!(lb.same_structure(&ls));
        let out = code_space_basis(&f, &lb, 3).unwrap();
        let out_s: Vec<_> = out.iter().map(|v| v.transport_to(&lb, &ls).unwrap()).collect();
        let mb = transfer_matrix(&f, &l, &basis, &pb, &lb, &out).unwrap();
        let ms = transfer_matrix(&f, &l, &basis, &ps, &ls, &out_s).unwrap();
        assert!(phase_distance(&mb, &ms) < 1e-8, "side {side}");
        assert!(max_entry_diff(&mb, &identity(5)) > 0.1);
    }
}

#[test]
fn logical_action_is_functorial_and_trivial_for_identity() {
    let f = FusionDataF64::fibonacci();
    let (l, moving, center) = small_patch();
    let basis = code_space_basis(&f, &l, 7).unwrap();
    let empty = MoveSchedule::new(&l);
    let u0 = logical_action(&f, &l, &basis, &empty).unwrap();
    assert!(max_entry_diff(&u0, &identity(basis.len())) < 1e-12);

    let b = braid(&l, moving, center).unwrap();
    let u = logical_action(&f, &l, &basis, &b.schedule).unwrap();
    let again = braid(&b.lattice, moving, center).unwrap();
    let mut twice = b.schedule.clone();
    twice.extend(again.schedule);
    let u2 = logical_action(&f, &l, &basis, &twice).unwrap();
    assert!(max_entry_diff(&u2, &matmul(&u, &u)) < 1e-8);
}

#[test]
fn contractible_baseline_loop_is_trivial() {
    let f = FusionDataF64::fibonacci();
    let (l, moving, _) = small_patch();
    let basis = code_space_basis(&f, &l, 7).unwrap();
    let up = l.vertex_at(3.0, 3.0).unwrap();
    let s = sequential_baseline(&l, moving, &[moving, up, moving]).unwrap();
    let u = logical_action(&f, &l, &basis, &s.schedule).unwrap();
    assert!(phase_distance(&u, &identity(basis.len())) < 1e-8);
}
