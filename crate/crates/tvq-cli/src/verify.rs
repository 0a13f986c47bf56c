//! Invariant suites behind `tvq verify`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tvq_core::circuits::{compile_fmove, compile_pachner13, fmove_angle, simulate_circuit, FullState};
use tvq_core::fusion::{FusionData, FusionDump, FUSION_TOL};
use tvq_core::lattice::{
    build_honeycomb_torus, build_planar_patch, pachner_13, pachner_22, pachner_31, SurfaceLattice,
};
use tvq_core::statevec::{
    apply_bp, apply_fmove, apply_pachner13, apply_pachner31, apply_qv, code_space_dim, inner, random_code_state,
    random_valid_state, StringNetState,
};

use crate::report::{Check, Report, RunConfig};

/// Default residual tolerance of the projector, Pachner and circuit suites.
pub const STATE_TOL: f64 = 1e-10;
/// Number of random valid states in the projector suite.
pub const PROJECTOR_STATES: usize = 20;
/// Random move sequences per lattice in the Pachner suite.
pub const PACHNER_SEQUENCES: usize = 10;
/// Moves per random sequence.
pub const PACHNER_SEQUENCE_LEN: usize = 3;
/// Random code states per lattice for the 1-3 / 3-1 round trip.
pub const ROUND_TRIP_STATES: usize = 5;
/// Random code states per compiled move kind.
pub const CIRCUIT_STATES: usize = 50;

/// Which suites to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Fusion,
    Projectors,
    Pachner,
    Circuits,
    All,
}

impl Scope {
    fn includes(self, s: Scope) -> bool {
        self == Scope::All || self == s
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub scope: Scope,
    /// Overrides every residual tolerance.
    pub tol: Option<f64>,
    pub seed: u64,
    /// F-data to verify instead of the built-in Fibonacci data.
    pub fusion_file: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { scope: Scope::All, tol: None, seed: crate::DEFAULT_SEED, fusion_file: None }
    }
}

/// Runs the selected suites.  Fails only if the F-data file cannot be read;
/// every property violation is reported as a failed check.
pub fn verify(opts: &VerifyOptions) -> Result<Report> {
    let mut config = RunConfig::new("verify", opts.seed).param("scope", opts.scope);
    if let Some(p) = &opts.fusion_file {
        config = config.param("fusion_file", p.display().to_string());
    }
    let fusion = match &opts.fusion_file {
        None => FusionData::<f64>::fibonacci(),
        Some(p) => load_fusion(p)?,
    };
    let fusion_tol = config.tolerance("fusion", FUSION_TOL, opts.tol);
    let state_tol = if opts.scope == Scope::Fusion { 0.0 } else { config.tolerance("state", STATE_TOL, opts.tol) };
    let rotation_tol =
        if opts.scope.includes(Scope::Circuits) { config.tolerance("rotation", FUSION_TOL, opts.tol) } else { 0.0 };
    let mut report = Report::new(config);
    if opts.scope.includes(Scope::Fusion) {
        fusion_suite(&fusion, fusion_tol, &mut report);
    }
    if opts.scope.includes(Scope::Projectors) {
        projector_suite(&fusion, opts.seed, state_tol, &mut report);
    }
    if opts.scope.includes(Scope::Pachner) {
        pachner_suite(&fusion, opts.seed, state_tol, &mut report);
    }
    if opts.scope.includes(Scope::Circuits) {
        circuit_suite(&fusion, opts.seed, state_tol, rotation_tol, &mut report);
    }
    Ok(report)
}

/// Reads F-data in the dump format written by `FusionData::to_dump`.
pub fn load_fusion(path: &std::path::Path) -> Result<FusionData<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading F-data {}", path.display()))?;
    let dump: FusionDump = serde_json::from_str(&text).with_context(|| format!("parsing F-data {}", path.display()))?;
    Ok(FusionData::from_dump(&dump)?)
}

/// The built-in Fibonacci F-data as a JSON document.
pub fn fusion_document() -> String {
    let mut s = serde_json::to_string_pretty(&FusionData::<f64>::fibonacci().to_dump()).expect("F-data serializes");
    s.push('\n');
    s
}

fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

fn fusion_suite(f: &FusionData<f64>, tol: f64, report: &mut Report) {
    report.push(Check::at_most("fusion/f_block_orthogonality", f.f_unitarity_residual(), tol));
    report.push(Check::at_most("fusion/pentagon_coherence", f.pentagon_residual(5), tol));
    if f.num_labels() != 2 {
        report.push(Check::failed("fusion/f_block_tau", "F-data does not have exactly two labels"));
        return;
    }
    let phi = golden();
    let want = [[1.0 / phi, phi.powf(-0.5)], [phi.powf(-0.5), -1.0 / phi]];
    let mut dev = 0f64;
    for (e, row) in want.iter().enumerate() {
        for (g, w) in row.iter().enumerate() {
            dev = dev.max((f.fsym(1, 1, 1, 1, e, g) - w).abs());
        }
    }
    report.push(Check::at_most("fusion/f_block_tau", dev, tol));
    report.insert("quantum_dimensions", f.qdims());
    report.insert("total_dim_sq", f.total_dim_sq());
}

fn projector_suite(f: &FusionData<f64>, seed: u64, tol: f64, report: &mut Report) {
    let name = "projectors";
    let l = match build_honeycomb_torus(2, 2) {
        Ok(l) => l,
        Err(e) => return report.push(Check::failed(name, e.to_string())),
    };
    match projector_residuals(f, &l, seed) {
        Ok(r) => {
            report.push(Check::at_most("projectors/plaquette_idempotent", r[0], tol));
            report.push(Check::at_most("projectors/vertex_idempotent", r[1], tol));
            report.push(Check::at_most("projectors/plaquette_commutators", r[2], tol));
            report.push(Check::at_most("projectors/vertex_commutators", r[3], tol));
            report.push(Check::at_most("projectors/mixed_commutators", r[4], tol));
            report.insert("projector_lattice", "torus(2,2)");
            report.insert("projector_states", PROJECTOR_STATES);
        }
        Err(e) => report.push(Check::failed(name, e.to_string())),
    }
}

/// Largest residuals of `B² − B`, `Q² − Q`, `[B, B]`, `[Q, Q]`, `[B, Q]`
/// over random valid states.
fn projector_residuals(f: &FusionData<f64>, l: &SurfaceLattice, seed: u64) -> tvq_core::Result<[f64; 5]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps: Vec<_> = l.plaquettes().into_iter().map(|p| p.vertex).collect();
    let ts: Vec<_> = l.triangles().map(|t| t.id).collect();
    let mut r = [0f64; 5];
    for _ in 0..PROJECTOR_STATES {
        let s = random_valid_state(f, l, &mut rng)?;
        let bs: Vec<_> = ps.iter().map(|&p| apply_bp(f, l, &s, p)).collect::<Result<_, _>>()?;
        let qs: Vec<_> = ts.iter().map(|&t| apply_qv(f, l, &s, t)).collect::<Result<_, _>>()?;
        for (i, &p) in ps.iter().enumerate() {
            r[0] = r[0].max(apply_bp(f, l, &bs[i], p)?.max_abs_diff(&bs[i]));
            for (j, &q) in ps.iter().enumerate().skip(i + 1) {
                let pq = apply_bp(f, l, &bs[j], p)?;
                let qp = apply_bp(f, l, &bs[i], q)?;
                r[2] = r[2].max(pq.max_abs_diff(&qp));
            }
            for (k, &t) in ts.iter().enumerate() {
                let bq = apply_bp(f, l, &qs[k], p)?;
                let qb = apply_qv(f, l, &bs[i], t)?;
                r[4] = r[4].max(bq.max_abs_diff(&qb));
            }
        }
        for (k, &t) in ts.iter().enumerate() {
            r[1] = r[1].max(apply_qv(f, l, &qs[k], t)?.max_abs_diff(&qs[k]));
            for (m, &u) in ts.iter().enumerate().skip(k + 1) {
                let a = apply_qv(f, l, &qs[m], t)?;
                let b = apply_qv(f, l, &qs[k], u)?;
                r[3] = r[3].max(a.max_abs_diff(&b));
            }
        }
    }
    Ok(r)
}

/// Small lattices (at most 30 edges) used by the Pachner suite.
pub fn pachner_lattices() -> Vec<(&'static str, SurfaceLattice)> {
    vec![
        ("torus(2,2)", build_honeycomb_torus(2, 2).expect("valid torus")),
        ("torus(3,2)", build_honeycomb_torus(3, 2).expect("valid torus")),
        ("patch(4,3)", build_planar_patch(4, 3, &[]).expect("valid patch")),
    ]
}

/// One random legal move (flip, split or merge) chosen by `rng`, if any
/// candidate is accepted.
fn random_move(l: &SurfaceLattice, rng: &mut ChaCha8Rng) -> Option<SurfaceLattice> {
    for _ in 0..64 {
        let step = match rng.gen_range(0..3) {
            0 => {
                let es: Vec<_> = l.edges().filter(|e| e.qubit.is_some()).map(|e| e.id).collect();
                pachner_22(l, es[rng.gen_range(0..es.len())]).ok()
            }
            1 => {
                let ts: Vec<_> = l.triangles().map(|t| t.id).collect();
                pachner_13(l, ts[rng.gen_range(0..ts.len())]).ok()
            }
            _ => {
                let vs: Vec<_> =
                    l.vertices().map(|v| v.id).filter(|&v| l.is_interior_vertex(v) && l.degree(v) == 3).collect();
                if vs.is_empty() {
                    None
                } else {
                    pachner_31(l, vs[rng.gen_range(0..vs.len())]).ok()
                }
            }
        };
        if let Some((next, _)) = step {
            return Some(next);
        }
    }
    None
}

fn pachner_suite(f: &FusionData<f64>, seed: u64, tol: f64, report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = Vec::new();
    for (name, base) in pachner_lattices() {
        let key = format!("pachner/dim_invariance/{name}");
        let d0 = match code_space_dim(f, &base) {
            Ok(d) => d,
            Err(e) => {
                report.push(Check::failed(key, e.to_string()));
                continue;
            }
        };
        let mut seen = Vec::new();
        let mut mismatches = 0usize;
        let mut failure = None;
        for _ in 0..PACHNER_SEQUENCES {
            let mut l = base.clone();
            for _ in 0..PACHNER_SEQUENCE_LEN {
                if let Some(next) = random_move(&l, &mut rng) {
                    l = next;
                }
            }
            match code_space_dim(f, &l) {
                Ok(d) => {
                    mismatches += usize::from(d != d0);
                    seen.push(d);
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
        dims.push(serde_json::json!({
            "lattice": name, "edges": base.num_edges(), "dimension": d0, "after_moves": seen
        }));
        report.push(match failure {
            Some(e) => Check::failed(key, e),
            None => Check::equal(key, mismatches as f64, 0.0),
        });

        let key = format!("pachner/split_merge_round_trip/{name}");
        report.push(match split_merge_residual(f, &base, &mut rng) {
            Ok(r) => Check::at_most(key, r, tol),
            Err(e) => Check::failed(key, e.to_string()),
        });
    }
    report.insert("pachner_lattices", dims);
}

/// Largest deviation after a 1-3 move and its 3-1 inverse on random code
/// states; the 3-1 move itself refuses states whose released qubits are not
/// left in `|0⟩`.
fn split_merge_residual(f: &FusionData<f64>, l: &SurfaceLattice, rng: &mut ChaCha8Rng) -> tvq_core::Result<f64> {
    let ts: Vec<_> = l.triangles().map(|t| t.id).collect();
    let mut worst = 0f64;
    for _ in 0..ROUND_TRIP_STATES {
        let s = random_code_state(f, l, rng)?;
        let t = ts[rng.gen_range(0..ts.len())];
        let (s2, l2) = apply_pachner13(f, l, &s, t)?;
        let m = l2.vertices().map(|v| v.id).max().expect("split adds a vertex");
        let (s3, l3) = apply_pachner31(f, &l2, &s2, m)?;
        if !l3.same_structure(l) {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(s3.transport_to(&l3, l)?.max_abs_diff(&s));
    }
    Ok(worst)
}

fn fidelity(a: &StringNetState<f64>, b: &StringNetState<f64>) -> tvq_core::Result<f64> {
    let ov = inner(a, b)?.norm();
    Ok(ov * ov / (a.norm() * a.norm() * b.norm() * b.norm()))
}

/// Random code states as random complex combinations of a few projected
/// seeds.
fn code_states(
    f: &FusionData<f64>,
    l: &SurfaceLattice,
    rng: &mut ChaCha8Rng,
) -> tvq_core::Result<Vec<StringNetState<f64>>> {
    let seeds: Vec<_> = (0..4).map(|_| random_code_state(f, l, rng)).collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(CIRCUIT_STATES);
    for _ in 0..CIRCUIT_STATES {
        let mut s = seeds[0].scaled(Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        for b in &seeds[1..] {
            s = s.axpy(Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), b)?;
        }
        out.push(s.normalized());
    }
    Ok(out)
}

fn circuit_suite(f: &FusionData<f64>, seed: u64, tol: f64, rotation_tol: f64, report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    report.push(match fmove_circuit_residuals(f, &mut rng) {
        Ok((inf, amp)) => Check::at_most("circuits/fmove_infidelity", inf, tol)
            .with_detail(format!("max amplitude deviation {amp:.3e}")),
        Err(e) => Check::failed("circuits/fmove_infidelity", e.to_string()),
    });
    match split_circuit_residuals(f, &mut rng) {
        Ok((inf, amp, back)) => {
            report.push(
                Check::at_most("circuits/split_infidelity", inf, tol)
                    .with_detail(format!("max amplitude deviation {amp:.3e}")),
            );
            report.push(Check::at_most("circuits/split_inverse_round_trip", back, tol));
        }
        Err(e) => report.push(Check::failed("circuits/split_infidelity", e.to_string())),
    }
    report.push(Check::at_most("circuits/rotation_sandwich", rotation_sandwich_residual(), rotation_tol));
    report.insert("circuit_states", CIRCUIT_STATES);
    report.insert("fmove_angle", fmove_angle());
}

/// Worst infidelity and amplitude deviation of the compiled F-move on the
/// torus(3,2) code space.
fn fmove_circuit_residuals(f: &FusionData<f64>, rng: &mut ChaCha8Rng) -> tvq_core::Result<(f64, f64)> {
    let l = build_honeycomb_torus(3, 2)?;
    let edges: Vec<_> = l.edges().filter(|e| e.qubit.is_some()).map(|e| e.id).collect();
    let (mut inf, mut amp) = (0f64, 0f64);
    for s in code_states(f, &l, rng)? {
        let e = edges[rng.gen_range(0..edges.len())];
        let c = compile_fmove(&l, e)?;
        let (want, l2) = apply_fmove(f, &l, &s, e)?;
        let got = simulate_circuit(&c, &FullState::from_string_net(&s))?.to_string_net(&l2, 1e-14)?;
        inf = inf.max(1.0 - fidelity(&got, &want)?);
        amp = amp.max(got.max_abs_diff(&want));
    }
    Ok((inf, amp))
}

/// Worst infidelity, amplitude deviation and inverse round-trip residual of
/// the compiled 1-3 move on the 5 × 5 patch code space.
fn split_circuit_residuals(f: &FusionData<f64>, rng: &mut ChaCha8Rng) -> tvq_core::Result<(f64, f64, f64)> {
    let l = build_planar_patch(5, 5, &[])?;
    let ts: Vec<_> = l.triangles().map(|t| t.id).collect();
    let (mut inf, mut amp, mut back) = (0f64, 0f64, 0f64);
    for s in code_states(f, &l, rng)? {
        let t = ts[rng.gen_range(0..ts.len())];
        let c = compile_pachner13(&l, t)?;
        let (want, l2) = apply_pachner13(f, &l, &s, t)?;
        let got = simulate_circuit(&c, &FullState::from_string_net(&s))?.to_string_net(&l2, 1e-14)?;
        inf = inf.max(1.0 - fidelity(&got, &want)?);
        amp = amp.max(got.max_abs_diff(&want));
        let undo = simulate_circuit(&c.inverse(), &FullState::from_string_net(&got))?.to_string_net(&l, 1e-14)?;
        back = back.max(undo.max_abs_diff(&s));
    }
    Ok((inf, amp, back))
}

/// Largest entry of `RY(−θ)·X·RY(θ) − F` with `θ = arctan(φ^{-1/2})`.
pub fn rotation_sandwich_residual() -> f64 {
    let th = fmove_angle();
    let ry = |a: f64| [[(a / 2.0).cos(), -(a / 2.0).sin()], [(a / 2.0).sin(), (a / 2.0).cos()]];
    let mul = |p: [[f64; 2]; 2], q: [[f64; 2]; 2]| {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = p[i][0] * q[0][j] + p[i][1] * q[1][j];
            }
        }
        r
    };
    let m = mul(ry(-th), mul([[0.0, 1.0], [1.0, 0.0]], ry(th)));
    let phi = golden();
    let want = [[1.0 / phi, phi.powf(-0.5)], [phi.powf(-0.5), -1.0 / phi]];
    let mut dev = 0f64;
    for i in 0..2 {
        for j in 0..2 {
            dev = dev.max((m[i][j] - want[i][j]).abs());
        }
    }
    dev
}
