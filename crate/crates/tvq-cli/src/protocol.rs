//! Lattice, code-space, braid, error-string and compilation commands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use num_complex::Complex;
use serde::Serialize;
use tvq_core::circuits::{circuit_to_json, compile_fmove, compile_pachner13, compile_schedule, export_circuit};
use tvq_core::errors::{lightcone_report, stretch_report};
use tvq_core::gadgets::{
    braid, braid_setup, hexagon_path, logical_action, phase_distance, sequential_baseline, transfer_matrix,
    unitarity_defect, Matrix,
};
use tvq_core::lattice::{LatticeJson, SurfaceLattice};
use tvq_core::schedule::MoveSchedule;
use tvq_core::statevec::{code_space_basis, code_space_dim};
use tvq_core::FusionDataF64;

use crate::report::{Check, Report, RunConfig};

/// Distances accepted by `tvq braid`.
pub const BRAID_DISTANCES: [usize; 3] = [4, 6, 8];
/// Tolerance of logical-action comparisons (entrywise and unitarity).
pub const LOGICAL_TOL: f64 = 1e-8;
/// Required trace fidelity between the braid and the baseline.
pub const FIDELITY_TOL: f64 = 1e-9;
/// Default number of error-string trials per distance.
pub const DEFAULT_TRIALS: usize = 1000;
/// Side of the state-level braid patch (distance 2, two adjacent punctures).
pub const LOGICAL_PATCH_SIDE: usize = 5;
/// Seed of the code-space basis used for logical actions.
const BASIS_SEED: u64 = 7;

// ----------------------------------------------------------------------
// Lattices
// ----------------------------------------------------------------------

/// Lattice families the CLI can build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Theta,
    Torus,
    Patch,
}

/// Parameters of `tvq lattice build`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    /// Torus cells along each axis, or patch vertices (rows, cols).
    pub size: (usize, usize),
    /// Patch punctures as (row, col).
    pub punctures: Vec<(usize, usize)>,
}

pub fn build_lattice(spec: &LatticeSpec) -> Result<SurfaceLattice> {
    Ok(match spec.kind {
        LatticeKind::Theta => SurfaceLattice::theta_sphere(),
        LatticeKind::Torus => SurfaceLattice::honeycomb_torus(spec.size.0, spec.size.1)?,
        LatticeKind::Patch => SurfaceLattice::planar_patch(spec.size.0, spec.size.1, &spec.punctures)?,
    })
}

/// Lattice JSON document, pretty-printed with a trailing newline.
pub fn lattice_document(lattice: &SurfaceLattice) -> String {
    let mut s = serde_json::to_string_pretty(&lattice.to_json()).expect("lattice serializes");
    s.push('\n');
    s
}

pub fn load_lattice(path: &Path) -> Result<SurfaceLattice> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading lattice {}", path.display()))?;
    let doc: LatticeJson =
        serde_json::from_str(&text).with_context(|| format!("parsing lattice {}", path.display()))?;
    SurfaceLattice::from_json(&doc).with_context(|| format!("invalid lattice {}", path.display()))
}

/// `tvq ground-dim`: the code-space dimension of a lattice file.  With
/// `expect`, the dimension is also checked.
pub fn ground_dim(path: &Path, expect: Option<usize>) -> Result<Report> {
    let mut config = RunConfig::new("ground-dim", 0).param("lattice", path.display().to_string());
    if let Some(e) = expect {
        config = config.param("expect", e);
    }
    let lattice = load_lattice(path)?;
    let dim = code_space_dim(&FusionDataF64::fibonacci(), &lattice)?;
    let mut report = Report::new(config);
    report.insert("dimension", dim);
    report.insert("edges", lattice.num_edges());
    report.insert("qubits", lattice.num_qubits());
    if let Some(e) = expect {
        report.push(Check::equal("ground_dim", dim as f64, e as f64));
    }
    Ok(report)
}

// ----------------------------------------------------------------------
// Braid
// ----------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct BraidOptions {
    pub distance: usize,
    pub compare_baseline: bool,
    pub export_circuit: Option<PathBuf>,
    /// Overrides the logical-action tolerance.
    pub tol: Option<f64>,
}

fn matrix_json(m: &Matrix<f64>) -> Vec<Vec<[f64; 2]>> {
    m.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// `|tr(A† B)| / n`: 1 iff the two unitaries agree up to a global phase.
pub fn trace_fidelity(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let n = a.len();
    let mut tr = Complex::new(0.0, 0.0);
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            tr += x.conj() * y;
        }
    }
    tr.norm() / n as f64
}

/// `tvq braid`: runs the constant-depth braid at distance `d` (and the
/// sequential baseline), reports depths, and compares the logical action of
/// the two protocols on the state-level distance-2 patch.
pub fn run_braid(opts: &BraidOptions) -> Result<Report> {
    let d = opts.distance;
    if !BRAID_DISTANCES.contains(&d) {
        bail!("braid distance must be one of {BRAID_DISTANCES:?}, got {d}");
    }
    let mut config = RunConfig::new("braid", 0).param("distance", d).param("compare_baseline", opts.compare_baseline);
    if let Some(p) = &opts.export_circuit {
        config = config.param("export_circuit", p.display().to_string());
    }
    let tol = config.tolerance("logical", LOGICAL_TOL, opts.tol);
    let fid_tol = config.tolerance("fidelity", FIDELITY_TOL, opts.tol);
    let mut report = Report::new(config);

    let setup = braid_setup(d)?;
    let out = braid(&setup.lattice, setup.moving, setup.center)?;
    let depth = out.schedule.depth_report();
    let circuit = compile_schedule(&out.schedule)?;
    log::info!("braid d={d}: local depth {}, gate depth {}", depth.local_depth, circuit.depth());
    report.insert("lattice_vertices", setup.lattice.num_vertices());
    report.insert("depth", &depth);
    report.insert("gate_depth", circuit.depth());
    report.insert("gate_count", circuit.gate_count());
    report.push(Check::equal(
        "braid/returns_to_initial_lattice",
        f64::from(u8::from(out.lattice.same_structure(&setup.lattice))),
        1.0,
    ));
    if let Some(p) = &opts.export_circuit {
        export_circuit(&circuit, p)?;
    }
    if opts.compare_baseline {
        let path = hexagon_path(&setup.lattice, setup.moving, setup.center)?;
        let base = sequential_baseline(&setup.lattice, setup.moving, &path)?;
        let bd = base.schedule.depth_report();
        log::info!("baseline d={d}: local depth {}", bd.local_depth);
        report.insert("baseline_depth", &bd);
        report.insert("baseline_depth_ratio", bd.local_depth as f64 / depth.local_depth as f64);
        report.push(Check::equal(
            "baseline/returns_to_initial_lattice",
            f64::from(u8::from(base.lattice.same_structure(&setup.lattice))),
            1.0,
        ));
    }
    logical_comparison(opts.compare_baseline, tol, fid_tol, &mut report)?;
    Ok(report)
}

/// Logical action of the braid (and baseline) on the 5 × 5 patch with two
/// adjacent punctures, where the code space is small enough to simulate.
fn logical_comparison(with_baseline: bool, tol: f64, fid_tol: f64, report: &mut Report) -> Result<()> {
    let f = FusionDataF64::fibonacci();
    let n = LOGICAL_PATCH_SIDE;
    let c = n / 2;
    let l = SurfaceLattice::planar_patch_with(n, n, &[(c, c), (c, c + 1)], true)?;
    let center = l.vertex_at(c as f64, c as f64).context("centre puncture")?;
    let moving = l.vertex_at((c + 1) as f64, c as f64).context("moving puncture")?;
    let basis = code_space_basis(&f, &l, BASIS_SEED)?;
    let b = braid(&l, moving, center)?;
    let ub = logical_action(&f, &l, &basis, &b.schedule)?;
    report.insert("logical_dimension", basis.len());
    report.insert("logical_action", matrix_json(&ub));
    report.push(Check::at_most("logical/braid_unitarity", unitarity_defect(&ub), tol));
    if with_baseline {
        let s = sequential_baseline(&l, moving, &hexagon_path(&l, moving, center)?)?;
        let us = logical_action(&f, &l, &basis, &s.schedule)?;
        let fid = trace_fidelity(&ub, &us);
        report.insert("baseline_logical_action", matrix_json(&us));
        report.insert("fidelity", fid);
        report.push(Check::at_most("logical/baseline_unitarity", unitarity_defect(&us), tol));
        report.push(Check::at_most("logical/entrywise_up_to_phase", phase_distance(&ub, &us), tol));
        report.push(Check::at_most("logical/infidelity", 1.0 - fid, fid_tol));

        // The closed braid may act trivially on this code space, so the
        // open paths after the first sides of the hexagon are compared too:
        // they map between different code spaces and are non-trivial.
        let (gb, gs) = (b.schedule.groups.len() / 6, s.schedule.groups.len() / 6);
        let mut open = Vec::new();
        for side in 1..=OPEN_PATH_SIDES {
            let pb = prefix(&b.schedule, gb * side);
            let ps = prefix(&s.schedule, gs * side);
            let (lb, ls) = (pb.replay(&l)?, ps.replay(&l)?);
            let key = format!("logical/open_path_side{side}");
            if !lb.same_structure(&ls) {
                report.push(Check::failed(key, "protocols end on different lattices"));
                continue;
            }
            let out = code_space_basis(&f, &lb, BASIS_SEED)?;
            let out_s = out.iter().map(|v| v.transport_to(&lb, &ls)).collect::<Result<Vec<_>, _>>()?;
            let mb = transfer_matrix(&f, &l, &basis, &pb, &lb, &out)?;
            let ms = transfer_matrix(&f, &l, &basis, &ps, &ls, &out_s)?;
            report.push(Check::at_most(key, phase_distance(&mb, &ms), tol));
            open.push(matrix_json(&mb));
        }
        report.insert("open_path_transfer", open);
    }
    Ok(())
}

/// Number of hexagon sides whose open-path transfer matrices are compared.
const OPEN_PATH_SIDES: usize = 2;

fn prefix(s: &MoveSchedule, groups: usize) -> MoveSchedule {
    MoveSchedule { input_version: s.input_version, groups: s.groups[..groups].to_vec() }
}

// ----------------------------------------------------------------------
// Error strings
// ----------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ErrorsOptions {
    pub distances: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Also compute the light cone of the compiled braid per distance.
    pub lightcone: bool,
}

impl Default for ErrorsOptions {
    fn default() -> Self {
        ErrorsOptions { distances: vec![4, 8], trials: DEFAULT_TRIALS, seed: crate::DEFAULT_SEED, lightcone: true }
    }
}

/// `tvq errors`: error-string stretch per distance (table of every trial
/// plus per-distance summaries) and the braid light cone.  Checks that the
/// worst stretch at any distance exceeds the smallest distance's by at most
/// one edge, and that the light-cone radius bound is the same everywhere.
pub fn run_errors(opts: &ErrorsOptions) -> Result<Report> {
    if opts.distances.is_empty() {
        bail!("at least one distance is required");
    }
    let config = RunConfig::new("errors", opts.seed)
        .param("distances", &opts.distances)
        .param("trials", opts.trials)
        .param("lightcone", opts.lightcone);
    let mut report = Report::new(config);
    let stretch = stretch_report(&opts.distances, opts.trials, opts.seed)?;
    let d0 = *opts.distances.iter().min().expect("non-empty");
    let base = stretch.summary_for(d0).context("summary of the smallest distance")?.max_ratio;
    for s in &stretch.summary {
        log::info!("stretch d={}: max {} mean {:.3}", s.d, s.max_ratio, s.mean_ratio);
        if s.d != d0 {
            report.push(Check::at_most(format!("stretch/max_excess_d{}_over_d{d0}", s.d), s.max_ratio - base, 1.0));
        }
    }
    report.insert("stretch_summary", &stretch.summary);
    report.table = Some(stretch.to_csv());
    if opts.lightcone {
        let mut cones = Vec::new();
        for &d in &opts.distances {
            let c = lightcone_report(d)?;
            log::info!("light cone d={d}: bound {} realised {}", c.radius_bound, c.radius);
            report.push(Check::at_most(
                format!("lightcone/realised_within_bound_d{d}"),
                c.radius as f64,
                c.radius_bound as f64,
            ));
            cones.push(c);
        }
        for c in &cones[1..] {
            report.push(Check::equal(
                format!("lightcone/radius_bound_d{}_equals_d{}", c.d, cones[0].d),
                c.radius_bound as f64,
                cones[0].radius_bound as f64,
            ));
        }
        report.insert("lightcone", &cones);
    }
    Ok(report)
}

// ----------------------------------------------------------------------
// Compilation
// ----------------------------------------------------------------------

/// What `tvq compile` lowers to gates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompileTarget {
    /// The full braid at a distance.
    Braid { distance: usize },
    /// One F-move on an edge of a lattice file.
    Fmove { lattice: PathBuf, edge: u32 },
    /// One 1-3 move on a triangle of a lattice file.
    Split { lattice: PathBuf, triangle: u32 },
}

/// Circuit JSON of the requested target.
pub fn compile(target: &CompileTarget) -> Result<String> {
    let circuit = match target {
        CompileTarget::Braid { distance } => {
            if !BRAID_DISTANCES.contains(distance) {
                bail!("braid distance must be one of {BRAID_DISTANCES:?}, got {distance}");
            }
            let s = braid_setup(*distance)?;
            compile_schedule(&braid(&s.lattice, s.moving, s.center)?.schedule)?
        }
        CompileTarget::Fmove { lattice, edge } => compile_fmove(&load_lattice(lattice)?, *edge)?,
        CompileTarget::Split { lattice, triangle } => compile_pachner13(&load_lattice(lattice)?, *triangle)?,
    };
    let mut s = circuit_to_json(&circuit)?;
    if !s.ends_with('\n') {
        s.push('\n');
    }
    Ok(s)
}
