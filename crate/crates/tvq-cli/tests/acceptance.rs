//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde_json::Value;
use tvq_cli::protocol::{self, BraidOptions, ErrorsOptions, LatticeKind, LatticeSpec};
use tvq_cli::verify::{verify, Scope, VerifyOptions};
use tvq_cli::Report;
use tvq_core::fusion::FusionData;
use tvq_core::gadgets::{split_row, RowSpec};
use tvq_core::lattice::{build_honeycomb_torus, build_theta_sphere, SurfaceLattice};
use tvq_core::statevec::{apply_bp, enumerate_valid_configs, Config, StringNetState};

type Outcome = Result<String, String>;

fn failed_checks(r: &Report) -> String {
    r.checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}={:.3e}", c.name, c.measured))
        .collect::<Vec<_>>()
        .join(", ")
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite(scope: Scope, budget: Duration) -> Outcome {
    let start = Instant::now();
    let r = verify(&VerifyOptions { scope, ..Default::default() }).map_err(|e| format!("{e:#}"))?;
    let elapsed = start.elapsed();
    require(r.passed, || format!("failed checks: {}", failed_checks(&r)))?;
    require(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))?;
    let worst = r.checks.iter().map(|c| c.measured).fold(0.0, f64::max);
    Ok(format!("{} checks, worst residual {worst:.1e}, {elapsed:.2?}", r.checks.len()))
}

// ----------------------------------------------------------------------
// 3. Code-space dimensions against a dense oracle
// ----------------------------------------------------------------------

/// Ground-state degeneracy of `H = −Σ Q_v − Σ B_p` by dense
/// diagonalization on the branching-valid block.  Invalid configurations
/// violate some `Q_v` and so lie strictly above the ground energy.
fn dense_ground_degeneracy(l: &SurfaceLattice) -> usize {
    let f = FusionData::<f64>::fibonacci();
    let configs = enumerate_valid_configs(&f, l).unwrap();
    let n = configs.len();
    let index: BTreeMap<Config, usize> = configs.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] -= l.num_triangles() as f64;
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

fn code_space_dims() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = [
        ("theta", LatticeKind::Theta, (0, 0), build_theta_sphere(), 1),
        ("torus(2,2)", LatticeKind::Torus, (2, 2), build_honeycomb_torus(2, 2).unwrap(), 4),
    ];
    let mut parts = Vec::new();
    for (name, kind, size, lattice, want) in cases {
        let spec = LatticeSpec { kind, size, punctures: vec![] };
        let path = dir.path().join(format!("{name}.json"));
        let doc = protocol::lattice_document(&protocol::build_lattice(&spec).map_err(|e| e.to_string())?);
        std::fs::write(&path, doc).map_err(|e| e.to_string())?;
        let r = protocol::ground_dim(&path, Some(want)).map_err(|e| format!("{e:#}"))?;
        let got = r.data["dimension"].as_u64().unwrap_or(0) as usize;
        let oracle = dense_ground_degeneracy(&lattice);
        require(got == want && oracle == want, || {
            format!("{name}: dimension {got}, oracle {oracle}, expected {want}")
        })?;
        parts.push(format!("{name} {got} (oracle {oracle})"));
    }
    let elapsed = start.elapsed();
    require(elapsed < Duration::from_secs(300), || format!("took {elapsed:.2?}"))?;
    Ok(format!("{}, {elapsed:.2?}", parts.join(", ")))
}

// ----------------------------------------------------------------------
// 6-7. Braid depth and logical action
// ----------------------------------------------------------------------

fn braid_report(d: usize) -> Result<(Report, Duration), String> {
    let start = Instant::now();
    let r = protocol::run_braid(&BraidOptions { distance: d, compare_baseline: true, ..Default::default() })
        .map_err(|e| format!("d={d}: {e:#}"))?;
    Ok((r, start.elapsed()))
}

fn num(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or(f64::NAN)
}

fn constant_depth(r4: &Report, r8: &Report, t8: Duration) -> Outcome {
    let l = SurfaceLattice::planar_patch(6, 12, &[]).map_err(|e| e.to_string())?;
    let mut split = Vec::new();
    for len in [2usize, 4, 8] {
        let (out, _) = split_row(&l, RowSpec { row: 2, x0: 1, len }).map_err(|e| e.to_string())?;
        split.push(out.schedule.depth_report().local_depth);
    }
    require(split.iter().all(|&d| d == split[0]), || format!("split_row depths {split:?}"))?;

    let d4 = Value::Object(r4.data.clone().into_iter().collect());
    let d8 = Value::Object(r8.data.clone().into_iter().collect());
    let (ld4, ld8) = (num(&d4, &["depth", "local_depth"]), num(&d8, &["depth", "local_depth"]));
    let (gd4, gd8) = (num(&d4, &["gate_depth"]), num(&d8, &["gate_depth"]));
    require(ld4 == ld8, || format!("braid local depth {ld4} vs {ld8}"))?;
    require(gd4 == gd8, || format!("braid gate depth {gd4} vs {gd8}"))?;
    let (b4, b8) = (num(&d4, &["baseline_depth", "local_depth"]), num(&d8, &["baseline_depth", "local_depth"]));
    let group = num(&d8, &["baseline_depth", "max_group_depth"]).max(num(&d4, &["baseline_depth", "max_group_depth"]));
    require((b8 - 2.0 * b4).abs() <= group, || format!("baseline depth {b4} vs {b8} (one group = {group})"))?;
    let (p4, p8) = (num(&d4, &["depth", "permutation_range"]), num(&d8, &["depth", "permutation_range"]));
    require((p8 - 2.0 * p4).abs() <= 1.0, || format!("permutation range {p4} vs {p8}"))?;
    require(t8 < Duration::from_secs(600), || format!("d=8 took {t8:.2?}"))?;
    Ok(format!(
        "split_row {split:?}; braid local {ld4}/{ld8}, gates {gd4}/{gd8}; baseline {b4}/{b8} (ratio {:.3}); \
         range ratio {:.3}; d=8 in {t8:.1?}",
        b8 / b4,
        p8 / p4
    ))
}

fn braid_correctness(r4: &Report) -> Outcome {
    let names = [
        "logical/braid_unitarity",
        "logical/baseline_unitarity",
        "logical/entrywise_up_to_phase",
        "logical/open_path_side1",
        "logical/open_path_side2",
    ];
    let mut parts = Vec::new();
    for n in names {
        let c = r4.check(n).ok_or_else(|| format!("missing check {n}"))?;
        require(c.passed && c.limit <= 1e-8, || format!("{n}: {:.3e} (limit {:.1e})", c.measured, c.limit))?;
        parts.push(format!("{}={:.1e}", n.trim_start_matches("logical/"), c.measured));
    }
    let dim = r4.data.get("logical_dimension").and_then(Value::as_u64).unwrap_or(0);
    Ok(format!("dim {dim}; {}", parts.join(", ")))
}

// ----------------------------------------------------------------------
// 8. Error stretch and light cone
// ----------------------------------------------------------------------

fn error_stretch() -> Outcome {
    let opts = ErrorsOptions::default();
    require(opts.trials >= 100, || format!("only {} trials", opts.trials))?;
    let r = protocol::run_errors(&opts).map_err(|e| format!("{e:#}"))?;
    require(r.passed, || format!("failed checks: {}", failed_checks(&r)))?;
    let s = &r.data["stretch_summary"];
    let cones = &r.data["lightcone"];
    Ok(format!(
        "{} trials; max stretch d4 {} / d8 {}; light-cone radius bound {} / {} (realised {} / {})",
        opts.trials,
        s[0]["max_ratio"],
        s[1]["max_ratio"],
        cones[0]["radius_bound"],
        cones[1]["radius_bound"],
        cones[0]["radius"],
        cones[1]["radius"]
    ))
}

// ----------------------------------------------------------------------
// 9. Reproducibility of the binary
// ----------------------------------------------------------------------

fn run_tvq(args: &[&str]) -> Result<(Vec<u8>, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tvq")).args(args).output().map_err(|e| e.to_string())?;
    Ok((out.stdout, out.status.code().unwrap_or(-1)))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).display().to_string();
    let torus = p("torus.json");
    run_tvq(&["lattice", "build", "torus", "--size", "2,2", "--out", &torus])?;
    let runs: Vec<Vec<String>> = vec![
        vec![
            "lattice".into(),
            "build".into(),
            "patch".into(),
            "--size".into(),
            "6,6".into(),
            "--puncture".into(),
            "2,2".into(),
        ],
        vec!["verify".into(), "fusion".into()],
        vec!["verify".into(), "projectors".into(), "--format".into(), "text".into()],
        vec!["ground-dim".into(), torus.clone(), "--format".into(), "csv".into()],
        vec![
            "errors".into(),
            "--trials".into(),
            "100".into(),
            "--format".into(),
            "csv".into(),
            "--no-lightcone".into(),
        ],
        vec!["errors".into(), "--trials".into(), "100".into(), "--distances".into(), "4".into()],
        vec!["compile".into(), "fmove".into(), "--lattice".into(), torus.clone(), "--edge".into(), "4".into()],
        vec![
            "braid".into(),
            "--distance".into(),
            "4".into(),
            "--export-circuit".into(),
            p("circuit.json"),
            "--out".into(),
            p("braid.json"),
        ],
    ];
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let files = ["circuit.json", "braid.json"].map(|f| dir.path().join(f));
        let first = run_tvq(&args)?;
        let first_files = files.iter().map(|f| std::fs::read(f).ok()).collect::<Vec<_>>();
        let second = run_tvq(&args)?;
        let second_files = files.iter().map(|f| std::fs::read(f).ok()).collect::<Vec<_>>();
        let line = args.join(" ");
        require(first.1 == 0, || format!("`tvq {line}` exited with {}", first.1))?;
        require(first == second, || format!("`tvq {line}` output differs between runs"))?;
        require(first_files == second_files, || format!("`tvq {line}` files differ between runs"))?;
        require(!first.0.is_empty() || first_files.iter().any(Option::is_some), || {
            format!("`tvq {line}` produced nothing")
        })?;
        for f in &files {
            let _ = std::fs::remove_file(f);
        }
    }
    Ok(format!("{} commands byte-identical across two runs", runs.len()))
}

fn report(id: usize, name: &str, outcome: Outcome) -> bool {
    match &outcome {
        Ok(detail) => println!("PASS {id} {name}: {detail}"),
        Err(why) => println!("FAIL {id} {name}: {why}"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, "fusion data", suite(Scope::Fusion, Duration::from_secs(1)));
    ok &= report(2, "projector algebra", suite(Scope::Projectors, Duration::from_secs(30)));
    ok &= report(3, "code-space dimensions", code_space_dims());
    ok &= report(4, "pachner invariance", suite(Scope::Pachner, Duration::MAX));
    ok &= report(5, "circuit equivalence", suite(Scope::Circuits, Duration::MAX));
    let braids = braid_report(4).and_then(|a| braid_report(8).map(|b| (a, b)));
    match &braids {
        Ok(((r4, _), (r8, t8))) => {
            ok &= report(6, "constant depth", constant_depth(r4, r8, *t8));
            ok &= report(7, "braid correctness", braid_correctness(r4));
        }
        Err(e) => {
            ok &= report(6, "constant depth", Err(e.clone()));
            ok &= report(7, "braid correctness", Err(e.clone()));
        }
    }
    ok &= report(8, "error stretch", error_stretch());
    ok &= report(9, "reproducibility", reproducibility());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
