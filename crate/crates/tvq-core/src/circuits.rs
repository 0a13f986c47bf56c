//! Gate-level lowering of recorded moves, a full-space sparse simulator used
//! as an independent oracle, depth accounting and circuit export.
//!
//! The controlled F-move acts on the switched qubit `t` given the four leg
//! qubits.  Leg patterns whose unique admissible labels differ before and
//! after the move (`0011`, `0110`, `1001`, `1100`) toggle `t` with a
//! polarity-controlled X; the `1111` pattern receives `RY(-θ)·X·RY(θ)` with
//! `θ = arctan(φ^{-1/2})`, which equals the nontrivial 2×2 F-block.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvqError};
use crate::lattice::{pachner_13, pachner_22, EdgeId, MoveRecord, Slot, SlotMap, SurfaceLattice, TriangleId};
use crate::scalar::{golden_ratio, Scalar};
use crate::schedule::{GroupKind, MoveSchedule};
use crate::statevec::{Config, StringNetState};

/// Active-qubit guard of the full-space simulator.
pub const SIMULATION_QUBIT_LIMIT: usize = 22;
/// Weight tolerated on a released ancilla.
pub const RELEASE_TOL: f64 = 1e-10;

/// Gate kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GateKind {
    /// `exp(-iθY/2)` on the target.
    Ry,
    /// Bit flip.
    X,
    /// Single-control X.
    Cx,
    /// Multi-controlled X with per-control polarity.
    Mcx,
    /// Exchange of two qubits.
    Swap,
    /// Vacuum-S preparation `|0⟩ ↦ (|0⟩ + φ|1⟩)/D`, realised as `RY(2·atan φ)`.
    Sprep,
    /// Allocation of a fresh ancilla in `|0⟩` (pseudo-gate).
    Alloc,
    /// Release of an ancilla that must be in `|0⟩` (pseudo-gate).
    Release,
}

/// A gate acting on qubit slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<Slot>,
    pub controls: Vec<Slot>,
    /// Required value of each control (`true` = 1).
    pub polarities: Vec<bool>,
    pub params: Vec<f64>,
}

/// Rounds to 15 significant decimal digits (the export precision), so that
/// exported circuits re-import exactly.
fn round15(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.14e}").parse().expect("formatted float parses")
}

impl Gate {
    pub fn ry(target: Slot, theta: f64) -> Gate {
        Gate {
            kind: GateKind::Ry,
            targets: vec![target],
            controls: vec![],
            polarities: vec![],
            params: vec![round15(theta)],
        }
    }

    pub fn x(target: Slot) -> Gate {
        Gate { kind: GateKind::X, targets: vec![target], controls: vec![], polarities: vec![], params: vec![] }
    }

    pub fn cx(control: Slot, target: Slot) -> Gate {
        Gate {
            kind: GateKind::Cx,
            targets: vec![target],
            controls: vec![control],
            polarities: vec![true],
            params: vec![],
        }
    }

    /// Multi-controlled X; degenerates to X or CX when fewer controls remain.
    pub fn mcx(controls: Vec<(Slot, bool)>, target: Slot) -> Gate {
        let kind = match controls.len() {
            0 => GateKind::X,
            1 if controls[0].1 => GateKind::Cx,
            _ => GateKind::Mcx,
        };
        Gate {
            kind,
            targets: vec![target],
            polarities: controls.iter().map(|c| c.1).collect(),
            controls: controls.into_iter().map(|c| c.0).collect(),
            params: vec![],
        }
    }

    pub fn swap(a: Slot, b: Slot) -> Gate {
        Gate { kind: GateKind::Swap, targets: vec![a, b], controls: vec![], polarities: vec![], params: vec![] }
    }

    /// Vacuum-S preparation with the given rotation angle.
    pub fn sprep(target: Slot, angle: f64) -> Gate {
        Gate {
            kind: GateKind::Sprep,
            targets: vec![target],
            controls: vec![],
            polarities: vec![],
            params: vec![round15(angle)],
        }
    }

    pub fn alloc(target: Slot) -> Gate {
        Gate { kind: GateKind::Alloc, targets: vec![target], controls: vec![], polarities: vec![], params: vec![] }
    }

    pub fn release(target: Slot) -> Gate {
        Gate { kind: GateKind::Release, targets: vec![target], controls: vec![], polarities: vec![], params: vec![] }
    }

    /// Qubits touched (controls included).
    pub fn support(&self) -> Vec<Slot> {
        self.targets.iter().chain(self.controls.iter()).copied().collect()
    }

    /// Inverse gate.
    pub fn inverse(&self) -> Gate {
        let mut g = self.clone();
        match self.kind {
            GateKind::Ry | GateKind::Sprep => g.params = self.params.iter().map(|p| -p).collect(),
            GateKind::Alloc => g.kind = GateKind::Release,
            GateKind::Release => g.kind = GateKind::Alloc,
            _ => {}
        }
        g
    }
}

/// A qubit permutation applied after a given number of gate layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationLayer {
    pub after_layer: usize,
    pub map: Vec<(Slot, Slot)>,
}

/// Layered gate circuit bound to a lattice version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCircuit {
    /// Version of the lattice the circuit acts on.
    pub version: u64,
    /// Version of the lattice after the circuit.
    pub output_version: u64,
    /// Qubits touched by gates or permutations, ascending.
    pub qubits: Vec<Slot>,
    pub layers: Vec<Vec<Gate>>,
    pub permutations: Vec<PermutationLayer>,
}

impl GateCircuit {
    /// Empty circuit on a lattice.
    pub fn empty(version: u64) -> Self {
        GateCircuit { version, output_version: version, qubits: vec![], layers: vec![], permutations: vec![] }
    }

    /// Gate-level depth (number of gate layers).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Number of gates.
    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Structural check: gates in one layer have disjoint supports.
    pub fn validate(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for g in layer {
                for q in g.support() {
                    if !seen.insert(q) {
                        return Err(TvqError::SupportCollision(format!("qubit {q} is used twice in gate layer {i}")));
                    }
                }
            }
        }
        Ok(())
    }

    fn refresh_qubits(&mut self) {
        let mut q: BTreeSet<Slot> = self.layers.iter().flatten().flat_map(Gate::support).collect();
        for p in &self.permutations {
            for &(a, b) in &p.map {
                if a != b {
                    q.insert(a);
                    q.insert(b);
                }
            }
        }
        self.qubits = q.into_iter().collect();
    }

    /// Builds a circuit from a gate sequence by as-soon-as-possible layering.
    pub fn from_sequence(version: u64, output_version: u64, gates: Vec<Gate>) -> Self {
        let mut c = GateCircuit::empty(version);
        c.output_version = output_version;
        c.layers = asap_gate_layers(gates);
        c.refresh_qubits();
        c
    }

    /// Inverse circuit (layers reversed, gates inverted, permutations
    /// inverted).
    pub fn inverse(&self) -> GateCircuit {
        let n = self.layers.len();
        let layers = self.layers.iter().rev().map(|l| l.iter().map(Gate::inverse).collect()).collect();
        let mut permutations: Vec<PermutationLayer> = self
            .permutations
            .iter()
            .rev()
            .map(|p| PermutationLayer {
                after_layer: n - p.after_layer,
                map: {
                    let mut m: Vec<(Slot, Slot)> = p.map.iter().map(|&(a, b)| (b, a)).collect();
                    m.sort_unstable();
                    m
                },
            })
            .collect();
        permutations.sort_by_key(|p| p.after_layer);
        GateCircuit {
            version: self.output_version,
            output_version: self.version,
            qubits: self.qubits.clone(),
            layers,
            permutations,
        }
    }
}

/// Layers a gate sequence as soon as possible without reordering gates that
/// share a qubit.
pub fn asap_gate_layers(gates: Vec<Gate>) -> Vec<Vec<Gate>> {
    let mut last: BTreeMap<Slot, usize> = BTreeMap::new();
    let mut layers: Vec<Vec<Gate>> = Vec::new();
    for g in gates {
        let sup = g.support();
        let layer = sup.iter().filter_map(|q| last.get(q)).map(|l| l + 1).max().unwrap_or(0);
        for q in sup {
            last.insert(q, layer);
        }
        if layers.len() <= layer {
            layers.resize_with(layer + 1, Vec::new);
        }
        layers[layer].push(g);
    }
    layers
}

/// Angle of the rotation sandwich: `θ = arctan(φ^{-1/2})`.
pub fn fmove_angle() -> f64 {
    (1.0 / golden_ratio::<f64>().sqrt()).atan()
}

/// Angle of the vacuum-S preparation: `2·arctan(φ)`.
pub fn sprep_angle() -> f64 {
    2.0 * golden_ratio::<f64>().atan()
}

/// Leg patterns `(l0, l1, l2, l3)` whose switched label toggles.
const TOGGLE_PATTERNS: [[bool; 4]; 4] =
    [[false, false, true, true], [false, true, true, false], [true, false, false, true], [true, true, false, false]];

/// Resolves a leg pattern into controls: frozen legs (vacuum) drop out or
/// make the pattern impossible, repeated qubits are merged, and
/// contradictory requirements make the pattern impossible.
fn pattern_controls(legs: &[Option<Slot>; 4], pattern: [bool; 4]) -> Option<Vec<(Slot, bool)>> {
    let mut ctl: BTreeMap<Slot, bool> = BTreeMap::new();
    for (leg, want) in legs.iter().zip(pattern) {
        match leg {
            None if want => return None,
            None => {}
            Some(s) => {
                if let Some(&prev) = ctl.get(s) {
                    if prev != want {
                        return None;
                    }
                }
                ctl.insert(*s, want);
            }
        }
    }
    Some(ctl.into_iter().collect())
}

/// Gate sequence of the controlled F-move on `target` with the given legs.
pub fn controlled_f_gates(target: Slot, legs: [Option<Slot>; 4]) -> Vec<Gate> {
    let mut gates = Vec::new();
    for p in TOGGLE_PATTERNS {
        if let Some(c) = pattern_controls(&legs, p) {
            gates.push(Gate::mcx(c, target));
        }
    }
    if let Some(c) = pattern_controls(&legs, [true; 4]) {
        let theta = fmove_angle();
        gates.push(Gate::ry(target, theta));
        gates.push(Gate::mcx(c, target));
        gates.push(Gate::ry(target, -theta));
    }
    gates
}

/// Gate sequence realising one recorded move (permutations excluded).
pub fn move_gates(record: &MoveRecord) -> Result<Vec<Gate>> {
    Ok(match record {
        MoveRecord::FMove { slot, leg_slots, edge, .. } => {
            let t = slot.ok_or_else(|| TvqError::MoveRejected(format!("edge {edge} has no qubit")))?;
            controlled_f_gates(t, *leg_slots)
        }
        MoveRecord::Pachner13 { outer_slots, new_slots, .. } => split_gates(*outer_slots, *new_slots),
        MoveRecord::Pachner31 { outer_slots, new_slots, .. } => {
            split_gates(*outer_slots, *new_slots).iter().rev().map(Gate::inverse).collect()
        }
        MoveRecord::LocalSwap { slots, .. } => vec![Gate::swap(slots[0], slots[1])],
        MoveRecord::Permutation { .. } => {
            return Err(TvqError::InvalidArgument("permutations are not gate sequences".into()))
        }
    })
}

/// The 1-3 sequence: allocate the spokes `x = MP`, `y = MQ`, `z = MR`, copy
/// the side `A = QR` into `x`, prepare the tadpole `y`, then two F-moves
/// (on `z` with legs `(x, A, y, y)` and on `x` with legs `(B, C, y, z)`).
fn split_gates(outer: [Option<Slot>; 3], spokes: [Slot; 3]) -> Vec<Gate> {
    let [a, b, c] = outer;
    let [x, y, z] = spokes;
    let mut g = vec![Gate::alloc(x), Gate::alloc(y), Gate::alloc(z)];
    if let Some(a) = a {
        g.push(Gate::cx(a, x));
    }
    g.push(Gate::sprep(y, sprep_angle()));
    g.extend(controlled_f_gates(z, [Some(x), a, Some(y), Some(y)]));
    g.extend(controlled_f_gates(x, [b, c, Some(y), Some(z)]));
    g
}

/// Compiles the F-move on `edge`.
pub fn compile_fmove(lattice: &SurfaceLattice, edge: EdgeId) -> Result<GateCircuit> {
    let (l, rec) = pachner_22(lattice, edge)?;
    Ok(GateCircuit::from_sequence(lattice.version(), l.version(), move_gates(&rec)?))
}

/// Compiles the 1-3 move on `triangle`.
pub fn compile_pachner13(lattice: &SurfaceLattice, triangle: TriangleId) -> Result<GateCircuit> {
    let (l, rec) = pachner_13(lattice, triangle)?;
    Ok(GateCircuit::from_sequence(lattice.version(), l.version(), move_gates(&rec)?))
}

/// Compiles a validated schedule.  Each declared move layer becomes a block
/// of gate layers in which the per-move gate sequences run side by side;
/// permutation groups become permutation layers.
pub fn compile_schedule(schedule: &MoveSchedule) -> Result<GateCircuit> {
    schedule.validate()?;
    let mut c = GateCircuit::empty(schedule.input_version);
    let mut version = schedule.input_version;
    for g in &schedule.groups {
        match g.kind {
            GroupKind::Local => {
                for layer in &g.layers {
                    let mut block: Vec<Vec<Gate>> = Vec::new();
                    for m in layer {
                        for (i, gl) in asap_gate_layers(move_gates(m)?).into_iter().enumerate() {
                            if block.len() <= i {
                                block.resize_with(i + 1, Vec::new);
                            }
                            block[i].extend(gl);
                        }
                        version += 1;
                    }
                    c.layers.extend(block);
                }
            }
            GroupKind::Permutation => {
                for m in g.layers.iter().flatten() {
                    if let MoveRecord::Permutation { slot_map, .. } = m {
                        c.permutations.push(PermutationLayer {
                            after_layer: c.layers.len(),
                            map: slot_map.iter().map(|(&a, &b)| (a, b)).collect(),
                        });
                        version += 1;
                    }
                }
            }
        }
    }
    c.output_version = version;
    c.refresh_qubits();
    c.validate()?;
    Ok(c)
}

// ----------------------------------------------------------------------
// Full-space simulation
// ----------------------------------------------------------------------

/// Sparse state over all configurations of the qubit slots (no branching
/// constraint).
#[derive(Clone, Debug, PartialEq)]
pub struct FullState<T: Scalar> {
    pub version: u64,
    pub amps: BTreeMap<Config, Complex<T>>,
}

impl<T: Scalar> FullState<T> {
    /// Embeds a string-net state.
    pub fn from_string_net(s: &StringNetState<T>) -> Self {
        FullState { version: s.lattice_version(), amps: s.amplitudes().clone() }
    }

    /// Converts back, dropping amplitudes below `tol`.
    pub fn to_string_net(&self, lattice: &SurfaceLattice, tol: f64) -> Result<StringNetState<T>> {
        if lattice.version() != self.version {
            return Err(TvqError::VersionMismatch { state: self.version, lattice: lattice.version() });
        }
        Ok(StringNetState::from_amplitudes(
            lattice,
            self.amps.iter().filter(|(_, a)| a.norm().as_f64() >= tol).map(|(c, a)| (*c, *a)),
        ))
    }

    /// Euclidean norm.
    pub fn norm(&self) -> T {
        self.amps.values().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt()
    }
}

fn bit(c: Config, s: Slot) -> bool {
    (c >> s) & 1 == 1
}

fn apply_gate<T: Scalar>(g: &Gate, amps: BTreeMap<Config, Complex<T>>) -> Result<BTreeMap<Config, Complex<T>>> {
    let mut out: BTreeMap<Config, Complex<T>> = BTreeMap::new();
    let mut add = |c: Config, a: Complex<T>| {
        if a != Complex::default() {
            *out.entry(c).or_default() += a;
        }
    };
    match g.kind {
        GateKind::X | GateKind::Cx | GateKind::Mcx => {
            let t = g.targets[0];
            for (c, a) in amps {
                let fire = g.controls.iter().zip(&g.polarities).all(|(&q, &p)| bit(c, q) == p);
                add(if fire { c ^ (1u128 << t) } else { c }, a);
            }
        }
        GateKind::Ry | GateKind::Sprep => {
            let t = g.targets[0];
            let half = T::of(g.params[0] / 2.0);
            let (s, co) = (half.sin(), half.cos());
            for (c, a) in amps {
                let c0 = c & !(1u128 << t);
                let c1 = c | (1u128 << t);
                if bit(c, t) {
                    add(c0, a * (-s));
                    add(c1, a * co);
                } else {
                    add(c0, a * co);
                    add(c1, a * s);
                }
            }
        }
        GateKind::Swap => {
            let (p, q) = (g.targets[0], g.targets[1]);
            for (c, a) in amps {
                let mut n = c & !((1u128 << p) | (1u128 << q));
                if bit(c, p) {
                    n |= 1u128 << q;
                }
                if bit(c, q) {
                    n |= 1u128 << p;
                }
                add(n, a);
            }
        }
        GateKind::Alloc => {
            let t = g.targets[0];
            if amps.keys().any(|&c| bit(c, t)) {
                return Err(TvqError::VerificationFailed(format!("ancilla {t} is not free")));
            }
            return Ok(amps);
        }
        GateKind::Release => {
            let t = g.targets[0];
            let total: f64 = amps.values().map(|a| a.norm_sqr().as_f64()).sum();
            let bad: f64 = amps.iter().filter(|(c, _)| bit(**c, t)).map(|(_, a)| a.norm_sqr().as_f64()).sum();
            if total > 0.0 && bad / total > RELEASE_TOL {
                return Err(TvqError::ResidualEntanglement { residual: bad / total, threshold: RELEASE_TOL });
            }
            for (c, a) in amps {
                if !bit(c, t) {
                    add(c, a);
                }
            }
        }
    }
    Ok(out)
}

fn apply_permutation<T: Scalar>(
    map: &[(Slot, Slot)],
    amps: BTreeMap<Config, Complex<T>>,
) -> BTreeMap<Config, Complex<T>> {
    let sigma: SlotMap = map.iter().copied().collect();
    let moved: u128 = sigma.keys().fold(0, |m, &s| m | (1u128 << s));
    amps.into_iter()
        .map(|(c, a)| {
            let mut n = c & !moved;
            for (&s, &t) in &sigma {
                if bit(c, s) {
                    n |= 1u128 << t;
                }
            }
            (n, a)
        })
        .collect()
}

/// Applies a circuit to a full-space state, layer by layer, with the
/// permutation layers interleaved.  Amplitudes below `1e-15` are dropped.
pub fn simulate_circuit<T: Scalar>(circuit: &GateCircuit, state: &FullState<T>) -> Result<FullState<T>> {
    if state.version != circuit.version {
        return Err(TvqError::VersionMismatch { state: state.version, lattice: circuit.version });
    }
    if circuit.qubits.len() > SIMULATION_QUBIT_LIMIT {
        return Err(TvqError::SizeGuard {
            what: "active qubits",
            actual: circuit.qubits.len(),
            limit: SIMULATION_QUBIT_LIMIT,
        });
    }
    if circuit.qubits.iter().any(|&q| q >= 128) {
        return Err(TvqError::SizeGuard { what: "qubit slot id", actual: 128, limit: 128 });
    }
    let mut amps = state.amps.clone();
    let mut perms = circuit.permutations.iter().peekable();
    for (i, layer) in circuit.layers.iter().enumerate() {
        while let Some(p) = perms.next_if(|p| p.after_layer == i) {
            amps = apply_permutation(&p.map, amps);
        }
        for g in layer {
            amps = apply_gate(g, amps)?;
        }
        amps.retain(|_, a| a.norm().as_f64() >= 1e-15);
    }
    for p in perms {
        amps = apply_permutation(&p.map, amps);
    }
    Ok(FullState { version: circuit.output_version, amps })
}

// ----------------------------------------------------------------------
// Export / import
// ----------------------------------------------------------------------

/// Serializes a circuit as JSON.
pub fn circuit_to_json(circuit: &GateCircuit) -> Result<String> {
    Ok(serde_json::to_string_pretty(circuit)?)
}

/// Parses a circuit from JSON.
pub fn circuit_from_json(text: &str) -> Result<GateCircuit> {
    let c: GateCircuit = serde_json::from_str(text)?;
    c.validate()?;
    Ok(c)
}

/// Writes a circuit to a file.
pub fn export_circuit(circuit: &GateCircuit, path: &Path) -> Result<()> {
    let text = circuit_to_json(circuit)?;
    let io = |e| TvqError::Io { path: path.to_path_buf(), source: e };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.write_all(b"\n").map_err(io)?;
    Ok(())
}

/// Reads a circuit from a file.
pub fn import_circuit(path: &Path) -> Result<GateCircuit> {
    let text = std::fs::read_to_string(path).map_err(|e| TvqError::Io { path: path.to_path_buf(), source: e })?;
    circuit_from_json(&text)
}
