//! Pre-existing error strings and their fate under braiding protocols.
//!
//! An error string is an open walk on the lattice whose endpoints carry the
//! anyons it creates.  Local moves deform the walk inside their support
//! (a flipped edge becomes the two-edge detour around the quadrilateral, a
//! removed vertex is bypassed along the link of its star), and a
//! connectivity-preserving isomorphism carries it to the image walk.  Length
//! is the number of edges.  Separately, [`lightcone_grow`] tracks the full
//! support an operator may spread over under a gate circuit.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{compile_schedule, move_gates, GateCircuit, GateKind};
use crate::error::{Result, TvqError};
use crate::gadgets::{braid, braid_setup};
use crate::lattice::{check_cpi, EdgeId, MoveRecord, Slot, SlotMap, SurfaceLattice, VertexId};
use crate::schedule::{GroupKind, MoveSchedule};

/// Shortest sampled error string.
pub const MIN_SAMPLED_LENGTH: usize = 1;

/// Longest sampled error string; short compared with every supported
/// distance.
pub const MAX_SAMPLED_LENGTH: usize = 2;

/// A connected edge path `vertices[0] - vertices[1] - … - vertices[n]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorString {
    /// Edge ids along the path; `edges[i]` joins `vertices[i]` and
    /// `vertices[i + 1]`.
    pub edges: Vec<EdgeId>,
    /// The walk's vertices, one more than the edges.
    pub vertices: Vec<VertexId>,
    /// Path length in edges.
    pub length: usize,
}

impl ErrorString {
    /// Builds the string along a vertex walk.  Consecutive vertices must be
    /// adjacent and the walk must have at least one edge.
    pub fn from_vertices(lattice: &SurfaceLattice, vertices: &[VertexId]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(TvqError::InvalidArgument("an error string needs at least one edge".into()));
        }
        let edges = vertices
            .windows(2)
            .map(|w| {
                lattice.edge_between(w[0], w[1]).ok_or_else(|| {
                    TvqError::InvalidArgument(format!("vertices {} and {} are not adjacent", w[0], w[1]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::raw(vertices.to_vec(), edges))
    }

    /// Builds the string along an edge path; consecutive edges must share a
    /// vertex.
    pub fn from_edges(lattice: &SurfaceLattice, edges: &[EdgeId]) -> Result<Self> {
        let ends = |e: EdgeId| {
            lattice
                .edge(e)
                .map(|x| (x.v1, x.v2))
                .ok_or_else(|| TvqError::InvalidArgument(format!("edge {e} does not exist")))
        };
        let Some(&first) = edges.first() else {
            return Err(TvqError::InvalidArgument("an error string needs at least one edge".into()));
        };
        let (a, b) = ends(first)?;
        // Start at the endpoint of the first edge not shared with the second.
        let start = match edges.get(1) {
            Some(&e) => {
                let (c, d) = ends(e)?;
                if b == c || b == d {
                    a
                } else {
                    b
                }
            }
            None => a,
        };
        let mut vertices = vec![start];
        for &e in edges {
            let (u, v) = ends(e)?;
            let last = *vertices.last().expect("non-empty");
            let next = if u == last {
                v
            } else if v == last {
                u
            } else {
                return Err(TvqError::InvalidArgument(format!("edge {e} does not continue the path at vertex {last}")));
            };
            vertices.push(next);
        }
        Ok(Self::raw(vertices, edges.to_vec()))
    }

    fn raw(vertices: Vec<VertexId>, edges: Vec<EdgeId>) -> Self {
        let length = edges.len();
        ErrorString { edges, vertices, length }
    }

    /// The two anyon positions at the ends of the string.
    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.vertices[0], *self.vertices.last().expect("non-empty"))
    }

    /// Checks that every edge exists and joins its two walk vertices.
    pub fn validate(&self, lattice: &SurfaceLattice) -> Result<()> {
        if self.edges.is_empty() || self.vertices.len() != self.edges.len() + 1 || self.length != self.edges.len() {
            return Err(TvqError::ConnectivityViolation("malformed error string".into()));
        }
        for (i, e) in self.edges.iter().enumerate() {
            let ok = lattice.edge(*e).is_some_and(|x| x.joins(self.vertices[i], self.vertices[i + 1]));
            if !ok {
                return Err(TvqError::ConnectivityViolation(format!(
                    "edge {e} does not join vertices {} and {}",
                    self.vertices[i],
                    self.vertices[i + 1]
                )));
            }
        }
        Ok(())
    }

    /// Shortens the string without moving it across a puncture: cancels
    /// backtracks and replaces `u - v - w` by `u - w` whenever `u, v, w`
    /// bound a triangle and `v` is not a puncture, until neither applies.
    /// The result is homotopic to the input relative to its endpoints in the
    /// surface with the punctures removed.
    pub fn shorten(&mut self, lattice: &SurfaceLattice) -> Result<()> {
        self.validate(lattice)?;
        loop {
            self.reduce();
            let shortcut = (0..self.length.saturating_sub(1)).find_map(|i| {
                let (u, v, w) = (self.vertices[i], self.vertices[i + 1], self.vertices[i + 2]);
                if lattice.is_puncture(v) {
                    return None;
                }
                let e = lattice.edge_between(u, w)?;
                lattice
                    .triangles_of_edge(e)
                    .iter()
                    .any(|t| lattice.triangle(*t).is_some_and(|t| t.verts.contains(&v)))
                    .then_some((i, e))
            });
            let Some((i, e)) = shortcut else {
                return Ok(());
            };
            self.vertices.remove(i + 1);
            self.edges.splice(i..i + 2, [e]);
            self.length = self.edges.len();
        }
    }

    /// Cancels immediate backtracks `u - v - u` along the same edge.
    fn reduce(&mut self) {
        let mut vs: Vec<VertexId> = Vec::with_capacity(self.vertices.len());
        let mut es: Vec<EdgeId> = Vec::with_capacity(self.edges.len());
        vs.push(self.vertices[0]);
        for (i, &e) in self.edges.iter().enumerate() {
            let next = self.vertices[i + 1];
            if es.last() == Some(&e) && vs.len() >= 2 && vs[vs.len() - 2] == next {
                es.pop();
                vs.pop();
            } else {
                es.push(e);
                vs.push(next);
            }
        }
        *self = Self::raw(vs, es);
    }
}

/// Carries `err` through a connectivity-preserving isomorphism `sigma` from
/// `lattice` onto `target`.  The image walk is connected because the map
/// sends edges to edges; this is re-checked edge by edge.
pub fn propagate_cpi(
    err: &ErrorString,
    lattice: &SurfaceLattice,
    sigma: &SlotMap,
    target: &SurfaceLattice,
) -> Result<ErrorString> {
    err.validate(lattice)?;
    let vmap = check_cpi(lattice, sigma, target)?;
    map_by_vertices(err, &vmap, target)
}

fn map_by_vertices(
    err: &ErrorString,
    vmap: &BTreeMap<VertexId, VertexId>,
    target: &SurfaceLattice,
) -> Result<ErrorString> {
    let image = err
        .vertices
        .iter()
        .map(|v| {
            vmap.get(v).copied().ok_or_else(|| TvqError::ConnectivityViolation(format!("vertex {v} has no image")))
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorString::from_vertices(target, &image)
        .map_err(|e| TvqError::ConnectivityViolation(format!("image of the error string is disconnected: {e}")))
}

/// Deforms `err` through one move applied to `lattice`.  The deformation
/// never routes the string through a puncture, so the result is homotopic
/// to the input in the punctured surface.  Permutation records must carry
/// their target layout.
pub fn propagate_move(err: &ErrorString, record: &MoveRecord, lattice: &SurfaceLattice) -> Result<ErrorString> {
    let mut out = match record {
        MoveRecord::FMove { edge, legs, old_ends: [a, c], new_ends: [y, x], .. } => {
            let [eay, eyc, ecx, exa] = *legs;
            let leg = |u: VertexId, w: VertexId| -> EdgeId {
                match (u, w) {
                    _ if (u, w) == (*a, *y) || (u, w) == (*y, *a) => eay,
                    _ if (u, w) == (*y, *c) || (u, w) == (*c, *y) => eyc,
                    _ if (u, w) == (*c, *x) || (u, w) == (*x, *c) => ecx,
                    _ => exa,
                }
            };
            let mut vs = vec![err.vertices[0]];
            let mut es = Vec::new();
            for (i, &e) in err.edges.iter().enumerate() {
                let (u, w) = (err.vertices[i], err.vertices[i + 1]);
                if e == *edge {
                    // Detour through an apex that is not a puncture,
                    // preferring one that lets the walk cancel a backtrack.
                    let before = i.checked_sub(1).map(|j| err.vertices[j]);
                    let after = err.vertices.get(i + 2).copied();
                    let apexes: Vec<VertexId> = [*x, *y].into_iter().filter(|v| !lattice.is_puncture(*v)).collect();
                    let apex = *apexes
                        .iter()
                        .find(|v| before == Some(**v) || after == Some(**v))
                        .or_else(|| apexes.first())
                        .ok_or_else(|| {
                            TvqError::VerificationFailed(format!("both apexes of flipped edge {edge} are punctures"))
                        })?;
                    es.push(leg(u, apex));
                    vs.push(apex);
                    es.push(leg(apex, w));
                } else {
                    es.push(e);
                }
                vs.push(w);
            }
            ErrorString::raw(vs, es)
        }
        MoveRecord::Pachner13 { .. } => err.clone(),
        MoveRecord::Pachner31 { vertex, corners, outer, .. } => bypass_vertex(err, *vertex, corners, outer, lattice)?,
        MoveRecord::LocalSwap { edges, .. } => {
            if err.edges.iter().any(|e| edges.contains(e)) {
                return Err(TvqError::InvalidArgument("error strings are not tracked through qubit swaps".into()));
            }
            err.clone()
        }
        MoveRecord::Permutation { vertex_map, target, .. } => {
            let target = target
                .as_ref()
                .ok_or_else(|| TvqError::InvalidArgument("permutation record lacks its target layout".into()))?;
            map_by_vertices(err, vertex_map, target)?
        }
    };
    out.reduce();
    if out.length == 0 {
        return Err(TvqError::VerificationFailed("error string collapsed to a point".into()));
    }
    Ok(out)
}

/// Replaces passages through the removed vertex `m` by the link edge of
/// its star; an endpoint at `m` moves to a corner.
fn bypass_vertex(
    err: &ErrorString,
    m: VertexId,
    corners: &[VertexId; 3],
    outer: &[EdgeId; 3],
    lattice: &SurfaceLattice,
) -> Result<ErrorString> {
    // outer[i] joins corners[i + 1] and corners[i + 2].
    let link = |u: VertexId, w: VertexId| -> Result<EdgeId> {
        let i = corners.iter().position(|c| *c == u);
        let j = corners.iter().position(|c| *c == w);
        match (i, j) {
            (Some(i), Some(j)) if i != j => Ok(outer[3 - i - j]),
            _ => Err(TvqError::VerificationFailed(format!("vertices {u} and {w} are not corners around {m}"))),
        }
    };
    let mut s = err.clone();
    s.reduce();
    if !s.vertices.contains(&m) {
        return Ok(s);
    }
    let n = s.vertices.len();
    let (first, last) = s.endpoints();
    // An endpoint at m moves to a corner other than its neighbour and the
    // far endpoint, avoiding punctures.
    let corner_for = |neighbour: VertexId, far: VertexId| {
        *corners
            .iter()
            .find(|c| **c != neighbour && **c != far && !lattice.is_puncture(**c))
            .or_else(|| corners.iter().find(|c| **c != neighbour && **c != far))
            .unwrap_or(&corners[0])
    };
    let mut vs: Vec<VertexId> = Vec::with_capacity(n);
    // `None` marks a new link edge to be resolved once both ends are known.
    let mut es: Vec<Option<EdgeId>> = Vec::with_capacity(n);
    let mut bridge = false;
    for i in 0..n {
        let v = s.vertices[i];
        if v == m {
            if i == 0 {
                vs.push(corner_for(s.vertices[1], last));
                bridge = true;
            } else if i == n - 1 {
                es.push(None);
                vs.push(corner_for(s.vertices[n - 2], first));
            } else {
                bridge = true;
            }
            continue;
        }
        if i > 0 {
            es.push(if bridge { None } else { Some(s.edges[i - 1]) });
        }
        bridge = false;
        vs.push(v);
    }
    let es = es
        .iter()
        .enumerate()
        .map(|(j, e)| match e {
            Some(e) => Ok(*e),
            None => link(vs[j], vs[j + 1]),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorString::raw(vs, es))
}

/// Deforms `err` through every move of `schedule`, applied to `lattice`,
/// in order.  Returns the string and the final lattice.
pub fn propagate_schedule(
    err: &ErrorString,
    lattice: &SurfaceLattice,
    schedule: &MoveSchedule,
) -> Result<(ErrorString, SurfaceLattice)> {
    let (mut out, l) = propagate_many(std::slice::from_ref(err), lattice, schedule)?;
    Ok((out.pop().expect("one string"), l))
}

/// [`propagate_schedule`] for many strings with a single replay.
pub fn propagate_many(
    errs: &[ErrorString],
    lattice: &SurfaceLattice,
    schedule: &MoveSchedule,
) -> Result<(Vec<ErrorString>, SurfaceLattice)> {
    for e in errs {
        e.validate(lattice)?;
    }
    let mut l = lattice.clone();
    let mut out = errs.to_vec();
    for m in schedule.moves() {
        for e in out.iter_mut() {
            *e = propagate_move(e, m, &l)?;
        }
        l.replay_in_place(m)?;
    }
    for e in &out {
        e.validate(&l)?;
    }
    Ok((out, l))
}

// ----------------------------------------------------------------------
// Light cones
// ----------------------------------------------------------------------

/// Grows a qubit support through `circuit`: after each gate layer the
/// support absorbs the full support of every gate touching it, and
/// permutation layers relabel it.  Allocated and released ancillas drop out.
pub fn lightcone_grow(support: &BTreeSet<Slot>, circuit: &GateCircuit) -> BTreeSet<Slot> {
    trace_support(support, circuit, true)
}

/// Where `support` ends up if only the permutation layers act on it.
pub fn transport_support(support: &BTreeSet<Slot>, circuit: &GateCircuit) -> BTreeSet<Slot> {
    trace_support(support, circuit, false)
}

fn trace_support(support: &BTreeSet<Slot>, circuit: &GateCircuit, grow: bool) -> BTreeSet<Slot> {
    let mut s = support.clone();
    let permute = |s: &mut BTreeSet<Slot>, layer: usize| {
        for p in circuit.permutations.iter().filter(|p| p.after_layer == layer) {
            let map: BTreeMap<Slot, Slot> = p.map.iter().copied().collect();
            *s = s.iter().map(|q| map.get(q).copied().unwrap_or(*q)).collect();
        }
    };
    permute(&mut s, 0);
    for (i, layer) in circuit.layers.iter().enumerate() {
        // Allocated qubits start fresh and released ones leave the system,
        // so a reused slot id does not inherit the cone.
        for g in layer.iter().filter(|g| matches!(g.kind, GateKind::Alloc | GateKind::Release)) {
            for q in &g.targets {
                s.remove(q);
            }
        }
        if grow {
            let touched: Vec<Slot> = layer
                .iter()
                .filter(|g| !matches!(g.kind, GateKind::Alloc | GateKind::Release))
                .map(|g| g.support())
                .filter(|sup| sup.iter().any(|q| s.contains(q)))
                .flatten()
                .collect();
            s.extend(touched);
        }
        permute(&mut s, i + 1);
    }
    s
}

/// Qubit adjacency: two qubits are adjacent if their edges bound a common
/// triangle.
fn qubit_graph(lattice: &SurfaceLattice) -> BTreeMap<Slot, BTreeSet<Slot>> {
    let mut neighbours: BTreeMap<Slot, BTreeSet<Slot>> =
        lattice.qubit_slots().into_iter().map(|q| (q, BTreeSet::new())).collect();
    for t in lattice.triangles() {
        let qs: Vec<Slot> = t.edges.iter().filter_map(|e| lattice.edge(*e).and_then(|x| x.qubit)).collect();
        for &a in &qs {
            neighbours.entry(a).or_default().extend(qs.iter().copied().filter(|b| *b != a));
        }
    }
    neighbours
}

fn graph_radius(graph: &BTreeMap<Slot, BTreeSet<Slot>>, from: &BTreeSet<Slot>, cone: &BTreeSet<Slot>) -> Result<usize> {
    if let Some(q) = from.iter().chain(cone).find(|q| !graph.contains_key(q)) {
        return Err(TvqError::InvalidArgument(format!("slot {q} carries no qubit of the lattice")));
    }
    let mut dist: BTreeMap<Slot, usize> = from.iter().map(|q| (*q, 0)).collect();
    let mut queue: VecDeque<Slot> = from.iter().copied().collect();
    let mut remaining = cone.iter().filter(|q| !dist.contains_key(q)).count();
    while let Some(q) = queue.pop_front() {
        if remaining == 0 {
            break;
        }
        let dq = dist[&q];
        for &r in &graph[&q] {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(r) {
                e.insert(dq + 1);
                if cone.contains(&r) {
                    remaining -= 1;
                }
                queue.push_back(r);
            }
        }
    }
    cone.iter()
        .map(|q| dist.get(q).copied().ok_or_else(|| TvqError::VerificationFailed(format!("slot {q} is unreachable"))))
        .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
}

/// Largest qubit-graph distance from `from` to any qubit of `cone`, where
/// two qubits are adjacent if their edges bound a common triangle.
pub fn support_radius(lattice: &SurfaceLattice, from: &BTreeSet<Slot>, cone: &BTreeSet<Slot>) -> Result<usize> {
    graph_radius(&qubit_graph(lattice), from, cone)
}

// ----------------------------------------------------------------------
// Reports
// ----------------------------------------------------------------------

/// One sampled error string pushed through a braid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchRow {
    pub d: usize,
    pub trial: usize,
    pub initial_len: usize,
    pub final_len: usize,
    pub ratio: f64,
}

/// Per-distance aggregate of [`StretchRow`]s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchSummary {
    pub d: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// Result of [`stretch_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchReport {
    pub rows: Vec<StretchRow>,
    pub summary: Vec<StretchSummary>,
}

impl StretchReport {
    /// CSV with columns `d,trial,initial_len,final_len,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,trial,initial_len,final_len,ratio\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{:.6}\n", r.d, r.trial, r.initial_len, r.final_len, r.ratio));
        }
        out
    }

    /// Summary for distance `d`, if it was measured.
    pub fn summary_for(&self, d: usize) -> Option<&StretchSummary> {
        self.summary.iter().find(|s| s.d == d)
    }
}

/// RNG of one trial, derived from the run seed and the trial index.
fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Samples a self-avoiding walk of `MIN_SAMPLED_LENGTH..=MAX_SAMPLED_LENGTH`
/// qubit edges that starts within `radius` (layout units) of `center` and
/// avoids punctures.
fn sample_string(lattice: &SurfaceLattice, center: VertexId, radius: f64, rng: &mut ChaCha8Rng) -> Result<ErrorString> {
    let (cx, cy) = lattice.position(center);
    let starts: Vec<VertexId> = lattice
        .vertices()
        .filter(|v| !lattice.is_puncture(v.id) && ((v.x - cx).powi(2) + (v.y - cy).powi(2)).sqrt() <= radius)
        .map(|v| v.id)
        .collect();
    if starts.is_empty() {
        return Err(TvqError::InvalidArgument("no vertex to start an error string from".into()));
    }
    let len = rng.gen_range(MIN_SAMPLED_LENGTH..=MAX_SAMPLED_LENGTH);
    // Rejection sampling over walks; dead ends are rare on grid patches.
    for _ in 0..1000 {
        let mut walk = vec![*starts.choose(rng).expect("non-empty")];
        while walk.len() <= len {
            let last = *walk.last().expect("non-empty");
            let options: Vec<VertexId> = lattice
                .incident_edges(last)
                .into_iter()
                .filter_map(|e| lattice.edge(e))
                .filter(|e| e.qubit.is_some())
                .map(|e| e.other(last))
                .filter(|w| !lattice.is_puncture(*w) && !walk.contains(w))
                .collect();
            let Some(&next) = options.choose(rng) else {
                break;
            };
            walk.push(next);
        }
        if walk.len() == len + 1 {
            return ErrorString::from_vertices(lattice, &walk);
        }
    }
    Err(TvqError::VerificationFailed("could not sample an error string".into()))
}

/// Pushes `trials` random short error strings per distance through the
/// constant-depth braid and reports the length ratios, measuring the final
/// string after [`ErrorString::shorten`].  Strings start within
/// the braid hexagon (plus one unit), so most of them are crossed by a
/// shear.  Deterministic given `seed`.
pub fn stretch_report(distances: &[usize], trials: usize, seed: u64) -> Result<StretchReport> {
    if trials == 0 {
        return Err(TvqError::InvalidArgument("at least one trial is required".into()));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &d in distances {
        let setup = braid_setup(d)?;
        let outcome = braid(&setup.lattice, setup.moving, setup.center)?;
        let radius = (d / 2) as f64 + 1.0;
        let initial = (0..trials)
            .map(|trial| sample_string(&setup.lattice, setup.center, radius, &mut trial_rng(seed, trial)))
            .collect::<Result<Vec<_>>>()?;
        let (finals, lat) = propagate_many(&initial, &setup.lattice, &outcome.schedule)?;
        let mut ratios = Vec::with_capacity(trials);
        for (trial, (err, mut out)) in initial.iter().zip(finals).enumerate() {
            out.shorten(&lat)?;
            let ratio = out.length as f64 / err.length as f64;
            ratios.push(ratio);
            rows.push(StretchRow { d, trial, initial_len: err.length, final_len: out.length, ratio });
        }
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        summary.push(StretchSummary { d, max_ratio, mean_ratio });
    }
    Ok(StretchReport { rows, summary })
}

/// Light-cone growth of the compiled braid at one distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightconeSummary {
    pub d: usize,
    /// Gate depth of the compiled braid circuit.
    pub depth: usize,
    /// Number of local move layers.
    pub local_layers: usize,
    /// Largest qubit-graph diameter of a single move's support.
    pub max_move_diameter: usize,
    /// Structural growth radius: the sum over local move layers of the
    /// largest move diameter in that layer.  Moves within a layer have
    /// disjoint supports, so a cone crosses at most one move per layer.
    pub radius_bound: usize,
    /// Largest realised growth radius over all single-qubit seeds that
    /// survive the braid.
    pub radius: usize,
    /// Largest light-cone size over all single-qubit seeds.
    pub max_support: usize,
}

/// Largest pairwise qubit-graph distance among `slots` in `lattice`
/// (slots the lattice does not carry are ignored).
fn slot_diameter(lattice: &SurfaceLattice, slots: &BTreeSet<Slot>) -> Result<usize> {
    let graph = qubit_graph(lattice);
    let present: BTreeSet<Slot> = slots.iter().copied().filter(|q| graph.contains_key(q)).collect();
    present.iter().try_fold(0, |acc, q| Ok(acc.max(graph_radius(&graph, &BTreeSet::from([*q]), &present)?)))
}

/// Structural light-cone data of a schedule: the number of local move
/// layers, the largest move diameter and the summed per-layer diameters.
/// Diameters are measured on the lattice before and after each move.
pub fn schedule_lightcone_bound(lattice: &SurfaceLattice, schedule: &MoveSchedule) -> Result<(usize, usize, usize)> {
    let mut l = lattice.clone();
    let (mut layers, mut max_diam, mut bound) = (0, 0, 0);
    for g in &schedule.groups {
        for layer in &g.layers {
            let mut layer_diam = 0;
            let local = g.kind == GroupKind::Local;
            for m in layer {
                let support: BTreeSet<Slot> = if local {
                    move_gates(m)?.iter().flat_map(|gate| gate.support()).collect()
                } else {
                    BTreeSet::new()
                };
                let before = if local { slot_diameter(&l, &support)? } else { 0 };
                l.replay_in_place(m)?;
                let after = if local { slot_diameter(&l, &support)? } else { 0 };
                layer_diam = layer_diam.max(before).max(after);
            }
            if local {
                layers += 1;
                bound += layer_diam;
                max_diam = max_diam.max(layer_diam);
            }
        }
    }
    Ok((layers, max_diam, bound))
}

/// Grows the light cone of every qubit of the braid patch through the
/// compiled braid circuit and measures how far each cone reaches beyond the
/// qubit's transported image on the final lattice.  Also reports the
/// structural radius bound derived from the schedule.
pub fn lightcone_report(d: usize) -> Result<LightconeSummary> {
    let setup = braid_setup(d)?;
    let outcome = braid(&setup.lattice, setup.moving, setup.center)?;
    let circuit = compile_schedule(&outcome.schedule)?;
    let (local_layers, max_move_diameter, radius_bound) = schedule_lightcone_bound(&setup.lattice, &outcome.schedule)?;
    let final_qubits: BTreeSet<Slot> = outcome.lattice.qubit_slots().into_iter().collect();
    let graph = qubit_graph(&outcome.lattice);
    let mut radius = 0;
    let mut max_support = 0;
    for q in setup.lattice.qubit_slots() {
        let seed = BTreeSet::from([q]);
        let cone: BTreeSet<Slot> = lightcone_grow(&seed, &circuit).intersection(&final_qubits).copied().collect();
        max_support = max_support.max(cone.len());
        // A seed carried onto an ancilla that is later released has no
        // image to measure from.
        let image: BTreeSet<Slot> = transport_support(&seed, &circuit).intersection(&final_qubits).copied().collect();
        if !image.is_empty() {
            radius = radius.max(graph_radius(&graph, &image, &cone)?);
        }
    }
    Ok(LightconeSummary {
        d,
        depth: circuit.depth(),
        local_layers,
        max_move_diameter,
        radius_bound,
        radius,
        max_support,
    })
}
