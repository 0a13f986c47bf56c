//! Braiding gadgets on planar grid patches: row splitting, the shear step
//! (local insertions, strip realignment, a connectivity-preserving
//! permutation and local removals), the hexagonal braid built from six shear
//! steps, the hop-by-hop sequential baseline, and logical-action extraction.
//!
//! All gadgets expect the standard grid layout of
//! [`SurfaceLattice::planar_patch`]: integer vertex positions, squares split
//! along the `(1, 1)` diagonal.  Lattice directions are `e1 = (1, 0)`,
//! `e2 = (0, 1)` and `e3 = (1, 1)`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvqError};
use crate::fusion::FusionData;
use crate::lattice::{apply_cpi, cpi_from_vertex_map, EdgeId, MoveRecord, SurfaceLattice, VertexId};
use crate::scalar::Scalar;
use crate::schedule::MoveSchedule;
use crate::statevec::{inner, StringNetState};

/// Tolerance for comparing layout coordinates.
const COORD_EPS: f64 = 1e-9;

/// Upper bound on odd-even realignment rounds before giving up.
const MAX_REALIGN_ROUNDS: usize = 256;

/// Upper bound on triangulations explored by one baseline hop search.
const MAX_HOP_STATES: usize = 500_000;

/// Largest code-space dimension accepted by logical-action extraction.
pub const MAX_LOGICAL_DIM: usize = 8;

/// Unitarity tolerance of extracted logical actions.
pub const UNITARITY_TOL: f64 = 1e-8;

/// One of the six lattice directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    E1,
    E2,
    E3,
    NegE1,
    NegE2,
    NegE3,
}

impl Direction {
    pub const ALL: [Direction; 6] =
        [Direction::E1, Direction::E2, Direction::E3, Direction::NegE1, Direction::NegE2, Direction::NegE3];

    /// Integer step vector.
    pub fn vector(self) -> (i64, i64) {
        match self {
            Direction::E1 => (1, 0),
            Direction::E2 => (0, 1),
            Direction::E3 => (1, 1),
            Direction::NegE1 => (-1, 0),
            Direction::NegE2 => (0, -1),
            Direction::NegE3 => (-1, -1),
        }
    }

    /// Direction of an integer unit step, if it is a lattice direction.
    pub fn from_vector(v: (i64, i64)) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.vector() == v)
    }

    fn sign(self) -> f64 {
        match self {
            Direction::E1 | Direction::E2 | Direction::E3 => 1.0,
            _ => -1.0,
        }
    }

    /// Coordinates `(perp, along)`: lines parallel to the direction have
    /// constant `perp`; `along` increases in the direction of motion.
    fn coords(self, (x, y): (f64, f64)) -> (f64, f64) {
        let s = self.sign();
        match self {
            Direction::E1 | Direction::NegE1 => (y, s * x),
            Direction::E2 | Direction::NegE2 => (x, s * y),
            Direction::E3 | Direction::NegE3 => (x - y, s * x),
        }
    }

    /// Inverse of [`Direction::coords`].
    fn point(self, perp: f64, along: f64) -> (f64, f64) {
        let b = self.sign() * along;
        match self {
            Direction::E1 | Direction::NegE1 => (b, perp),
            Direction::E2 | Direction::NegE2 => (perp, b),
            Direction::E3 | Direction::NegE3 => (b, b - perp),
        }
    }
}

/// Order of the hexagon sides traversed by [`braid`], starting from the
/// point `k` steps along `+e1` from the centre.
pub const HEXAGON: [Direction; 6] =
    [Direction::E2, Direction::NegE1, Direction::NegE3, Direction::NegE2, Direction::E1, Direction::E3];

fn vertex_at(l: &SurfaceLattice, (x, y): (f64, f64)) -> Result<VertexId> {
    l.vertex_at(x, y)
        .ok_or_else(|| TvqError::InvalidArgument(format!("no vertex at ({x}, {y}); the patch is too small")))
}

fn edge_between(l: &SurfaceLattice, a: VertexId, b: VertexId) -> Result<EdgeId> {
    l.edge_between(a, b).ok_or_else(|| TvqError::MoveRejected(format!("vertices {a} and {b} are not adjacent")))
}

fn integer_position(l: &SurfaceLattice, v: VertexId) -> Result<(i64, i64)> {
    if l.vertex(v).is_none() {
        return Err(TvqError::InvalidArgument(format!("vertex {v} does not exist")));
    }
    let (x, y) = l.position(v);
    let (rx, ry) = (x.round(), y.round());
    if (x - rx).abs() > COORD_EPS || (y - ry).abs() > COORD_EPS {
        return Err(TvqError::InvalidArgument(format!("vertex {v} is not on the grid")));
    }
    Ok((rx as i64, ry as i64))
}

fn require_puncture(l: &SurfaceLattice, v: VertexId) -> Result<()> {
    if !l.is_puncture(v) {
        return Err(TvqError::InvalidArgument(format!("vertex {v} is not a puncture")));
    }
    Ok(())
}

// ----------------------------------------------------------------------
// Row splitting
// ----------------------------------------------------------------------

/// A horizontal row of `len` squares between grid rows `row` and `row + 1`,
/// starting at column `x0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSpec {
    pub row: i64,
    pub x0: i64,
    pub len: usize,
}

/// Result of a gadget: its schedule and the lattice it produces.
#[derive(Clone, Debug)]
pub struct GadgetOutcome {
    pub schedule: MoveSchedule,
    pub lattice: SurfaceLattice,
}

/// Splits a row of squares into two rows in three layers, independent of
/// the row length: a 1-3 move in every upper-left triangle, then a flip of
/// every diagonal, then a flip of every interior vertical.  Returns the
/// outcome and the new middle vertices from left to right.
pub fn split_row(lattice: &SurfaceLattice, spec: RowSpec) -> Result<(GadgetOutcome, Vec<VertexId>)> {
    if spec.len == 0 {
        return Err(TvqError::InvalidArgument("row length must be positive".into()));
    }
    let (r, x0, n) = (spec.row as f64, spec.x0, spec.len as i64);
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    for x in x0..=x0 + n {
        bottom.push(vertex_at(lattice, (x as f64, r))?);
        top.push(vertex_at(lattice, (x as f64, r + 1.0))?);
    }
    if let Some(p) = bottom.iter().chain(&top).find(|v| lattice.is_puncture(**v)) {
        return Err(TvqError::MoveRejected(format!("row touches puncture {p}")));
    }
    let mut l = lattice.clone();
    let mut schedule = MoveSchedule::new(lattice);
    let mut diagonals = Vec::new();
    let mut verticals = Vec::new();
    let mut split_layer = Vec::new();
    let mut middle = Vec::new();
    for i in 0..spec.len {
        let diag = edge_between(&l, bottom[i], top[i + 1])?;
        let tri = l
            .triangles_of_edge(diag)
            .into_iter()
            .find(|t| l.triangle(*t).is_some_and(|t| t.verts.contains(&top[i])))
            .ok_or_else(|| TvqError::InvalidArgument("row is not in grid layout".into()))?;
        let pos = [spec.x0 as f64 + i as f64 + 0.5, r + 0.5];
        let rec = l.split_triangle_at(tri, pos)?;
        if let MoveRecord::Pachner13 { vertex, .. } = &rec {
            middle.push(*vertex);
        }
        split_layer.push(rec);
        diagonals.push(diag);
        if i + 1 < spec.len {
            verticals.push(edge_between(&l, bottom[i + 1], top[i + 1])?);
        }
    }
    let diag_layer = diagonals.iter().map(|&e| l.flip_in_place(e)).collect::<Result<Vec<_>>>()?;
    let vert_layer = verticals.iter().map(|&e| l.flip_in_place(e)).collect::<Result<Vec<_>>>()?;
    schedule.push_layers(format!("split row {}", spec.row), vec![split_layer, diag_layer, vert_layer]);
    Ok((GadgetOutcome { schedule, lattice: l }, middle))
}

/// Merges two rows produced by [`split_row`] back into one, given the
/// middle vertices from left to right: flips between consecutive middle
/// vertices, then flips from each middle vertex to its lower-right
/// neighbour, then 3-1 moves.
pub fn merge_rows(lattice: &SurfaceLattice, middle: &[VertexId]) -> Result<GadgetOutcome> {
    if middle.is_empty() {
        return Err(TvqError::InvalidArgument("no middle vertices to merge".into()));
    }
    let mut l = lattice.clone();
    let mut schedule = MoveSchedule::new(lattice);
    let links = middle.windows(2).map(|w| edge_between(&l, w[0], w[1])).collect::<Result<Vec<_>>>()?;
    let layer1 = links.iter().map(|&e| l.flip_in_place(e)).collect::<Result<Vec<_>>>()?;
    let mut lower = Vec::new();
    for &m in middle {
        let (mx, my) = l.position(m);
        let e = l
            .incident_edges(m)
            .into_iter()
            .filter(|&e| {
                let (_, y) = l.position(l.edge(e).expect("incident").other(m));
                y < my - COORD_EPS
            })
            .max_by(|&a, &b| {
                let xa = l.position(l.edge(a).expect("incident").other(m)).0;
                let xb = l.position(l.edge(b).expect("incident").other(m)).0;
                xa.total_cmp(&xb)
            })
            .ok_or_else(|| TvqError::InvalidArgument(format!("vertex {m} at ({mx}, {my}) has no lower neighbour")))?;
        lower.push(e);
    }
    let layer2 = lower.iter().map(|&e| l.flip_in_place(e)).collect::<Result<Vec<_>>>()?;
    let layer3 = middle.iter().map(|&m| l.merge_vertex_in_place(m)).collect::<Result<Vec<_>>>()?;
    schedule.push_layers("merge rows", vec![layer1, layer2, layer3]);
    Ok(GadgetOutcome { schedule, lattice: l })
}

// ----------------------------------------------------------------------
// Shear step
// ----------------------------------------------------------------------

/// One inserted vertex: the line edge it subdivides (whose id now joins the
/// vertex to the far apex) and the vertex itself.
#[derive(Clone, Copy, Debug)]
struct Insertion {
    edge: EdgeId,
    vertex: VertexId,
}

/// Subdivides the given line edges (line `perp`, edge from `along` to
/// `along + 1`): a 1-3 move in the triangle on the `+perp` side, then a flip
/// of the line edge, leaving a degree-4 vertex at the edge midpoint.
fn insert_on_lines(
    l: &mut SurfaceLattice,
    dir: Direction,
    edges: &[(f64, f64)],
) -> Result<(Vec<MoveRecord>, Vec<MoveRecord>, Vec<Insertion>)> {
    let mut splits = Vec::new();
    let mut pending = Vec::new();
    for &(perp, along) in edges {
        let p = vertex_at(l, dir.point(perp, along))?;
        let q = vertex_at(l, dir.point(perp, along + 1.0))?;
        let e = edge_between(l, p, q)?;
        let tri = l
            .triangles_of_edge(e)
            .into_iter()
            .find(|&t| {
                let t = l.triangle(t).expect("listed");
                t.verts.iter().any(|&v| dir.coords(l.position(v)).0 > perp + 0.5)
            })
            .ok_or_else(|| TvqError::MoveRejected(format!("line edge {e} lies on the boundary")))?;
        let (a, b) = (l.position(p), l.position(q));
        let rec = l.split_triangle_at(tri, [(a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0])?;
        let MoveRecord::Pachner13 { vertex, .. } = rec else { unreachable!("split yields a 1-3 record") };
        splits.push(rec);
        pending.push(Insertion { edge: e, vertex });
    }
    let flips = pending.iter().map(|ins| l.flip_in_place(ins.edge)).collect::<Result<Vec<_>>>()?;
    Ok((splits, flips, pending))
}

/// Vertices of a line, ascending along the direction of motion.
fn line_vertices(l: &SurfaceLattice, dir: Direction, perp: f64) -> Vec<VertexId> {
    let mut vs: Vec<(f64, VertexId)> = l
        .vertices()
        .filter_map(|v| {
            let (p, a) = dir.coords((v.x, v.y));
            ((p - perp).abs() < COORD_EPS).then_some((a, v.id))
        })
        .collect();
    vs.sort_by(|a, b| a.0.total_cmp(&b.0));
    vs.into_iter().map(|(_, v)| v).collect()
}

/// Rungs of the strip between two lines as index pairs, in path order.
fn strip_path(l: &SurfaceLattice, lower: &[VertexId], upper: &[VertexId]) -> Result<Vec<(usize, usize)>> {
    let li: HashMap<VertexId, usize> = lower.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let ui: HashMap<VertexId, usize> = upper.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut rungs: Vec<(usize, usize)> = l
        .edges()
        .filter_map(|e| match (li.get(&e.v1), ui.get(&e.v2), li.get(&e.v2), ui.get(&e.v1)) {
            (Some(&a), Some(&b), _, _) | (_, _, Some(&a), Some(&b)) => Some((a, b)),
            _ => None,
        })
        .collect();
    rungs.sort_unstable();
    for w in rungs.windows(2) {
        let step = (w[1].0 - w[0].0, w[1].1.wrapping_sub(w[0].1));
        if step != (1, 0) && step != (0, 1) {
            return Err(TvqError::VerificationFailed(format!("strip is not a monotone chain at {:?}", w)));
        }
    }
    Ok(rungs)
}

/// Step word of a rung path: `false` advances the lower line, `true` the
/// upper one.
fn path_word(path: &[(usize, usize)]) -> Vec<bool> {
    path.windows(2).map(|w| w[1].1 != w[0].1).collect()
}

/// One transposition round on a strip: a greedy left-to-right matching of
/// adjacent out-of-order letter pairs.  Returns `(class, rung)` pairs, where
/// chosen rungs whose quadrilaterals share a rung get different classes.
fn realign_round(word: &[bool], path: &[(usize, usize)], target: &[bool]) -> Vec<(usize, (usize, usize))> {
    let positions = |w: &[bool], kind: bool| -> Vec<usize> {
        w.iter().enumerate().filter(|(_, &b)| b == kind).map(|(i, _)| i).collect()
    };
    let (ta, tb) = (positions(target, false), positions(target, true));
    let (mut na, mut nb) = (0, 0);
    let dest: Vec<usize> = word
        .iter()
        .map(|&b| {
            if b {
                nb += 1;
                tb[nb - 1]
            } else {
                na += 1;
                ta[na - 1]
            }
        })
        .collect();
    let mut out: Vec<(usize, (usize, usize))> = Vec::new();
    let mut last: Option<(usize, usize)> = None;
    let mut t = 0;
    while t + 1 < word.len() {
        if word[t] != word[t + 1] && dest[t] > dest[t + 1] {
            let class = match last {
                Some((pt, c)) if pt + 2 == t => 1 - c,
                _ => 0,
            };
            out.push((class, path[t + 1]));
            last = Some((t, class));
            t += 2;
        } else {
            t += 1;
        }
    }
    out
}

/// Moves a puncture by `k` lattice steps in direction `dir` with a
/// constant number of local layers: insertions behind the puncture on the
/// `2k - 1` lines around it (tapering by one per line), realignment of the
/// strips between those lines, one connectivity-preserving permutation onto
/// the layout with insertions ahead of the puncture, and removal of those
/// insertions.  The point `k` steps behind the puncture keeps its place, so
/// its distance to the puncture doubles.
pub fn shear_step(lattice: &SurfaceLattice, anyon: VertexId, dir: Direction, k: usize) -> Result<GadgetOutcome> {
    require_puncture(lattice, anyon)?;
    if k == 0 {
        return Err(TvqError::InvalidArgument("shear distance must be positive".into()));
    }
    let (ax, ay) = integer_position(lattice, anyon)?;
    let (p0, a0) = dir.coords((ax as f64, ay as f64));
    let ki = k as i64;
    let lines: Vec<(f64, f64)> = (-(ki - 1)..=ki - 1).map(|j| (p0 + j as f64, (ki - j.abs()) as f64)).collect();
    for &q in lattice.punctures() {
        if q == anyon {
            continue;
        }
        let (pq, aq) = dir.coords(lattice.position(q));
        for &(perp, _) in &lines {
            if (pq - perp).abs() < COORD_EPS && aq > a0 - ki as f64 + COORD_EPS && aq < a0 + 2.0 * ki as f64 - COORD_EPS
            {
                return Err(TvqError::MoveRejected(format!("puncture {q} blocks the shear corridor")));
            }
        }
    }
    // Behind the puncture every line is refined from the anchor point `k`
    // steps back; ahead of it every line is refined up to `2k` steps forward.
    // Line `j` thus shifts by `k - |j|` and adjacent lines differ by one step.
    let kf = k as f64;
    let behind: Vec<(f64, f64)> =
        lines.iter().flat_map(|&(perp, kj)| (0..kj as i64).map(move |i| (perp, a0 - kf + i as f64))).collect();
    let ahead: Vec<(f64, f64)> = lines
        .iter()
        .flat_map(|&(perp, kj)| (0..kj as i64).map(move |i| (perp, a0 + 2.0 * kf - kj + i as f64)))
        .collect();

    // Target layout: insertions ahead of the puncture.
    let mut target = lattice.clone();
    let (_, _, ahead_ins) = insert_on_lines(&mut target, dir, &ahead)?;

    let mut schedule = MoveSchedule::new(lattice);
    let mut l = lattice.clone();
    let (splits, flips, _) = insert_on_lines(&mut l, dir, &behind)?;
    schedule.push_layers(format!("shear {dir:?}: insert behind"), vec![splits, flips]);

    // Vertex correspondence: order-preserving along every affected line.
    let mut vmap: BTreeMap<VertexId, VertexId> = l.vertices().map(|v| (v.id, v.id)).collect();
    for &(perp, _) in &lines {
        let (src, dst) = (line_vertices(&l, dir, perp), line_vertices(&target, dir, perp));
        if src.len() != dst.len() {
            return Err(TvqError::VerificationFailed(format!("line {perp} has mismatched vertex counts")));
        }
        vmap.extend(src.into_iter().zip(dst));
    }

    // Realign every strip touching an affected line to the pulled-back target.
    let strips: Vec<f64> = (-ki..ki).map(|j| p0 + j as f64).collect();
    let target_words: Vec<Vec<bool>> = strips
        .iter()
        .map(|&perp| {
            let lo = line_vertices(&target, dir, perp);
            let hi = line_vertices(&target, dir, perp + 1.0);
            strip_path(&target, &lo, &hi).map(|p| path_word(&p))
        })
        .collect::<Result<_>>()?;
    // Odd-even transposition rounds.  Within a round the flipped rungs bound
    // distinct quadrilaterals; rungs two pairs apart in one strip, or in
    // strips two apart, have disjoint supports, so every round splits into at
    // most four layers by (pair parity, strip parity).
    let mut realign: Vec<Vec<MoveRecord>> = Vec::new();
    let mut round = 0;
    loop {
        let mut classes: [Vec<EdgeId>; 4] = Default::default();
        let mut aligned = true;
        for (si, (&perp, tw)) in strips.iter().zip(&target_words).enumerate() {
            let lo = line_vertices(&l, dir, perp);
            let hi = line_vertices(&l, dir, perp + 1.0);
            let path = strip_path(&l, &lo, &hi)?;
            let word = path_word(&path);
            if word.len() != tw.len() || word.iter().filter(|b| **b).count() != tw.iter().filter(|b| **b).count() {
                return Err(TvqError::VerificationFailed(format!("strip {perp} cannot be realigned")));
            }
            if word != *tw {
                aligned = false;
                for (c, (i, m)) in realign_round(&word, &path, tw) {
                    classes[c + 2 * (si % 2)].push(edge_between(&l, lo[i], hi[m])?);
                }
            }
        }
        if aligned {
            break;
        }
        round += 1;
        if round > MAX_REALIGN_ROUNDS {
            return Err(TvqError::VerificationFailed("strip realignment did not converge".into()));
        }
        for class in classes {
            realign.push(class.into_iter().map(|e| l.flip_in_place(e)).collect::<Result<Vec<_>>>()?);
        }
    }
    schedule.push_layers(format!("shear {dir:?}: realign strips"), realign);

    let sigma = cpi_from_vertex_map(&l, &target, &vmap)?;
    let (mut l, rec) = apply_cpi(&l, &sigma, &target)?;
    schedule.push_permutation(format!("shear {dir:?}: permutation"), rec);

    let unflip = ahead_ins.iter().map(|ins| l.flip_in_place(ins.edge)).collect::<Result<Vec<_>>>()?;
    let merge = ahead_ins.iter().map(|ins| l.merge_vertex_in_place(ins.vertex)).collect::<Result<Vec<_>>>()?;
    schedule.push_layers(format!("shear {dir:?}: remove ahead"), vec![unflip, merge]);
    Ok(GadgetOutcome { schedule, lattice: l })
}

// ----------------------------------------------------------------------
// Braid
// ----------------------------------------------------------------------

/// Square patch prepared for a braid at code distance `d`: puncture `center`
/// in the middle and puncture `moving` `d / 2` steps along `+e1`, with room
/// for every shear corridor of the hexagon.
#[derive(Clone, Debug)]
pub struct BraidSetup {
    pub distance: usize,
    pub lattice: SurfaceLattice,
    pub moving: VertexId,
    pub center: VertexId,
}

/// Builds the braid patch for an even distance `d ≥ 2`.  The patch has
/// `3d + 5` vertices per side.
pub fn braid_setup(d: usize) -> Result<BraidSetup> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(TvqError::InvalidArgument(format!("braid distance must be even and at least 2, got {d}")));
    }
    let k = d / 2;
    let n = 6 * k + 5;
    let c = n / 2;
    let lattice = SurfaceLattice::planar_patch(n, n, &[(c, c), (c, c + k)])?;
    let center = vertex_at(&lattice, (c as f64, c as f64))?;
    let moving = vertex_at(&lattice, ((c + k) as f64, c as f64))?;
    Ok(BraidSetup { distance: d, lattice, moving, center })
}

/// Hexagon radius of a braid: `moving` must sit `k ≥ 1` steps along `+e1`
/// from `center`.
pub fn braid_radius(lattice: &SurfaceLattice, moving: VertexId, center: VertexId) -> Result<usize> {
    let (mx, my) = integer_position(lattice, moving)?;
    let (cx, cy) = integer_position(lattice, center)?;
    if my != cy || mx <= cx {
        return Err(TvqError::InvalidArgument(format!(
            "puncture {moving} must lie on the +e1 ray from puncture {center}"
        )));
    }
    Ok((mx - cx) as usize)
}

/// Braids puncture `moving` once around puncture `center` along the
/// hexagon of radius `k` (their distance), as six shear steps.
pub fn braid(lattice: &SurfaceLattice, moving: VertexId, center: VertexId) -> Result<GadgetOutcome> {
    require_puncture(lattice, moving)?;
    require_puncture(lattice, center)?;
    let k = braid_radius(lattice, moving, center)?;
    let mut schedule = MoveSchedule::new(lattice);
    let mut l = lattice.clone();
    let mut pos = integer_position(lattice, moving)?;
    let mut current = moving;
    for dir in HEXAGON {
        let step = shear_step(&l, current, dir, k)?;
        schedule.extend(step.schedule);
        l = step.lattice;
        let (dx, dy) = dir.vector();
        pos = (pos.0 + dx * k as i64, pos.1 + dy * k as i64);
        current = vertex_at(&l, (pos.0 as f64, pos.1 as f64))?;
        if !l.is_puncture(current) {
            return Err(TvqError::VerificationFailed(format!("puncture did not arrive at {pos:?}")));
        }
    }
    Ok(GadgetOutcome { schedule, lattice: l })
}

/// Unit-hop vertex path of the braid hexagon, from `moving` back to itself.
pub fn hexagon_path(lattice: &SurfaceLattice, moving: VertexId, center: VertexId) -> Result<Vec<VertexId>> {
    let k = braid_radius(lattice, moving, center)?;
    let mut pos = integer_position(lattice, moving)?;
    let mut path = vec![moving];
    for dir in HEXAGON {
        let (dx, dy) = dir.vector();
        for _ in 0..k {
            pos = (pos.0 + dx, pos.1 + dy);
            path.push(vertex_at(lattice, (pos.0 as f64, pos.1 as f64))?);
        }
    }
    Ok(path)
}

// ----------------------------------------------------------------------
// Sequential baseline
// ----------------------------------------------------------------------

type Tri = [VertexId; 3];
type Offset = (i64, i64);

fn normalize(t: Tri) -> Tri {
    let k = (0..3).min_by_key(|&i| t[i]).expect("3 vertices");
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

fn undirected(a: VertexId, b: VertexId) -> (VertexId, VertexId) {
    (a.min(b), a.max(b))
}

/// Local triangulation of the union of two adjacent stars.
struct HopRegion {
    triangles: BTreeSet<Tri>,
    /// Polygon edges (never flipped).
    rim: BTreeSet<(VertexId, VertexId)>,
    /// Degree contributed by edges outside the region interior.
    outside_degree: BTreeMap<VertexId, usize>,
    /// Vertex pairs already joined outside the region interior.
    outside_adjacent: BTreeSet<(VertexId, VertexId)>,
    offsets: BTreeMap<VertexId, Offset>,
}

impl HopRegion {
    fn new(l: &SurfaceLattice, p: VertexId, q: VertexId) -> Result<Self> {
        let origin = integer_position(l, p)?;
        let mut triangles = BTreeSet::new();
        let mut verts = BTreeSet::new();
        for t in l.triangles() {
            if t.verts.contains(&p) || t.verts.contains(&q) {
                triangles.insert(normalize(t.verts));
                verts.extend(t.verts);
            }
        }
        let mut interior = BTreeSet::new();
        let mut rim = BTreeSet::new();
        for t in &triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                if [a, b].iter().any(|v| *v == p || *v == q) {
                    interior.insert(undirected(a, b));
                } else {
                    rim.insert(undirected(a, b));
                }
            }
        }
        let mut outside_degree = BTreeMap::new();
        let mut outside_adjacent = BTreeSet::new();
        let mut offsets = BTreeMap::new();
        for &v in &verts {
            let inside = interior.iter().filter(|(a, b)| *a == v || *b == v).count();
            outside_degree.insert(v, l.degree(v) - inside);
            let (x, y) = integer_position(l, v)?;
            offsets.insert(v, (x - origin.0, y - origin.1));
        }
        for e in l.edges() {
            let pair = undirected(e.v1, e.v2);
            if verts.contains(&e.v1) && verts.contains(&e.v2) && !interior.contains(&pair) {
                outside_adjacent.insert(pair);
            }
        }
        Ok(HopRegion { triangles, rim, outside_degree, outside_adjacent, offsets })
    }

    /// Translation-invariant description used as a cache key.
    fn signature(&self) -> Vec<i64> {
        let mut sig = Vec::new();
        for t in &self.triangles {
            for v in t {
                let (x, y) = self.offsets[v];
                sig.extend([x, y]);
            }
        }
        for (v, d) in &self.outside_degree {
            let (x, y) = self.offsets[v];
            sig.extend([x, y, *d as i64]);
        }
        for (a, b) in &self.outside_adjacent {
            let ((xa, ya), (xb, yb)) = (self.offsets[a], self.offsets[b]);
            sig.extend([xa, ya, xb, yb]);
        }
        sig
    }

    /// Flips available in a local triangulation, in canonical order.
    fn flips(&self, tris: &BTreeSet<Tri>) -> Vec<((VertexId, VertexId), BTreeSet<Tri>)> {
        let mut directed: BTreeMap<(VertexId, VertexId), VertexId> = BTreeMap::new();
        let mut degree = self.outside_degree.clone();
        let mut edges = BTreeSet::new();
        for t in tris {
            for i in 0..3 {
                directed.insert((t[i], t[(i + 1) % 3]), t[(i + 2) % 3]);
                let e = undirected(t[i], t[(i + 1) % 3]);
                if !self.rim.contains(&e) && edges.insert(e) {
                    *degree.get_mut(&e.0).expect("region vertex") += 1;
                    *degree.get_mut(&e.1).expect("region vertex") += 1;
                }
            }
        }
        let mut candidates: Vec<_> = edges.iter().copied().collect();
        candidates.sort_by_key(|&(a, b)| {
            let (oa, ob) = (self.offsets[&a], self.offsets[&b]);
            (oa.min(ob), oa.max(ob))
        });
        let mut out = Vec::new();
        for (u, v) in candidates {
            let (Some(&x), Some(&y)) = (directed.get(&(u, v)), directed.get(&(v, u))) else {
                continue;
            };
            let new = undirected(x, y);
            if x == y || edges.contains(&new) || self.outside_adjacent.contains(&new) {
                continue;
            }
            if degree[&u] < 4 || degree[&v] < 4 {
                continue;
            }
            let mut next = tris.clone();
            next.remove(&normalize([u, v, x]));
            next.remove(&normalize([v, u, y]));
            next.insert(normalize([y, v, x]));
            next.insert(normalize([y, x, u]));
            out.push(((u, v), next));
        }
        out
    }

    /// Shortest flip sequence turning the region into its image under the
    /// exchange of `p` and `q`, as pairs of endpoint offsets.
    fn exchange_flips(&self, p: VertexId, q: VertexId) -> Result<Vec<(Offset, Offset)>> {
        let swap = |v: VertexId| {
            if v == p {
                q
            } else if v == q {
                p
            } else {
                v
            }
        };
        let goal: BTreeSet<Tri> = self.triangles.iter().map(|t| normalize(t.map(swap))).collect();
        let mut parent: HashMap<BTreeSet<Tri>, Option<(BTreeSet<Tri>, (VertexId, VertexId))>> = HashMap::new();
        parent.insert(self.triangles.clone(), None);
        let mut queue = VecDeque::from([self.triangles.clone()]);
        while let Some(cur) = queue.pop_front() {
            if cur == goal {
                let mut seq = Vec::new();
                let mut node = cur;
                while let Some(Some((prev, (u, v)))) = parent.get(&node).cloned() {
                    seq.push((self.offsets[&u], self.offsets[&v]));
                    node = prev;
                }
                seq.reverse();
                return Ok(seq);
            }
            for (edge, next) in self.flips(&cur) {
                if !parent.contains_key(&next) {
                    parent.insert(next.clone(), Some((cur.clone(), edge)));
                    queue.push_back(next);
                }
            }
            if parent.len() > MAX_HOP_STATES {
                break;
            }
        }
        Err(TvqError::VerificationFailed("no local flip sequence exchanges the hop endpoints".into()))
    }
}

/// Moves a puncture along a path of adjacent vertices one hop at a time:
/// for every hop a shortest flip sequence exchanging the two endpoints
/// within their joint star (cached per local configuration), followed by
/// the transposition permutation of the two vertices.
pub fn sequential_baseline(lattice: &SurfaceLattice, anyon: VertexId, path: &[VertexId]) -> Result<GadgetOutcome> {
    require_puncture(lattice, anyon)?;
    if path.first() != Some(&anyon) {
        return Err(TvqError::InvalidArgument("path must start at the moving puncture".into()));
    }
    let mut cache: HashMap<Vec<i64>, Vec<(Offset, Offset)>> = HashMap::new();
    let mut schedule = MoveSchedule::new(lattice);
    let mut l = lattice.clone();
    for (h, w) in path.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        edge_between(&l, p, q)?;
        if l.is_puncture(q) {
            return Err(TvqError::MoveRejected(format!("hop {h} enters puncture {q}")));
        }
        if !l.is_interior_vertex(q) {
            return Err(TvqError::MoveRejected(format!("hop {h} reaches the boundary vertex {q}")));
        }
        let region = HopRegion::new(&l, p, q)?;
        let sig = region.signature();
        let seq = match cache.get(&sig) {
            Some(s) => s.clone(),
            None => {
                let s = region.exchange_flips(p, q)?;
                cache.insert(sig, s.clone());
                s
            }
        };
        let origin = integer_position(&l, p)?;
        let before = l.clone();
        let mut flips = Vec::new();
        for ((ux, uy), (vx, vy)) in seq {
            let u = vertex_at(&l, ((origin.0 + ux) as f64, (origin.1 + uy) as f64))?;
            let v = vertex_at(&l, ((origin.0 + vx) as f64, (origin.1 + vy) as f64))?;
            let e = edge_between(&l, u, v)?;
            flips.push(l.flip_in_place(e)?);
        }
        schedule.push_local(format!("hop {h}: flips"), flips);
        let vmap: BTreeMap<VertexId, VertexId> = l
            .vertices()
            .map(|v| {
                (
                    v.id,
                    if v.id == p {
                        q
                    } else if v.id == q {
                        p
                    } else {
                        v.id
                    },
                )
            })
            .collect();
        let sigma = cpi_from_vertex_map(&l, &before, &vmap)?;
        let (next, rec) = apply_cpi(&l, &sigma, &before)?;
        schedule.push_permutation(format!("hop {h}: exchange"), rec);
        l = next;
    }
    Ok(GadgetOutcome { schedule, lattice: l })
}

// ----------------------------------------------------------------------
// Logical action
// ----------------------------------------------------------------------

/// Dense complex matrix, row-major.
pub type Matrix<T> = Vec<Vec<Complex<T>>>;

/// Matrix of a schedule on the span of an orthonormal basis:
/// `U[i][j] = ⟨b_i| S |b_j⟩`.  The schedule must return to a lattice with
/// the input structure; the result is checked to be unitary.
pub fn logical_action<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    basis: &[StringNetState<T>],
    schedule: &MoveSchedule,
) -> Result<Matrix<T>> {
    transfer_matrix(fusion, lattice, basis, schedule, lattice, basis)
}

/// Matrix of a schedule between two code spaces:
/// `M[i][j] = ⟨c_i| S |b_j⟩` with `b` an orthonormal basis on `lattice` and
/// `c` one on `out_lattice`, which must have the structure the schedule
/// produces.  The result is checked to be unitary.
pub fn transfer_matrix<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    basis: &[StringNetState<T>],
    schedule: &MoveSchedule,
    out_lattice: &SurfaceLattice,
    out_basis: &[StringNetState<T>],
) -> Result<Matrix<T>> {
    if basis.is_empty() || basis.len() > MAX_LOGICAL_DIM {
        return Err(TvqError::SizeGuard { what: "code-space dimension", actual: basis.len(), limit: MAX_LOGICAL_DIM });
    }
    if out_basis.len() != basis.len() {
        return Err(TvqError::InvalidArgument(format!(
            "input and output code spaces differ in dimension ({} vs {})",
            basis.len(),
            out_basis.len()
        )));
    }
    let mut images = Vec::with_capacity(basis.len());
    for b in basis {
        let (s, out) = schedule.replay_state(fusion, lattice, b, |_, _, _| Ok(()))?;
        images.push(s.transport_to(&out, out_lattice)?);
    }
    let n = basis.len();
    let mut u = vec![vec![Complex::zero(); n]; n];
    for (i, ci) in out_basis.iter().enumerate() {
        for (j, img) in images.iter().enumerate() {
            u[i][j] = inner(ci, img)?;
        }
    }
    let dev = unitarity_defect(&u);
    if dev > UNITARITY_TOL {
        return Err(TvqError::VerificationFailed(format!("logical action is not unitary (defect {dev:.3e})")));
    }
    Ok(u)
}

/// Largest entry of `U†U − 1`.
pub fn unitarity_defect<T: Scalar>(u: &Matrix<T>) -> f64 {
    let n = u.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex::<T>::zero();
            for row in u {
                s += row[i].conj() * row[j];
            }
            if i == j {
                s -= Complex::one();
            }
            worst = worst.max(s.norm().to_f64().unwrap_or(f64::INFINITY));
        }
    }
    worst
}

/// Largest entrywise deviation between `a` and `b` after removing the best
/// global phase (fixed by the largest entry of `b`).
pub fn phase_distance<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return f64::INFINITY;
    }
    let mut best = (Complex::<T>::zero(), Complex::<T>::zero());
    for (ra, rb) in a.iter().zip(b) {
        for (&x, &y) in ra.iter().zip(rb) {
            if y.norm() > best.1.norm() {
                best = (x, y);
            }
        }
    }
    let phase = if best.1.norm() > T::zero() && best.0.norm() > T::zero() {
        let r = best.0 / best.1;
        r / Complex::new(r.norm(), T::zero())
    } else {
        Complex::one()
    };
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(move |(&x, &y)| (x - y * phase).norm()))
        .map(|d| d.to_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}
