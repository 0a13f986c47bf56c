//! Triangulated surfaces, their dual trivalent graphs, and the combinatorial
//! rewrites used by the code: 2-2 and 1-3/3-1 Pachner moves, local swaps and
//! connectivity-preserving qubit permutations.
//!
//! The primal triangulation is stored explicitly.  Its dual is implicit: dual
//! vertices are triangles (each trivalent by construction), dual edges cross
//! primal edges, and the plaquette of a primal vertex is the dual face around
//! it.  Qubits live on primal edges; an edge without a qubit slot lies on the
//! outer boundary of a planar patch and carries the vacuum label permanently.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvqError};

/// Stable vertex identifier (never reused within a lattice history).
pub type VertexId = u32;
/// Stable edge identifier.
pub type EdgeId = u32;
/// Stable triangle identifier.
pub type TriangleId = u32;
/// Qubit slot identifier.
pub type Slot = usize;

/// Surface class of a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Sphere,
    Torus,
    Disk,
}

impl Topology {
    /// Euler characteristic `V − E + F` of the triangulated surface.
    pub fn euler_characteristic(self) -> i64 {
        match self {
            Topology::Sphere => 2,
            Topology::Torus => 0,
            Topology::Disk => 1,
        }
    }
}

/// A triangulation vertex with its layout position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub x: f64,
    pub y: f64,
}

/// A triangulation edge; `qubit` is `None` for frozen boundary edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub v1: VertexId,
    pub v2: VertexId,
    pub qubit: Option<Slot>,
}

impl Edge {
    /// The endpoint different from `v` (or `v` itself for a self-loop).
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.v1 == v {
            self.v2
        } else {
            self.v1
        }
    }

    /// Whether the edge joins `a` and `b` (in either order).
    pub fn joins(&self, a: VertexId, b: VertexId) -> bool {
        (self.v1 == a && self.v2 == b) || (self.v1 == b && self.v2 == a)
    }
}

/// A counter-clockwise triangle; `edges[i]` joins `verts[i]` and `verts[i+1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub id: TriangleId,
    pub verts: [VertexId; 3],
    pub edges: [EdgeId; 3],
}

/// One wedge of the closed star of a vertex `v`: the triangle `(v, q, r)`
/// with spokes `v–q` (`spoke_in`), `r–v` (`spoke_out`) and link edge `q–r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wedge {
    pub triangle: TriangleId,
    pub spoke_in: EdgeId,
    pub link: EdgeId,
    pub spoke_out: EdgeId,
}

/// A plaquette of the dual graph: boundary dual edges cross `spokes`, the
/// external legs cross `legs`.  `legs[i]` sits between `spokes[i]` and
/// `spokes[i+1]` in counter-clockwise order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaquette {
    pub vertex: VertexId,
    pub spokes: Vec<EdgeId>,
    pub legs: Vec<EdgeId>,
}

/// A triangulated surface together with qubit placement and punctures.
#[derive(Clone, Debug)]
pub struct SurfaceLattice {
    topology: Topology,
    vertices: BTreeMap<VertexId, Vertex>,
    edges: BTreeMap<EdgeId, Edge>,
    triangles: BTreeMap<TriangleId, Triangle>,
    punctures: BTreeSet<VertexId>,
    version: u64,
    next_vertex: VertexId,
    next_edge: EdgeId,
    next_triangle: TriangleId,
}

/// A map between qubit slots.
pub type SlotMap = BTreeMap<Slot, Slot>;

/// Record of one applied rewrite; enough to replay it and to lower it to
/// gates without the lattice at hand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MoveRecord {
    /// 2-2 move: `edge` switched from `old_ends` to `new_ends`.  The legs are
    /// listed counter-clockwise around the quadrilateral starting at the edge
    /// leaving the first old endpoint, so that the F-symbol reads
    /// `[F^{l0 l1 l2}_{l3}]_{e f}`.
    FMove {
        edge: EdgeId,
        slot: Option<Slot>,
        legs: [EdgeId; 4],
        leg_slots: [Option<Slot>; 4],
        old_ends: [VertexId; 2],
        new_ends: [VertexId; 2],
    },
    /// 1-3 move splitting `triangle` with new vertex `vertex`.
    /// `outer = [A, B, C]` are the sides opposite the corners `P, Q, R`
    /// (`A = QR`, `B = RP`, `C = PQ`); `new_edges = [MP, MQ, MR]`.
    Pachner13 {
        triangle: TriangleId,
        vertex: VertexId,
        corners: [VertexId; 3],
        outer: [EdgeId; 3],
        outer_slots: [Option<Slot>; 3],
        new_edges: [EdgeId; 3],
        new_slots: [Slot; 3],
        new_triangles: [TriangleId; 3],
        /// Layout position of the inserted (or removed) vertex.
        position: [f64; 2],
    },
    /// 3-1 move removing `vertex`; same field meaning as the 1-3 record it
    /// inverts (`new_edges` are the removed spokes, `new_slots` the released
    /// qubits, `triangle` the surviving triangle id).
    Pachner31 {
        triangle: TriangleId,
        vertex: VertexId,
        corners: [VertexId; 3],
        outer: [EdgeId; 3],
        outer_slots: [Option<Slot>; 3],
        new_edges: [EdgeId; 3],
        new_slots: [Slot; 3],
        new_triangles: [TriangleId; 3],
        /// Layout position of the inserted (or removed) vertex.
        position: [f64; 2],
    },
    /// Exchange of two qubits between two edges.
    LocalSwap { edges: [EdgeId; 2], slots: [Slot; 2] },
    /// Connectivity-preserving isomorphism onto a target layout.
    Permutation {
        slot_map: SlotMap,
        vertex_map: BTreeMap<VertexId, VertexId>,
        range: f64,
        #[serde(skip)]
        target: Option<Arc<SurfaceLattice>>,
    },
}

impl MoveRecord {
    /// Short kind name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            MoveRecord::FMove { .. } => "F_MOVE",
            MoveRecord::Pachner13 { .. } => "PACHNER_13",
            MoveRecord::Pachner31 { .. } => "PACHNER_31",
            MoveRecord::LocalSwap { .. } => "LOCAL_SWAP",
            MoveRecord::Permutation { .. } => "PERMUTATION",
        }
    }

    /// Edges read or written by the move (controls included).
    pub fn support_edges(&self) -> Vec<EdgeId> {
        match self {
            MoveRecord::FMove { edge, legs, .. } => {
                let mut v = vec![*edge];
                v.extend_from_slice(legs);
                v
            }
            MoveRecord::Pachner13 { outer, new_edges, .. } | MoveRecord::Pachner31 { outer, new_edges, .. } => {
                let mut v = outer.to_vec();
                v.extend_from_slice(new_edges);
                v
            }
            MoveRecord::LocalSwap { edges, .. } => edges.to_vec(),
            MoveRecord::Permutation { .. } => vec![],
        }
    }

    /// Qubit slots read or written by the move (controls included).
    pub fn support_slots(&self) -> Vec<Slot> {
        match self {
            MoveRecord::FMove { slot, leg_slots, .. } => {
                slot.iter().chain(leg_slots.iter().flatten()).copied().collect()
            }
            MoveRecord::Pachner13 { outer_slots, new_slots, .. }
            | MoveRecord::Pachner31 { outer_slots, new_slots, .. } => {
                outer_slots.iter().flatten().chain(new_slots.iter()).copied().collect()
            }
            MoveRecord::LocalSwap { slots, .. } => slots.to_vec(),
            MoveRecord::Permutation { slot_map, .. } => slot_map.keys().copied().collect(),
        }
    }
}

/// A structure-preserving correspondence between two lattices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Isomorphism {
    pub vertex_map: BTreeMap<VertexId, VertexId>,
    pub edge_map: BTreeMap<EdgeId, EdgeId>,
}

impl Isomorphism {
    /// True iff both maps are identities.
    pub fn is_identity(&self) -> bool {
        self.vertex_map.iter().all(|(a, b)| a == b) && self.edge_map.iter().all(|(a, b)| a == b)
    }
}

const POS_EPS: f64 = 1e-9;

impl SurfaceLattice {
    fn empty(topology: Topology) -> Self {
        SurfaceLattice {
            topology,
            vertices: BTreeMap::new(),
            edges: BTreeMap::new(),
            triangles: BTreeMap::new(),
            punctures: BTreeSet::new(),
            version: 0,
            next_vertex: 0,
            next_edge: 0,
            next_triangle: 0,
        }
    }

    fn add_vertex(&mut self, x: f64, y: f64) -> VertexId {
        let id = self.next_vertex;
        self.next_vertex += 1;
        self.vertices.insert(id, Vertex { id, x, y });
        id
    }

    fn add_edge(&mut self, v1: VertexId, v2: VertexId, qubit: Option<Slot>) -> EdgeId {
        let id = self.next_edge;
        self.next_edge += 1;
        self.edges.insert(id, Edge { id, v1, v2, qubit });
        id
    }

    fn add_triangle(&mut self, verts: [VertexId; 3], edges: [EdgeId; 3]) -> TriangleId {
        let id = self.next_triangle;
        self.next_triangle += 1;
        self.triangles.insert(id, Triangle { id, verts, edges });
        id
    }

    /// Assigns qubit slots `0, 1, …` to all non-frozen edges in id order.
    fn assign_slots(&mut self, frozen: &BTreeSet<EdgeId>) {
        let mut next = 0;
        for (id, e) in self.edges.iter_mut() {
            if frozen.contains(id) {
                e.qubit = None;
            } else {
                e.qubit = Some(next);
                next += 1;
            }
        }
    }

    // ------------------------------------------------------------------
    // Accessors
    // ------------------------------------------------------------------

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn triangles(&self) -> impl Iterator<Item = &Triangle> {
        self.triangles.values()
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.vertices.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn triangle(&self, id: TriangleId) -> Option<&Triangle> {
        self.triangles.get(&id)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of trivalent dual vertices (one per triangle).
    pub fn num_dual_vertices(&self) -> usize {
        self.triangles.len()
    }

    pub fn punctures(&self) -> &BTreeSet<VertexId> {
        &self.punctures
    }

    pub fn is_puncture(&self, v: VertexId) -> bool {
        self.punctures.contains(&v)
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// All qubit slots in use, ascending.
    pub fn qubit_slots(&self) -> Vec<Slot> {
        let mut v: Vec<Slot> = self.edges.values().filter_map(|e| e.qubit).collect();
        v.sort_unstable();
        v
    }

    /// Number of qubit-carrying edges.
    pub fn num_qubits(&self) -> usize {
        self.edges.values().filter(|e| e.qubit.is_some()).count()
    }

    /// Largest slot id in use plus one (0 if none).
    pub fn slot_bound(&self) -> usize {
        self.edges.values().filter_map(|e| e.qubit).max().map_or(0, |s| s + 1)
    }

    /// Edge carrying a given slot.
    pub fn edge_of_slot(&self, slot: Slot) -> Option<EdgeId> {
        self.edges.values().find(|e| e.qubit == Some(slot)).map(|e| e.id)
    }

    /// Map from slot to edge.
    pub fn slot_index(&self) -> BTreeMap<Slot, EdgeId> {
        self.edges.values().filter_map(|e| e.qubit.map(|s| (s, e.id))).collect()
    }

    /// Position of a vertex.
    pub fn position(&self, v: VertexId) -> (f64, f64) {
        let p = &self.vertices[&v];
        (p.x, p.y)
    }

    /// Midpoint of an edge.
    pub fn midpoint(&self, e: EdgeId) -> (f64, f64) {
        let e = &self.edges[&e];
        let (a, b) = (self.position(e.v1), self.position(e.v2));
        ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
    }

    /// Vertex located at a layout position, if any.
    pub fn vertex_at(&self, x: f64, y: f64) -> Option<VertexId> {
        self.vertices.values().find(|v| (v.x - x).abs() < POS_EPS && (v.y - y).abs() < POS_EPS).map(|v| v.id)
    }

    /// Edges incident to a vertex, ascending by id.
    pub fn incident_edges(&self, v: VertexId) -> Vec<EdgeId> {
        self.edges.values().filter(|e| e.v1 == v || e.v2 == v).map(|e| e.id).collect()
    }

    /// Number of incident edges.
    pub fn degree(&self, v: VertexId) -> usize {
        self.incident_edges(v).len()
    }

    /// First edge (lowest id) joining two vertices.
    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        self.edges.values().find(|e| e.joins(a, b)).map(|e| e.id)
    }

    /// Triangles containing an edge, ascending by id.
    pub fn triangles_of_edge(&self, e: EdgeId) -> Vec<TriangleId> {
        self.triangles.values().filter(|t| t.edges.contains(&e)).map(|t| t.id).collect()
    }

    /// Edge → incident triangles for the whole lattice.
    pub fn edge_triangle_index(&self) -> BTreeMap<EdgeId, Vec<TriangleId>> {
        let mut idx: BTreeMap<EdgeId, Vec<TriangleId>> = self.edges.keys().map(|&e| (e, Vec::new())).collect();
        for t in self.triangles.values() {
            for e in t.edges {
                idx.entry(e).or_default().push(t.id);
            }
        }
        idx
    }

    /// Whether an edge lies on the surface boundary (one incident triangle).
    pub fn is_boundary_edge(&self, e: EdgeId) -> bool {
        self.triangles_of_edge(e).len() < 2
    }

    /// The counter-clockwise closed star of `v`, or `None` if `v` lies on the
    /// boundary.
    pub fn star(&self, v: VertexId) -> Option<Vec<Wedge>> {
        let mut wedges = Vec::new();
        for t in self.triangles.values() {
            for i in 0..3 {
                if t.verts[i] == v {
                    wedges.push(Wedge {
                        triangle: t.id,
                        spoke_in: t.edges[i],
                        link: t.edges[(i + 1) % 3],
                        spoke_out: t.edges[(i + 2) % 3],
                    });
                }
            }
        }
        if wedges.is_empty() {
            return None;
        }
        let by_in: BTreeMap<EdgeId, usize> = wedges.iter().enumerate().map(|(i, w)| (w.spoke_in, i)).collect();
        if by_in.len() != wedges.len() {
            return None;
        }
        // Start from the lowest triangle id for a canonical rotation.
        let start = (0..wedges.len()).min_by_key(|&i| wedges[i].triangle)?;
        let mut chain = vec![wedges[start]];
        let mut cur = start;
        loop {
            let nxt = *by_in.get(&wedges[cur].spoke_out)?;
            if nxt == start {
                break;
            }
            if chain.len() > wedges.len() {
                return None;
            }
            chain.push(wedges[nxt]);
            cur = nxt;
        }
        if chain.len() != wedges.len() {
            return None;
        }
        Some(chain)
    }

    /// Whether the vertex has a closed star (interior vertex).
    pub fn is_interior_vertex(&self, v: VertexId) -> bool {
        self.star(v).is_some()
    }

    /// The plaquette around an interior vertex.
    pub fn plaquette(&self, v: VertexId) -> Option<Plaquette> {
        let star = self.star(v)?;
        Some(Plaquette {
            vertex: v,
            spokes: star.iter().map(|w| w.spoke_in).collect(),
            legs: star.iter().map(|w| w.link).collect(),
        })
    }

    /// All plaquettes (one per interior vertex), ascending by vertex id.
    pub fn plaquettes(&self) -> Vec<Plaquette> {
        self.vertices.keys().filter_map(|&v| self.plaquette(v)).collect()
    }

    /// Plaquettes whose flux is stabilized: interior, non-puncture vertices.
    pub fn stabilized_plaquettes(&self) -> Vec<Plaquette> {
        self.plaquettes().into_iter().filter(|p| !self.punctures.contains(&p.vertex)).collect()
    }

    // ------------------------------------------------------------------
    // Validation
    // ------------------------------------------------------------------

    /// Checks every structural invariant; returns a diagnostic on failure.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TvqError::InvalidArgument(m));
        for t in self.triangles.values() {
            for i in 0..3 {
                let Some(e) = self.edges.get(&t.edges[i]) else {
                    return bad(format!("triangle {} references missing edge {}", t.id, t.edges[i]));
                };
                if !e.joins(t.verts[i], t.verts[(i + 1) % 3]) {
                    return bad(format!("triangle {} side {} does not match its vertices", t.id, i));
                }
            }
            if t.verts[0] == t.verts[1] || t.verts[1] == t.verts[2] || t.verts[0] == t.verts[2] {
                return bad(format!("triangle {} is degenerate", t.id));
            }
        }
        let idx = self.edge_triangle_index();
        for (e, ts) in &idx {
            match ts.len() {
                2 => {}
                1 if self.topology == Topology::Disk => {
                    if self.edges[e].qubit.is_some() {
                        return bad(format!("boundary edge {e} carries a qubit"));
                    }
                }
                n => return bad(format!("edge {e} belongs to {n} triangles")),
            }
        }
        let mut seen = BTreeSet::new();
        for e in self.edges.values() {
            if let Some(s) = e.qubit {
                if !seen.insert(s) {
                    return bad(format!("slot {s} used twice"));
                }
            }
        }
        if self.euler_characteristic() != self.topology.euler_characteristic() {
            return bad(format!(
                "Euler characteristic {} does not match {:?}",
                self.euler_characteristic(),
                self.topology
            ));
        }
        for p in &self.punctures {
            if !self.vertices.contains_key(p) {
                return bad(format!("puncture {p} is not a vertex"));
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Builders
    // ------------------------------------------------------------------

    /// Smallest closed example: three vertices, three edges and two
    /// triangles on the sphere; its dual is the theta graph.
    pub fn theta_sphere() -> Self {
        let mut l = SurfaceLattice::empty(Topology::Sphere);
        let p = l.add_vertex(0.0, 0.0);
        let q = l.add_vertex(1.0, 0.0);
        let r = l.add_vertex(0.0, 1.0);
        let a = l.add_edge(q, r, None);
        let b = l.add_edge(r, p, None);
        let c = l.add_edge(p, q, None);
        l.add_triangle([p, q, r], [c, a, b]);
        l.add_triangle([p, r, q], [b, a, c]);
        l.assign_slots(&BTreeSet::new());
        l
    }

    /// Periodic triangular lattice with `lx·ly` vertices whose dual is the
    /// honeycomb: `2·lx·ly` trivalent vertices and `3·lx·ly` edges.
    pub fn honeycomb_torus(lx: usize, ly: usize) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(TvqError::InvalidArgument(format!("torus dimensions must be at least 2x2, got {lx}x{ly}")));
        }
        let mut l = SurfaceLattice::empty(Topology::Torus);
        let mut vid = BTreeMap::new();
        for y in 0..ly {
            for x in 0..lx {
                vid.insert((x, y), l.add_vertex(x as f64, y as f64));
            }
        }
        let (mut h, mut v, mut d) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
        for y in 0..ly {
            for x in 0..lx {
                let a = vid[&(x, y)];
                h.insert((x, y), l.add_edge(a, vid[&((x + 1) % lx, y)], None));
                v.insert((x, y), l.add_edge(a, vid[&(x, (y + 1) % ly)], None));
                d.insert((x, y), l.add_edge(a, vid[&((x + 1) % lx, (y + 1) % ly)], None));
            }
        }
        for y in 0..ly {
            for x in 0..lx {
                let (x1, y1) = ((x + 1) % lx, (y + 1) % ly);
                let (a, b, c, dd) = (vid[&(x, y)], vid[&(x1, y)], vid[&(x1, y1)], vid[&(x, y1)]);
                l.add_triangle([a, b, c], [h[&(x, y)], v[&(x1, y)], d[&(x, y)]]);
                l.add_triangle([a, c, dd], [d[&(x, y)], h[&(x, y1)], v[&(x, y)]]);
            }
        }
        l.assign_slots(&BTreeSet::new());
        Ok(l)
    }

    /// Triangulated disk on a `rows × cols` grid of vertices (position
    /// `(col, row)`), with squares split along the `(+1,+1)` diagonal.  Edges
    /// on the outer boundary are frozen.  `punctures` lists `(row, col)`
    /// vertices whose plaquettes are excluded from stabilization; they must
    /// be interior and pairwise non-adjacent.
    pub fn planar_patch(rows: usize, cols: usize, punctures: &[(usize, usize)]) -> Result<Self> {
        Self::planar_patch_with(rows, cols, punctures, false)
    }

    /// As [`SurfaceLattice::planar_patch`], optionally accepting adjacent
    /// punctures (needed when the anyons of a distance-2 braid start next to
    /// each other).
    pub fn planar_patch_with(
        rows: usize,
        cols: usize,
        punctures: &[(usize, usize)],
        allow_adjacent: bool,
    ) -> Result<Self> {
        if rows < 3 || cols < 3 {
            return Err(TvqError::InvalidArgument(format!(
                "planar patch needs at least 3x3 vertices, got {rows}x{cols}"
            )));
        }
        let mut l = SurfaceLattice::empty(Topology::Disk);
        let mut vid = BTreeMap::new();
        for r in 0..rows {
            for c in 0..cols {
                vid.insert((c, r), l.add_vertex(c as f64, r as f64));
            }
        }
        let mut frozen = BTreeSet::new();
        let (mut h, mut v, mut d) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
        for r in 0..rows {
            for c in 0..cols {
                let a = vid[&(c, r)];
                if c + 1 < cols {
                    let e = l.add_edge(a, vid[&(c + 1, r)], None);
                    if r == 0 || r == rows - 1 {
                        frozen.insert(e);
                    }
                    h.insert((c, r), e);
                }
                if r + 1 < rows {
                    let e = l.add_edge(a, vid[&(c, r + 1)], None);
                    if c == 0 || c == cols - 1 {
                        frozen.insert(e);
                    }
                    v.insert((c, r), e);
                }
                if c + 1 < cols && r + 1 < rows {
                    d.insert((c, r), l.add_edge(a, vid[&(c + 1, r + 1)], None));
                }
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols - 1 {
                let (a, b, cc, dd) = (vid[&(c, r)], vid[&(c + 1, r)], vid[&(c + 1, r + 1)], vid[&(c, r + 1)]);
                l.add_triangle([a, b, cc], [h[&(c, r)], v[&(c + 1, r)], d[&(c, r)]]);
                l.add_triangle([a, cc, dd], [d[&(c, r)], h[&(c, r + 1)], v[&(c, r)]]);
            }
        }
        l.assign_slots(&frozen);
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        for &(r, c) in punctures {
            if r == 0 || c == 0 || r + 1 >= rows || c + 1 >= cols {
                return Err(TvqError::InvalidArgument(format!(
                    "puncture ({r},{c}) is not strictly inside the {rows}x{cols} patch"
                )));
            }
            for &(r2, c2) in &chosen {
                let (dr, dc) = (r as i64 - r2 as i64, c as i64 - c2 as i64);
                if (dr, dc) == (0, 0) {
                    return Err(TvqError::InvalidArgument(format!("puncture ({r},{c}) listed twice")));
                }
                let adjacent = matches!((dr, dc), (0, 1) | (0, -1) | (1, 0) | (-1, 0) | (1, 1) | (-1, -1));
                if adjacent && !allow_adjacent {
                    return Err(TvqError::InvalidArgument(format!("punctures ({r},{c}) and ({r2},{c2}) are adjacent")));
                }
            }
            chosen.push((r, c));
            l.punctures.insert(vid[&(c, r)]);
        }
        Ok(l)
    }

    /// Returns a copy with a different puncture set.
    pub fn with_punctures(&self, punctures: impl IntoIterator<Item = VertexId>) -> Result<Self> {
        let mut l = self.clone();
        l.punctures = punctures.into_iter().collect();
        for p in &l.punctures {
            if !l.vertices.contains_key(p) {
                return Err(TvqError::InvalidArgument(format!("puncture {p} is not a vertex")));
            }
        }
        Ok(l)
    }

    // ------------------------------------------------------------------
    // Rewrites (in place; the public pure wrappers clone first)
    // ------------------------------------------------------------------

    fn lowest_free_slots(&self, n: usize) -> Vec<Slot> {
        let used: BTreeSet<Slot> = self.edges.values().filter_map(|e| e.qubit).collect();
        (0..).filter(|s| !used.contains(s)).take(n).collect()
    }

    /// Flips `edge` inside its quadrilateral.  Puncture plaquettes may sit at
    /// the corners of the quadrilateral: the local relation never encloses
    /// the puncture, so it stays valid on the punctured code space.  Rejects boundary edges,
    /// degenerate quadrilaterals and flips that would leave an endpoint with
    /// fewer than three incident edges.
    pub fn flip_in_place(&mut self, edge: EdgeId) -> Result<MoveRecord> {
        let Some(e) = self.edges.get(&edge).cloned() else {
            return Err(TvqError::MoveRejected(format!("edge {edge} does not exist")));
        };
        let ts = self.triangles_of_edge(edge);
        if ts.len() != 2 {
            return Err(TvqError::MoveRejected(format!("edge {edge} is a boundary edge")));
        }
        let t1 = self.triangles[&ts[0]].clone();
        let t2 = self.triangles[&ts[1]].clone();
        let i = t1.edges.iter().position(|&x| x == edge).expect("edge in triangle");
        let j = t2.edges.iter().position(|&x| x == edge).expect("edge in triangle");
        let (a, c, x) = (t1.verts[i], t1.verts[(i + 1) % 3], t1.verts[(i + 2) % 3]);
        let (ecx, exa) = (t1.edges[(i + 1) % 3], t1.edges[(i + 2) % 3]);
        if t2.verts[j] != c || t2.verts[(j + 1) % 3] != a {
            return Err(TvqError::MoveRejected(format!(
                "edge {edge} has inconsistent orientation in its two triangles"
            )));
        }
        let y = t2.verts[(j + 2) % 3];
        let (eay, eyc) = (t2.edges[(j + 1) % 3], t2.edges[(j + 2) % 3]);
        let quad = [a, y, c, x];
        let distinct_v: BTreeSet<_> = quad.iter().collect();
        let legs = [eay, eyc, ecx, exa];
        let distinct_e: BTreeSet<_> = legs.iter().collect();
        if distinct_v.len() != 4 || distinct_e.len() != 4 {
            return Err(TvqError::MoveRejected(format!("edge {edge} does not sit in a non-degenerate quadrilateral")));
        }
        // Interior vertices need three edges to stay a disk; boundary
        // vertices keep their two boundary edges and may drop to those.
        for end in [a, c] {
            let min = if self.is_interior_vertex(end) { 3 } else { 2 };
            if self.degree(end) <= min {
                return Err(TvqError::MoveRejected(format!(
                    "flipping edge {edge} would leave vertex {end} with fewer than {min} edges"
                )));
            }
        }
        let leg_slots = legs.map(|l| self.edges[&l].qubit);
        {
            let em = self.edges.get_mut(&edge).expect("edge exists");
            em.v1 = y;
            em.v2 = x;
        }
        self.triangles.insert(t1.id, Triangle { id: t1.id, verts: [y, c, x], edges: [eyc, ecx, edge] });
        self.triangles.insert(t2.id, Triangle { id: t2.id, verts: [y, x, a], edges: [edge, exa, eay] });
        self.version += 1;
        Ok(MoveRecord::FMove { edge, slot: e.qubit, legs, leg_slots, old_ends: [a, c], new_ends: [y, x] })
    }

    /// Splits a triangle with a new vertex at its centroid.
    pub fn split_triangle_in_place(&mut self, triangle: TriangleId) -> Result<MoveRecord> {
        self.split_triangle_impl(triangle, None, None)
    }

    /// Splits a triangle with a new vertex placed at a given layout position.
    pub fn split_triangle_at(&mut self, triangle: TriangleId, position: [f64; 2]) -> Result<MoveRecord> {
        self.split_triangle_impl(triangle, None, Some(position))
    }

    /// Allocation ids of a recorded 1-3 move: new vertex, new edges
    /// `[MP, MQ, MR]`, their slots, and the two new triangle ids.
    fn split_triangle_impl(
        &mut self,
        triangle: TriangleId,
        ids: Option<(VertexId, [EdgeId; 3], [Slot; 3], [TriangleId; 2])>,
        position: Option<[f64; 2]>,
    ) -> Result<MoveRecord> {
        let Some(t) = self.triangles.get(&triangle).cloned() else {
            return Err(TvqError::MoveRejected(format!("triangle {triangle} does not exist")));
        };
        let [p, q, r] = t.verts;
        let [c, a, b] = t.edges;
        let (px, py) = self.position(p);
        let (qx, qy) = self.position(q);
        let (rx, ry) = self.position(r);
        let [pos_x, pos_y] = position.unwrap_or([(px + qx + rx) / 3.0, (py + qy + ry) / 3.0]);
        let (m, [mp, mq, mr], slots, [t2, t3]) = match ids {
            None => {
                let slots = self.lowest_free_slots(3);
                let m = self.add_vertex(pos_x, pos_y);
                let mp = self.add_edge(m, p, Some(slots[0]));
                let mq = self.add_edge(m, q, Some(slots[1]));
                let mr = self.add_edge(m, r, Some(slots[2]));
                let t2 = self.add_triangle([q, r, m], [a, mr, mq]);
                let t3 = self.add_triangle([r, p, m], [b, mp, mr]);
                (m, [mp, mq, mr], [slots[0], slots[1], slots[2]], [t2, t3])
            }
            Some((m, es, slots, ts)) => {
                let used: BTreeSet<Slot> = self.edges.values().filter_map(|e| e.qubit).collect();
                if self.vertices.contains_key(&m)
                    || es.iter().any(|e| self.edges.contains_key(e))
                    || slots.iter().any(|s| used.contains(s))
                    || ts.iter().any(|t| self.triangles.contains_key(t))
                {
                    return Err(TvqError::MoveRejected(format!(
                        "recorded ids of the 1-3 move on triangle {triangle} are already in use"
                    )));
                }
                self.vertices.insert(m, Vertex { id: m, x: pos_x, y: pos_y });
                for (k, (e, v)) in es.iter().zip([p, q, r]).enumerate() {
                    self.edges.insert(*e, Edge { id: *e, v1: m, v2: v, qubit: Some(slots[k]) });
                }
                let [mp, mq, mr] = es;
                self.triangles.insert(ts[0], Triangle { id: ts[0], verts: [q, r, m], edges: [a, mr, mq] });
                self.triangles.insert(ts[1], Triangle { id: ts[1], verts: [r, p, m], edges: [b, mp, mr] });
                self.next_vertex = self.next_vertex.max(m + 1);
                self.next_edge = self.next_edge.max(es.iter().max().expect("3") + 1);
                self.next_triangle = self.next_triangle.max(ts.iter().max().expect("2") + 1);
                (m, es, slots, ts)
            }
        };
        self.triangles.insert(triangle, Triangle { id: triangle, verts: [p, q, m], edges: [c, mq, mp] });
        self.version += 1;
        Ok(MoveRecord::Pachner13 {
            triangle,
            vertex: m,
            corners: [p, q, r],
            outer: [a, b, c],
            outer_slots: [a, b, c].map(|e| self.edges[&e].qubit),
            new_edges: [mp, mq, mr],
            new_slots: slots,
            new_triangles: [triangle, t2, t3],
            position: [pos_x, pos_y],
        })
    }

    /// Removes a degree-3 interior vertex, merging its three triangles.
    pub fn merge_vertex_in_place(&mut self, vertex: VertexId) -> Result<MoveRecord> {
        if !self.vertices.contains_key(&vertex) {
            return Err(TvqError::MoveRejected(format!("vertex {vertex} does not exist")));
        }
        if self.punctures.contains(&vertex) {
            return Err(TvqError::MoveRejected(format!("vertex {vertex} is a puncture")));
        }
        let Some(star) = self.star(vertex) else {
            return Err(TvqError::MoveRejected(format!("vertex {vertex} is on the boundary")));
        };
        if star.len() != 3 || self.degree(vertex) != 3 {
            return Err(TvqError::MoveRejected(format!(
                "vertex {vertex} has degree {}, expected 3",
                self.degree(vertex)
            )));
        }
        // Canonical labelling: the wedge with the lowest triangle id is (P, Q, M).
        let w0 = star[0];
        let (w1, w2) = (star[1], star[2]);
        let (mp, c, mq) = (w0.spoke_in, w0.link, w0.spoke_out);
        let (a, mr) = (w1.link, w1.spoke_out);
        let b = w2.link;
        debug_assert_eq!(w1.spoke_in, mq);
        debug_assert_eq!(w2.spoke_in, mr);
        debug_assert_eq!(w2.spoke_out, mp);
        let p = self.edges[&mp].other(vertex);
        let q = self.edges[&mq].other(vertex);
        let r = self.edges[&mr].other(vertex);
        if p == q || q == r || p == r {
            return Err(TvqError::MoveRejected(format!("vertex {vertex} has a degenerate neighbourhood")));
        }
        // Every move keeps interior vertices at degree three or more, so the
        // flips around a merged region stay invertible.
        if let Some(corner) = [p, q, r].into_iter().find(|v| self.is_interior_vertex(*v) && self.degree(*v) <= 3) {
            return Err(TvqError::MoveRejected(format!(
                "removing vertex {vertex} would leave vertex {corner} with fewer than 3 edges"
            )));
        }
        let slots = [mp, mq, mr].map(|e| self.edges[&e].qubit);
        let [Some(s0), Some(s1), Some(s2)] = slots else {
            return Err(TvqError::MoveRejected(format!("vertex {vertex} has frozen spokes")));
        };
        let tris = [w0.triangle, w1.triangle, w2.triangle];
        let (pos_x, pos_y) = self.position(vertex);
        let keep = *tris.iter().min().expect("three triangles");
        for t in tris {
            self.triangles.remove(&t);
        }
        for e in [mp, mq, mr] {
            self.edges.remove(&e);
        }
        self.vertices.remove(&vertex);
        self.triangles.insert(keep, Triangle { id: keep, verts: [p, q, r], edges: [c, a, b] });
        self.version += 1;
        Ok(MoveRecord::Pachner31 {
            triangle: keep,
            vertex,
            corners: [p, q, r],
            outer: [a, b, c],
            outer_slots: [a, b, c].map(|e| self.edges[&e].qubit),
            new_edges: [mp, mq, mr],
            new_slots: [s0, s1, s2],
            new_triangles: tris,
            position: [pos_x, pos_y],
        })
    }

    /// Exchanges the qubits held by two edges.
    pub fn swap_in_place(&mut self, e1: EdgeId, e2: EdgeId) -> Result<MoveRecord> {
        let (Some(a), Some(b)) = (self.edges.get(&e1), self.edges.get(&e2)) else {
            return Err(TvqError::MoveRejected("swap references a missing edge".into()));
        };
        let (Some(s1), Some(s2)) = (a.qubit, b.qubit) else {
            return Err(TvqError::MoveRejected("swap involves a frozen edge".into()));
        };
        self.edges.get_mut(&e1).expect("exists").qubit = Some(s2);
        self.edges.get_mut(&e2).expect("exists").qubit = Some(s1);
        self.version += 1;
        Ok(MoveRecord::LocalSwap { edges: [e1, e2], slots: [s1, s2] })
    }

    /// Applies a recorded move (replay).  Permutation records need their
    /// target layout.
    /// Finds the triangle bounded by `outer` and rotates its cycles to start
    /// at `corners[0]`.  Flips may hand a triangle id to the other side of a
    /// quadrilateral, so the boundary edges, not the id, identify it.
    fn locate_triangle(
        &mut self,
        hint: TriangleId,
        corners: &[VertexId; 3],
        outer: &[EdgeId; 3],
    ) -> Result<TriangleId> {
        let want: BTreeSet<EdgeId> = outer.iter().copied().collect();
        let matches = |t: &Triangle| t.edges.iter().copied().collect::<BTreeSet<_>>() == want;
        let id = match self.triangles.get(&hint) {
            Some(t) if matches(t) => hint,
            _ => self
                .triangles
                .values()
                .find(|t| matches(t))
                .map(|t| t.id)
                .ok_or_else(|| TvqError::MoveRejected(format!("no triangle is bounded by edges {outer:?}")))?,
        };
        let t = self.triangles.get_mut(&id).expect("triangle exists");
        if let Some(k) = t.verts.iter().position(|v| *v == corners[0]) {
            t.verts.rotate_left(k);
            t.edges.rotate_left(k);
        }
        Ok(id)
    }

    pub fn replay_in_place(&mut self, record: &MoveRecord) -> Result<MoveRecord> {
        match record {
            MoveRecord::FMove { edge, .. } => self.flip_in_place(*edge),
            MoveRecord::Pachner13 {
                triangle,
                vertex,
                corners,
                outer,
                new_edges,
                new_slots,
                new_triangles,
                position,
                ..
            } => {
                let triangle = self.locate_triangle(*triangle, corners, outer)?;
                self.split_triangle_impl(
                    triangle,
                    Some((*vertex, *new_edges, *new_slots, [new_triangles[1], new_triangles[2]])),
                    Some(*position),
                )
            }
            MoveRecord::Pachner31 { vertex, .. } => self.merge_vertex_in_place(*vertex),
            MoveRecord::LocalSwap { edges, .. } => self.swap_in_place(edges[0], edges[1]),
            MoveRecord::Permutation { slot_map, target, .. } => {
                let target = target
                    .as_ref()
                    .ok_or_else(|| TvqError::InvalidArgument("permutation record lacks its target layout".into()))?;
                let (l, rec) = apply_cpi(self, slot_map, target)?;
                *self = l;
                Ok(rec)
            }
        }
    }

    // ------------------------------------------------------------------
    // Structural comparison
    // ------------------------------------------------------------------

    /// Equality of vertices, edges (as unordered pairs), slots, punctures and
    /// triangle vertex/edge cycles; triangle ids and versions are ignored.
    pub fn same_structure(&self, other: &SurfaceLattice) -> bool {
        let canon = |l: &SurfaceLattice| -> BTreeSet<([VertexId; 3], [EdgeId; 3])> {
            l.triangles
                .values()
                .map(|t| {
                    let k = (0..3).min_by_key(|&i| t.verts[i]).expect("3 vertices");
                    (
                        [t.verts[k], t.verts[(k + 1) % 3], t.verts[(k + 2) % 3]],
                        [t.edges[k], t.edges[(k + 1) % 3], t.edges[(k + 2) % 3]],
                    )
                })
                .collect()
        };
        self.topology == other.topology
            && self.vertices == other.vertices
            && self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .all(|(id, e)| other.edges.get(id).is_some_and(|f| f.qubit == e.qubit && f.joins(e.v1, e.v2)))
            && self.punctures == other.punctures
            && canon(self) == canon(other)
    }

    // ------------------------------------------------------------------
    // JSON
    // ------------------------------------------------------------------

    /// Serializable form.
    pub fn to_json(&self) -> LatticeJson {
        LatticeJson {
            topology: self.topology,
            vertices: self
                .vertices
                .values()
                .map(|v| Vertex { id: v.id, x: round_sig(v.x), y: round_sig(v.y) })
                .collect(),
            edges: self.edges.values().cloned().collect(),
            triangles: self.triangles.values().map(|t| TriangleJson { id: t.id, edges: t.edges }).collect(),
            punctures: self.punctures.iter().copied().collect(),
            version: self.version,
        }
    }

    /// Rebuilds a lattice from its serialized form, validating it.
    pub fn from_json(doc: &LatticeJson) -> Result<Self> {
        let mut l = SurfaceLattice::empty(doc.topology);
        for v in &doc.vertices {
            if l.vertices.insert(v.id, v.clone()).is_some() {
                return Err(TvqError::Format(format!("duplicate vertex id {}", v.id)));
            }
        }
        for e in &doc.edges {
            if !l.vertices.contains_key(&e.v1) || !l.vertices.contains_key(&e.v2) {
                return Err(TvqError::Format(format!("edge {} references a missing vertex", e.id)));
            }
            if l.edges.insert(e.id, e.clone()).is_some() {
                return Err(TvqError::Format(format!("duplicate edge id {}", e.id)));
            }
        }
        for t in &doc.triangles {
            let mut verts = [0; 3];
            for (i, slot) in verts.iter_mut().enumerate() {
                let (e0, e1) = (t.edges[(i + 2) % 3], t.edges[i]);
                let (Some(a), Some(b)) = (l.edges.get(&e0), l.edges.get(&e1)) else {
                    return Err(TvqError::Format(format!("triangle {} references a missing edge", t.id)));
                };
                let shared: Vec<VertexId> = [a.v1, a.v2].into_iter().filter(|&v| v == b.v1 || v == b.v2).collect();
                if shared.len() != 1 {
                    return Err(TvqError::Format(format!(
                        "triangle {} has sides that do not meet in a single corner",
                        t.id
                    )));
                }
                *slot = shared[0];
            }
            if l.triangles.insert(t.id, Triangle { id: t.id, verts, edges: t.edges }).is_some() {
                return Err(TvqError::Format(format!("duplicate triangle id {}", t.id)));
            }
        }
        l.punctures = doc.punctures.iter().copied().collect();
        l.version = doc.version;
        l.next_vertex = l.vertices.keys().max().map_or(0, |m| m + 1);
        l.next_edge = l.edges.keys().max().map_or(0, |m| m + 1);
        l.next_triangle = l.triangles.keys().max().map_or(0, |m| m + 1);
        l.validate().map_err(|e| TvqError::Format(e.to_string()))?;
        Ok(l)
    }
}

/// Rounds to 12 significant decimal digits.
fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// JSON document for a lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeJson {
    pub topology: Topology,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub triangles: Vec<TriangleJson>,
    pub punctures: Vec<VertexId>,
    pub version: u64,
}

/// Triangle entry of [`LatticeJson`]; edges in counter-clockwise order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleJson {
    pub id: TriangleId,
    pub edges: [EdgeId; 3],
}

// ----------------------------------------------------------------------
// Public pure operations
// ----------------------------------------------------------------------

/// Builds the theta-graph sphere.
pub fn build_theta_sphere() -> SurfaceLattice {
    SurfaceLattice::theta_sphere()
}

/// Builds the honeycomb torus.
pub fn build_honeycomb_torus(lx: usize, ly: usize) -> Result<SurfaceLattice> {
    SurfaceLattice::honeycomb_torus(lx, ly)
}

/// Builds a punctured planar patch.
pub fn build_planar_patch(rows: usize, cols: usize, punctures: &[(usize, usize)]) -> Result<SurfaceLattice> {
    SurfaceLattice::planar_patch(rows, cols, punctures)
}

/// 2-2 Pachner move (edge flip).  Edges bordering a puncture plaquette are
/// rejected.  The in-place rewrites used by the gadgets only refuse to remove
/// a puncture vertex; see [`SurfaceLattice::flip_in_place`].
pub fn pachner_22(lattice: &SurfaceLattice, edge: EdgeId) -> Result<(SurfaceLattice, MoveRecord)> {
    if let Some(e) = lattice.edge(edge) {
        for v in [e.v1, e.v2] {
            if lattice.is_puncture(v) {
                return Err(TvqError::MoveRejected(format!("edge {edge} borders puncture plaquette {v}")));
            }
        }
    }
    let mut l = lattice.clone();
    let rec = l.flip_in_place(edge)?;
    Ok((l, rec))
}

/// 1-3 Pachner move.  Triangles touching a puncture are rejected.
pub fn pachner_13(lattice: &SurfaceLattice, triangle: TriangleId) -> Result<(SurfaceLattice, MoveRecord)> {
    if let Some(t) = lattice.triangle(triangle) {
        if let Some(v) = t.verts.iter().find(|v| lattice.is_puncture(**v)) {
            return Err(TvqError::MoveRejected(format!("triangle {triangle} touches puncture plaquette {v}")));
        }
    }
    let mut l = lattice.clone();
    let rec = l.split_triangle_in_place(triangle)?;
    Ok((l, rec))
}

/// 3-1 Pachner move.
pub fn pachner_31(lattice: &SurfaceLattice, vertex: VertexId) -> Result<(SurfaceLattice, MoveRecord)> {
    let mut l = lattice.clone();
    let rec = l.merge_vertex_in_place(vertex)?;
    Ok((l, rec))
}

/// Derives the qubit map induced by a vertex bijection from `lattice` onto
/// the `target` layout: every edge `(u, v)` must land on an edge
/// `(π(u), π(v))` bounding the image triangles.
pub fn cpi_from_vertex_map(
    lattice: &SurfaceLattice,
    target: &SurfaceLattice,
    vertex_map: &BTreeMap<VertexId, VertexId>,
) -> Result<SlotMap> {
    let edge_map = induced_edge_map(lattice, target, vertex_map)?;
    let mut sigma = SlotMap::new();
    for (e, f) in edge_map {
        match (lattice.edges[&e].qubit, target.edges[&f].qubit) {
            (Some(s), Some(t)) => {
                sigma.insert(s, t);
            }
            (None, None) => {}
            _ => {
                return Err(TvqError::ConnectivityViolation(format!(
                    "edge {e} and its image {f} disagree on carrying a qubit"
                )))
            }
        }
    }
    Ok(sigma)
}

fn induced_edge_map(
    lattice: &SurfaceLattice,
    target: &SurfaceLattice,
    vertex_map: &BTreeMap<VertexId, VertexId>,
) -> Result<BTreeMap<EdgeId, EdgeId>> {
    let img: BTreeSet<VertexId> = vertex_map.values().copied().collect();
    if vertex_map.len() != lattice.num_vertices()
        || img.len() != vertex_map.len()
        || lattice.vertices.keys().any(|v| !vertex_map.contains_key(v))
        || img.iter().any(|v| !target.vertices.contains_key(v))
        || target.num_vertices() != lattice.num_vertices()
    {
        return Err(TvqError::ConnectivityViolation("vertex map is not a bijection".into()));
    }
    // Map triangles by their (rotation-normalized) image vertex cycle.
    let key = |v: [VertexId; 3]| {
        let k = (0..3).min_by_key(|&i| v[i]).expect("3");
        [v[k], v[(k + 1) % 3], v[(k + 2) % 3]]
    };
    let mut target_tris: BTreeMap<[VertexId; 3], Vec<&Triangle>> = BTreeMap::new();
    for t in target.triangles.values() {
        target_tris.entry(key(t.verts)).or_default().push(t);
    }
    let mut edge_map: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    for t in lattice.triangles.values() {
        let iv = t.verts.map(|v| vertex_map[&v]);
        let k = key(iv);
        let Some(cands) = target_tris.get(&k) else {
            return Err(TvqError::ConnectivityViolation(format!(
                "triangle {} has no image triangle in the target layout",
                t.id
            )));
        };
        if cands.len() != 1 {
            return Err(TvqError::ConnectivityViolation(format!("image of triangle {} is ambiguous", t.id)));
        }
        let tt = cands[0];
        let off = (0..3).find(|&o| tt.verts[o] == iv[0]).expect("rotation exists");
        for i in 0..3 {
            let f = tt.edges[(i + off) % 3];
            if let Some(&prev) = edge_map.get(&t.edges[i]) {
                if prev != f {
                    return Err(TvqError::ConnectivityViolation(format!("edge {} maps inconsistently", t.edges[i])));
                }
            }
            edge_map.insert(t.edges[i], f);
        }
    }
    let img: BTreeSet<EdgeId> = edge_map.values().copied().collect();
    if edge_map.len() != lattice.num_edges() || img.len() != edge_map.len() {
        return Err(TvqError::ConnectivityViolation("induced edge map is not a bijection".into()));
    }
    Ok(edge_map)
}

/// Checks that `sigma` is a connectivity-preserving isomorphism from the
/// qubits of `lattice` onto those of `target` and returns the induced vertex
/// map.  Connectivity is tested literally: the qubits of every triangle must
/// land inside one triangle of the target, distinct triangles must land on
/// distinct triangles, and frozen edges must line up with frozen edges.
pub fn check_cpi(
    lattice: &SurfaceLattice,
    sigma: &SlotMap,
    target: &SurfaceLattice,
) -> Result<BTreeMap<VertexId, VertexId>> {
    let src_slots: BTreeSet<Slot> = lattice.qubit_slots().into_iter().collect();
    let dst_slots: BTreeSet<Slot> = target.qubit_slots().into_iter().collect();
    let keys: BTreeSet<Slot> = sigma.keys().copied().collect();
    let vals: BTreeSet<Slot> = sigma.values().copied().collect();
    if keys != src_slots || vals != dst_slots || vals.len() != sigma.len() {
        return Err(TvqError::ConnectivityViolation("qubit map is not a bijection between the two layouts".into()));
    }
    let dst_index = target.slot_index();
    let src_index = lattice.slot_index();
    let dst_edge_tris = target.edge_triangle_index();
    // Seed the vertex map from pairs of qubit edges sharing a triangle.
    let mut vmap: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut tri_img: BTreeSet<TriangleId> = BTreeSet::new();
    for t in lattice.triangles.values() {
        let qubit_sides: Vec<(usize, EdgeId)> = (0..3)
            .filter(|&i| lattice.edges[&t.edges[i]].qubit.is_some())
            .map(|i| (i, dst_index[&sigma[&lattice.edges[&t.edges[i]].qubit.expect("qubit")]]))
            .collect();
        if qubit_sides.is_empty() {
            continue;
        }
        let mut common: Option<BTreeSet<TriangleId>> = None;
        for &(_, f) in &qubit_sides {
            let s: BTreeSet<TriangleId> = dst_edge_tris[&f].iter().copied().collect();
            common = Some(match common {
                None => s,
                Some(c) => c.intersection(&s).copied().collect(),
            });
        }
        let common = common.expect("non-empty");
        let viable: Vec<TriangleId> = common
            .into_iter()
            .filter(|tt| {
                let tt = &target.triangles[tt];
                (0..3).all(|i| {
                    let src_frozen = lattice.edges[&t.edges[i]].qubit.is_none();
                    let hits = qubit_sides.iter().any(|&(j, _)| j == i);
                    !src_frozen || hits || tt.edges.iter().any(|e| target.edges[e].qubit.is_none())
                })
            })
            .collect();
        if viable.is_empty() {
            return Err(TvqError::ConnectivityViolation(format!(
                "qubits of triangle {} are not mapped into a single triangle",
                t.id
            )));
        }
        let tt = &target.triangles[&viable[0]];
        // Orientation: find rotation matching the first qubit side.
        let (i0, f0) = qubit_sides[0];
        let off = (0..3).find(|&o| tt.edges[(i0 + o) % 3] == f0).expect("edge in triangle");
        for &(i, f) in &qubit_sides {
            if tt.edges[(i + off) % 3] != f {
                return Err(TvqError::ConnectivityViolation(format!(
                    "triangle {} is mapped with a reflection or a scrambled side order",
                    t.id
                )));
            }
        }
        if viable.len() == 1 && !tri_img.insert(tt.id) {
            return Err(TvqError::ConnectivityViolation(format!("two triangles map onto target triangle {}", tt.id)));
        }
        for i in 0..3 {
            let v = t.verts[i];
            let w = tt.verts[(i + off) % 3];
            if let Some(&prev) = vmap.get(&v) {
                if prev != w {
                    return Err(TvqError::ConnectivityViolation(format!(
                        "vertex {v} is sent to two different vertices"
                    )));
                }
            }
            vmap.insert(v, w);
        }
    }
    let _ = src_index;
    // Verify the full induced structure.
    if vmap.len() != lattice.num_vertices() {
        return Err(TvqError::ConnectivityViolation("some vertices are not reached by any qubit".into()));
    }
    let sigma2 = cpi_from_vertex_map(lattice, target, &vmap)?;
    if &sigma2 != sigma {
        return Err(TvqError::ConnectivityViolation("qubit map disagrees with the induced triangle map".into()));
    }
    Ok(vmap)
}

/// Applies a connectivity-preserving isomorphism: the qubit in slot `s`
/// moves to slot `sigma[s]` of the `target` layout.  Returns the target
/// layout (punctures carried along, version bumped) and a record whose
/// `range` is the largest displacement of any qubit in layout units.
pub fn apply_cpi(
    lattice: &SurfaceLattice,
    sigma: &SlotMap,
    target: &SurfaceLattice,
) -> Result<(SurfaceLattice, MoveRecord)> {
    let vmap = check_cpi(lattice, sigma, target)?;
    let src_index = lattice.slot_index();
    let dst_index = target.slot_index();
    let mut range = 0.0f64;
    for (s, t) in sigma {
        let (a, b) = (lattice.midpoint(src_index[s]), target.midpoint(dst_index[t]));
        range = range.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
    }
    for (v, w) in &vmap {
        let (a, b) = (lattice.position(*v), target.position(*w));
        range = range.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
    }
    let mut out = target.clone();
    out.punctures = lattice.punctures.iter().map(|p| vmap[p]).collect();
    out.version = lattice.version + 1;
    let rec = MoveRecord::Permutation {
        slot_map: sigma.clone(),
        vertex_map: vmap,
        range,
        target: Some(Arc::new(target.clone())),
    };
    Ok((out, rec))
}

/// Searches for an orientation-preserving isomorphism that respects qubit
/// placement (frozen vs. qubit edges) and punctures.  Seeds are tried in
/// layout order (same-position triangles first); the exhaustive fallback
/// over all seed triangles runs for lattices of at most 200 edges.
pub fn isomorphism_check(a: &SurfaceLattice, b: &SurfaceLattice) -> Option<Isomorphism> {
    if a.num_vertices() != b.num_vertices()
        || a.num_edges() != b.num_edges()
        || a.num_triangles() != b.num_triangles()
        || a.punctures.len() != b.punctures.len()
        || a.num_qubits() != b.num_qubits()
    {
        return None;
    }
    let Some(seed) = a.triangles.values().next() else {
        return Some(Isomorphism { vertex_map: BTreeMap::new(), edge_map: BTreeMap::new() });
    };
    let a_idx = a.edge_triangle_index();
    let b_idx = b.edge_triangle_index();
    let centroid = |l: &SurfaceLattice, t: &Triangle| {
        let ps: Vec<(f64, f64)> = t.verts.iter().map(|&v| l.position(v)).collect();
        ((ps[0].0 + ps[1].0 + ps[2].0) / 3.0, (ps[0].1 + ps[1].1 + ps[2].1) / 3.0)
    };
    let sc = centroid(a, seed);
    let mut cands: Vec<&Triangle> = b
        .triangles
        .values()
        .filter(|t| {
            let c = centroid(b, t);
            (c.0 - sc.0).abs() < 1e-6 && (c.1 - sc.1).abs() < 1e-6
        })
        .collect();
    if a.num_edges() <= 200 {
        for t in b.triangles.values() {
            if !cands.iter().any(|c| c.id == t.id) {
                cands.push(t);
            }
        }
    }
    for cand in cands {
        for rot in 0..3 {
            if let Some(iso) = propagate_iso(a, b, &a_idx, &b_idx, seed, cand, rot) {
                return Some(iso);
            }
        }
    }
    None
}

fn propagate_iso(
    a: &SurfaceLattice,
    b: &SurfaceLattice,
    a_idx: &BTreeMap<EdgeId, Vec<TriangleId>>,
    b_idx: &BTreeMap<EdgeId, Vec<TriangleId>>,
    seed: &Triangle,
    cand: &Triangle,
    rot: usize,
) -> Option<Isomorphism> {
    let mut vmap: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut emap: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    let mut tmap: BTreeMap<TriangleId, TriangleId> = BTreeMap::new();
    let mut queue = VecDeque::new();
    queue.push_back((seed.id, cand.id, rot));
    while let Some((ta, tb, r)) = queue.pop_front() {
        if let Some(&prev) = tmap.get(&ta) {
            if prev != tb {
                return None;
            }
            continue;
        }
        tmap.insert(ta, tb);
        let (x, y) = (&a.triangles[&ta], &b.triangles[&tb]);
        for i in 0..3 {
            let (va, vb) = (x.verts[i], y.verts[(i + r) % 3]);
            if *vmap.entry(va).or_insert(vb) != vb {
                return None;
            }
            let (ea, eb) = (x.edges[i], y.edges[(i + r) % 3]);
            if *emap.entry(ea).or_insert(eb) != eb {
                return None;
            }
            if a.edges[&ea].qubit.is_some() != b.edges[&eb].qubit.is_some() {
                return None;
            }
            let na: Vec<TriangleId> = a_idx[&ea].iter().copied().filter(|&t| t != ta).collect();
            let nb: Vec<TriangleId> = b_idx[&eb].iter().copied().filter(|&t| t != tb).collect();
            if na.len() != nb.len() {
                return None;
            }
            if let (Some(&ta2), Some(&tb2)) = (na.first(), nb.first()) {
                let t2a = &a.triangles[&ta2];
                let t2b = &b.triangles[&tb2];
                let ia = t2a.edges.iter().position(|&e| e == ea)?;
                let ib = t2b.edges.iter().position(|&e| e == eb)?;
                let r2 = (ib + 3 - ia) % 3;
                queue.push_back((ta2, tb2, r2));
            }
        }
    }
    let vset: BTreeSet<_> = vmap.values().collect();
    let eset: BTreeSet<_> = emap.values().collect();
    if tmap.len() != a.num_triangles()
        || vmap.len() != a.num_vertices()
        || emap.len() != a.num_edges()
        || vset.len() != vmap.len()
        || eset.len() != emap.len()
    {
        return None;
    }
    let mapped_p: BTreeSet<VertexId> = a.punctures.iter().map(|p| vmap[p]).collect();
    if mapped_p != b.punctures {
        return None;
    }
    Some(Isomorphism { vertex_map: vmap, edge_map: emap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_counts() {
        let l = build_theta_sphere();
        assert_eq!(l.num_edges(), 3);
        assert_eq!(l.num_dual_vertices(), 2);
        assert_eq!(l.euler_characteristic(), 2);
        l.validate().unwrap();
        for v in l.vertices() {
            let p = l.plaquette(v.id).unwrap();
            assert_eq!(p.spokes.len(), 2);
        }
    }

    #[test]
    fn torus_counts() {
        let l = build_honeycomb_torus(2, 2).unwrap();
        assert_eq!((l.num_dual_vertices(), l.num_edges(), l.num_vertices()), (8, 12, 4));
        assert_eq!(l.euler_characteristic(), 0);
        l.validate().unwrap();
        assert_eq!(build_honeycomb_torus(3, 2).unwrap().num_edges(), 18);
        assert!(build_honeycomb_torus(1, 1).is_err());
        for p in l.plaquettes() {
            assert_eq!(p.spokes.len(), 6);
        }
    }

    #[test]
    fn patch_counts_and_punctures() {
        let l = build_planar_patch(6, 6, &[(2, 2), (2, 4)]).unwrap();
        assert_eq!(l.punctures().len(), 2);
        assert_eq!(l.euler_characteristic(), 1);
        l.validate().unwrap();
        assert!(build_planar_patch(6, 6, &[(2, 2), (2, 3)]).is_err());
        let l = build_planar_patch(4, 4, &[]).unwrap();
        assert!(l.punctures().is_empty());
        assert_eq!(l.stabilized_plaquettes().len(), 4);
    }

    #[test]
    fn flip_round_trip_and_counts() {
        let l = build_honeycomb_torus(3, 3).unwrap();
        let e = 0;
        let (l2, rec) = pachner_22(&l, e).unwrap();
        assert_eq!(
            (l2.num_vertices(), l2.num_edges(), l2.num_triangles()),
            (l.num_vertices(), l.num_edges(), l.num_triangles())
        );
        l2.validate().unwrap();
        let (l3, _) = pachner_22(&l2, e).unwrap();
        assert!(isomorphism_check(&l, &l3).is_some());
        assert_eq!(rec.kind(), "F_MOVE");
    }

    #[test]
    fn theta_flip_is_degenerate() {
        let l = build_theta_sphere();
        for e in 0..3 {
            assert!(matches!(pachner_22(&l, e), Err(TvqError::MoveRejected(_))));
        }
    }

    #[test]
    fn boundary_flip_rejected() {
        let l = build_planar_patch(4, 4, &[]).unwrap();
        let b = l.edges().find(|e| e.qubit.is_none()).unwrap().id;
        assert!(pachner_22(&l, b).is_err());
    }

    #[test]
    fn split_merge_round_trip() {
        let l = build_honeycomb_torus(2, 2).unwrap();
        let (l2, rec) = pachner_13(&l, 3).unwrap();
        assert_eq!(l2.num_vertices(), l.num_vertices() + 1);
        assert_eq!(l2.num_edges(), l.num_edges() + 3);
        assert_eq!(l2.num_triangles(), l.num_triangles() + 2);
        assert_eq!(l2.euler_characteristic(), l.euler_characteristic());
        l2.validate().unwrap();
        let MoveRecord::Pachner13 { vertex, new_slots, .. } = rec else { panic!() };
        assert_eq!(new_slots, [12, 13, 14]);
        let (l3, rec) = pachner_31(&l2, vertex).unwrap();
        assert!(l3.same_structure(&l));
        assert!(isomorphism_check(&l, &l3).unwrap().is_identity());
        let MoveRecord::Pachner31 { new_slots, .. } = rec else { panic!() };
        assert_eq!(new_slots, [12, 13, 14]);
        // Degree-6 vertex cannot be merged.
        assert!(pachner_31(&l, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        for l in
            [build_theta_sphere(), build_honeycomb_torus(2, 3).unwrap(), build_planar_patch(5, 6, &[(2, 2)]).unwrap()]
        {
            let doc = l.to_json();
            let s = serde_json::to_string(&doc).unwrap();
            let back = SurfaceLattice::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
            assert!(back.same_structure(&l));
            assert_eq!(back.to_json(), doc);
        }
    }

    #[test]
    fn identity_cpi_and_bad_transposition() {
        let l = build_planar_patch(5, 5, &[]).unwrap();
        let id: SlotMap = l.qubit_slots().into_iter().map(|s| (s, s)).collect();
        let (l2, rec) = apply_cpi(&l, &id, &l).unwrap();
        let MoveRecord::Permutation { range, .. } = rec else { panic!() };
        assert_eq!(range, 0.0);
        assert!(l2.same_structure(&l));
        let mut bad = id.clone();
        let (s0, s1) = (l.qubit_slots()[0], *l.qubit_slots().last().unwrap());
        bad.insert(s0, s1);
        bad.insert(s1, s0);
        assert!(matches!(apply_cpi(&l, &bad, &l), Err(TvqError::ConnectivityViolation(_))));
    }

    #[test]
    fn isomorphism_negative() {
        let a = build_honeycomb_torus(2, 2).unwrap();
        let b = build_honeycomb_torus(3, 2).unwrap();
        assert!(isomorphism_check(&a, &b).is_none());
        assert!(isomorphism_check(&a, &a).unwrap().is_identity());
    }
}
