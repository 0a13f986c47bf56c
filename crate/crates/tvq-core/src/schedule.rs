//! Move schedules: ordered groups of recorded rewrites with explicit layer
//! structure, replay on lattices and states, and depth accounting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvqError};
use crate::fusion::FusionData;
use crate::lattice::{EdgeId, MoveRecord, Slot, SurfaceLattice};
use crate::scalar::Scalar;
use crate::statevec::{apply_move, StringNetState};

/// Kind of a schedule group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupKind {
    /// Pachner moves and local swaps, arranged in layers of disjoint support.
    Local,
    /// A single connectivity-preserving permutation.
    Permutation,
}

/// One group of a schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoveGroup {
    pub kind: GroupKind,
    pub label: String,
    pub layers: Vec<Vec<MoveRecord>>,
}

impl MoveGroup {
    /// Number of layers (a permutation group counts as zero local layers).
    pub fn depth(&self) -> usize {
        match self.kind {
            GroupKind::Local => self.layers.len(),
            GroupKind::Permutation => 0,
        }
    }
}

/// Ordered list of groups applied to a lattice of a given version.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MoveSchedule {
    pub input_version: u64,
    pub groups: Vec<MoveGroup>,
}

/// Depth and range accounting of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    /// Total number of local layers, summed over all local groups.
    pub local_depth: usize,
    /// Largest number of layers in any single local group.
    pub max_group_depth: usize,
    /// Largest qubit displacement over all permutation groups (layout units).
    pub permutation_range: f64,
    /// Number of groups.
    pub total_steps: usize,
    /// Number of recorded moves (permutations included).
    pub total_moves: usize,
}

/// Resources a move touches: its edges and its qubit slots (a released
/// slot may be reused by a later move on different edges).
fn resources(m: &MoveRecord) -> Vec<Resource> {
    m.support_edges().into_iter().map(Resource::Edge).chain(m.support_slots().into_iter().map(Resource::Slot)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Resource {
    Edge(EdgeId),
    Slot(Slot),
}

/// Assigns each move the earliest layer after every earlier move it shares
/// an edge or a qubit with.  Moves in one layer have pairwise-disjoint
/// supports.
pub fn asap_layers(moves: Vec<MoveRecord>) -> Vec<Vec<MoveRecord>> {
    let mut last: BTreeMap<Resource, usize> = BTreeMap::new();
    let mut layers: Vec<Vec<MoveRecord>> = Vec::new();
    for m in moves {
        let sup = resources(&m);
        let layer = sup.iter().filter_map(|e| last.get(e)).map(|l| l + 1).max().unwrap_or(0);
        for e in sup {
            last.insert(e, layer);
        }
        if layers.len() <= layer {
            layers.resize_with(layer + 1, Vec::new);
        }
        layers[layer].push(m);
    }
    layers
}

impl MoveSchedule {
    /// Empty schedule for a lattice.
    pub fn new(lattice: &SurfaceLattice) -> Self {
        MoveSchedule { input_version: lattice.version(), groups: Vec::new() }
    }

    /// Appends a local group, layering the moves as soon as possible.
    pub fn push_local(&mut self, label: impl Into<String>, moves: Vec<MoveRecord>) {
        if moves.is_empty() {
            return;
        }
        self.groups.push(MoveGroup { kind: GroupKind::Local, label: label.into(), layers: asap_layers(moves) });
    }

    /// Appends a local group with explicitly declared layers.
    pub fn push_layers(&mut self, label: impl Into<String>, layers: Vec<Vec<MoveRecord>>) {
        let layers: Vec<_> = layers.into_iter().filter(|l| !l.is_empty()).collect();
        if layers.is_empty() {
            return;
        }
        self.groups.push(MoveGroup { kind: GroupKind::Local, label: label.into(), layers });
    }

    /// Appends a permutation group.
    pub fn push_permutation(&mut self, label: impl Into<String>, record: MoveRecord) {
        self.groups.push(MoveGroup { kind: GroupKind::Permutation, label: label.into(), layers: vec![vec![record]] });
    }

    /// Appends all groups of another schedule.
    pub fn extend(&mut self, other: MoveSchedule) {
        self.groups.extend(other.groups);
    }

    /// All moves in replay order.
    pub fn moves(&self) -> impl Iterator<Item = &MoveRecord> {
        self.groups.iter().flat_map(|g| g.layers.iter().flatten())
    }

    /// Checks the structural invariants: layers of local groups have
    /// pairwise-disjoint supports and permutation groups hold exactly one
    /// permutation record.
    pub fn validate(&self) -> Result<()> {
        for (gi, g) in self.groups.iter().enumerate() {
            match g.kind {
                GroupKind::Local => {
                    for (li, layer) in g.layers.iter().enumerate() {
                        let mut seen: BTreeSet<Resource> = BTreeSet::new();
                        for m in layer {
                            if matches!(m, MoveRecord::Permutation { .. }) {
                                return Err(TvqError::InvalidArgument(format!(
                                    "group {gi} ({}) holds a permutation inside a local layer",
                                    g.label
                                )));
                            }
                            for r in resources(m) {
                                if !seen.insert(r) {
                                    return Err(TvqError::SupportCollision(format!(
                                        "{r:?} is used twice in layer {li} of group {gi} ({})",
                                        g.label
                                    )));
                                }
                            }
                        }
                    }
                }
                GroupKind::Permutation => {
                    let n: usize = g.layers.iter().map(Vec::len).sum();
                    let ok = n == 1 && matches!(g.layers[0].first(), Some(MoveRecord::Permutation { .. }));
                    if !ok {
                        return Err(TvqError::InvalidArgument(format!(
                            "permutation group {gi} ({}) must hold exactly one permutation",
                            g.label
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Depth accounting.
    pub fn depth_report(&self) -> DepthReport {
        let local: Vec<usize> =
            self.groups.iter().filter(|g| g.kind == GroupKind::Local).map(MoveGroup::depth).collect();
        let range = self
            .moves()
            .filter_map(|m| match m {
                MoveRecord::Permutation { range, .. } => Some(*range),
                _ => None,
            })
            .fold(0.0, f64::max);
        DepthReport {
            local_depth: local.iter().sum(),
            max_group_depth: local.iter().copied().max().unwrap_or(0),
            permutation_range: range,
            total_steps: self.groups.len(),
            total_moves: self.moves().count(),
        }
    }

    /// Replays the schedule on a copy of `lattice`.
    pub fn replay(&self, lattice: &SurfaceLattice) -> Result<SurfaceLattice> {
        self.check_input(lattice)?;
        let mut l = lattice.clone();
        for m in self.moves() {
            l.replay_in_place(m)?;
        }
        Ok(l)
    }

    /// Replays the schedule on a state; `after_group` is called after each
    /// group with the current lattice and state (for invariant checks).
    pub fn replay_state<T: Scalar>(
        &self,
        fusion: &FusionData<T>,
        lattice: &SurfaceLattice,
        state: &StringNetState<T>,
        mut after_group: impl FnMut(usize, &SurfaceLattice, &StringNetState<T>) -> Result<()>,
    ) -> Result<(StringNetState<T>, SurfaceLattice)> {
        self.check_input(lattice)?;
        let mut l = lattice.clone();
        let mut s = state.clone();
        for (gi, g) in self.groups.iter().enumerate() {
            for m in g.layers.iter().flatten() {
                let (s2, l2) = apply_move(fusion, &l, &s, m)?;
                s = s2;
                l = l2;
            }
            after_group(gi, &l, &s)?;
        }
        Ok((s, l))
    }

    fn check_input(&self, lattice: &SurfaceLattice) -> Result<()> {
        if lattice.version() != self.input_version {
            return Err(TvqError::VersionMismatch { state: self.input_version, lattice: lattice.version() });
        }
        Ok(())
    }

    /// Inverse schedule: groups and moves in reverse order, each inverted.
    /// Requires the lattice the schedule was applied to.
    pub fn inverse(&self, lattice: &SurfaceLattice) -> Result<MoveSchedule> {
        // Walk forward to recover the intermediate lattices needed to
        // express inverse moves.
        let mut l = lattice.clone();
        let mut inv_groups: Vec<MoveGroup> = Vec::new();
        for g in &self.groups {
            let mut inv_layers: Vec<Vec<MoveRecord>> = Vec::new();
            for layer in &g.layers {
                let mut inv_layer = Vec::new();
                for m in layer {
                    l.replay_in_place(m)?;
                    inv_layer.push(invert_record(m, &l)?);
                }
                inv_layers.push(inv_layer);
            }
            inv_layers.reverse();
            inv_groups.push(MoveGroup { kind: g.kind, label: format!("inverse of {}", g.label), layers: inv_layers });
        }
        inv_groups.reverse();
        Ok(MoveSchedule { input_version: l.version(), groups: inv_groups })
    }
}

/// Record of the move undoing `m`, expressed on the lattice `after` that
/// `m` produced.
fn invert_record(m: &MoveRecord, after: &SurfaceLattice) -> Result<MoveRecord> {
    let mut l = after.clone();
    match m {
        MoveRecord::FMove { edge, .. } => l.flip_in_place(*edge),
        MoveRecord::Pachner13 { vertex, .. } => l.merge_vertex_in_place(*vertex),
        MoveRecord::Pachner31 {
            triangle,
            vertex,
            corners,
            outer,
            outer_slots,
            new_edges,
            new_slots,
            new_triangles,
            position,
        } => l.replay_in_place(&MoveRecord::Pachner13 {
            triangle: *triangle,
            vertex: *vertex,
            corners: *corners,
            outer: *outer,
            outer_slots: *outer_slots,
            new_edges: *new_edges,
            new_slots: *new_slots,
            new_triangles: *new_triangles,
            position: *position,
        }),
        MoveRecord::LocalSwap { edges, .. } => l.swap_in_place(edges[0], edges[1]),
        MoveRecord::Permutation { .. } => {
            Err(TvqError::InvalidArgument("inverting a permutation group is not supported".into()))
        }
    }
}
