//! Sparse string-net states over branching-valid edge-label configurations,
//! the vertex and plaquette projectors of the Levin-Wen Hamiltonian, and the
//! exact amplitude-level action of Pachner moves and qubit permutations.
//!
//! Configurations are packed one bit per qubit slot (Fibonacci labels are
//! 0 = vacuum, 1 = τ).  Frozen boundary edges always carry the vacuum.  Bits
//! of slots not in use by the lattice are always zero.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, Write};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvqError};
use crate::fusion::FusionData;
use crate::lattice::{
    apply_cpi, pachner_13, pachner_22, pachner_31, EdgeId, MoveRecord, Slot, SlotMap, SurfaceLattice, TriangleId,
    VertexId,
};
use crate::scalar::Scalar;

/// Packed per-slot label word.
pub type Config = u128;

/// Largest usable slot id plus one.
pub const MAX_SLOTS: usize = 128;
/// Default amplitude cull threshold.
pub const DEFAULT_CULL: f64 = 1e-14;
/// Qubit-count guard for exhaustive enumeration of valid configurations.
pub const ENUMERATION_QUBIT_LIMIT: usize = 40;
/// Qubit-count guard for code-space dimension computations.
pub const CODE_SPACE_QUBIT_LIMIT: usize = 40;
/// Above this many valid configurations the code-space basis is seeded
/// with random vectors instead of basis configurations.
pub const BASIS_SEED_LIMIT: usize = 64;
/// Relative Gram-rank threshold.
pub const RANK_TOL: f64 = 1e-8;
/// Released-qubit weight allowed by a 3-1 move (relative to the state norm).
pub const RELEASE_TOL: f64 = 1e-10;

/// A sparse string-net state bound to a lattice version.
#[derive(Clone, Debug, PartialEq)]
pub struct StringNetState<T: Scalar> {
    lattice_version: u64,
    amps: BTreeMap<Config, Complex<T>>,
    tolerance: f64,
}

impl<T: Scalar> StringNetState<T> {
    /// The zero vector bound to `lattice`.
    pub fn zero(lattice: &SurfaceLattice) -> Self {
        StringNetState { lattice_version: lattice.version(), amps: BTreeMap::new(), tolerance: DEFAULT_CULL }
    }

    /// A single basis configuration with amplitude 1.
    pub fn basis(lattice: &SurfaceLattice, config: Config) -> Self {
        let mut s = Self::zero(lattice);
        s.amps.insert(config, Complex::new(T::one(), T::zero()));
        s
    }

    /// Builds a state from explicit amplitudes (entries below the cull
    /// threshold are dropped).
    pub fn from_amplitudes(lattice: &SurfaceLattice, amps: impl IntoIterator<Item = (Config, Complex<T>)>) -> Self {
        let mut s = Self::zero(lattice);
        for (c, a) in amps {
            *s.amps.entry(c).or_insert_with(Complex::default) += a;
        }
        s.cull();
        s
    }

    /// Lattice version the state is bound to.
    pub fn lattice_version(&self) -> u64 {
        self.lattice_version
    }

    /// Amplitude cull threshold.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Returns a copy with a different cull threshold.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self.cull();
        self
    }

    /// Stored (configuration, amplitude) pairs in ascending configuration order.
    pub fn amplitudes(&self) -> &BTreeMap<Config, Complex<T>> {
        &self.amps
    }

    /// Amplitude of one configuration.
    pub fn amplitude(&self, config: Config) -> Complex<T> {
        self.amps.get(&config).copied().unwrap_or_default()
    }

    /// Number of stored configurations.
    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> T {
        self.amps.values().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt()
    }

    /// Returns the state scaled by a complex factor.
    pub fn scaled(&self, k: Complex<T>) -> Self {
        let mut s = self.clone();
        for a in s.amps.values_mut() {
            *a *= k;
        }
        s.cull();
        s
    }

    /// Unit-norm copy (the zero vector stays zero).
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == T::zero() {
            return self.clone();
        }
        self.scaled(Complex::new(T::one() / n, T::zero()))
    }

    /// `self + k·other`.
    pub fn axpy(&self, k: Complex<T>, other: &Self) -> Result<Self> {
        check_same(self, other)?;
        let mut s = self.clone();
        for (c, a) in &other.amps {
            *s.amps.entry(*c).or_default() += *a * k;
        }
        s.cull();
        Ok(s)
    }

    /// Largest amplitude difference from another state.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: BTreeSet<Config> = self.amps.keys().chain(other.amps.keys()).copied().collect();
        keys.into_iter().map(|k| (self.amplitude(k) - other.amplitude(k)).norm().as_f64()).fold(0.0, f64::max)
    }

    fn cull(&mut self) {
        let tol = self.tolerance;
        self.amps.retain(|_, a| a.norm().as_f64() >= tol);
    }

    fn check_version(&self, lattice: &SurfaceLattice) -> Result<()> {
        if self.lattice_version != lattice.version() {
            return Err(TvqError::VersionMismatch { state: self.lattice_version, lattice: lattice.version() });
        }
        Ok(())
    }

    /// Re-expresses a state on `from` as a state on `to`, which must have the
    /// same structure (vertices, edges, slots, punctures, triangles).
    pub fn transport_to(&self, from: &SurfaceLattice, to: &SurfaceLattice) -> Result<Self> {
        self.check_version(from)?;
        if !from.same_structure(to) {
            return Err(TvqError::InvalidArgument("lattices differ in structure".into()));
        }
        Ok(self.clone().rebind(to))
    }

    fn rebind(mut self, lattice: &SurfaceLattice) -> Self {
        self.lattice_version = lattice.version();
        self.cull();
        self
    }
}

fn check_same<T: Scalar>(a: &StringNetState<T>, b: &StringNetState<T>) -> Result<()> {
    if a.lattice_version != b.lattice_version {
        return Err(TvqError::VersionMismatch { state: b.lattice_version, lattice: a.lattice_version });
    }
    Ok(())
}

fn check_fibonacci_like<T: Scalar>(fusion: &FusionData<T>) -> Result<()> {
    if fusion.num_labels() > 2 {
        return Err(TvqError::InvalidArgument("packed states support at most two labels per edge".into()));
    }
    Ok(())
}

fn check_slots(lattice: &SurfaceLattice) -> Result<()> {
    if lattice.slot_bound() > MAX_SLOTS {
        return Err(TvqError::SizeGuard { what: "qubit slot id", actual: lattice.slot_bound(), limit: MAX_SLOTS });
    }
    Ok(())
}

/// Label carried by a slot (frozen edges pass `None` and read the vacuum).
#[inline]
pub fn label(config: Config, slot: Option<Slot>) -> usize {
    match slot {
        Some(s) => ((config >> s) & 1) as usize,
        None => 0,
    }
}

#[inline]
fn set_label(config: Config, slot: Slot, v: usize) -> Config {
    (config & !(1u128 << slot)) | ((v as u128) << slot)
}

/// Label carried by an edge in a configuration.
pub fn edge_label(lattice: &SurfaceLattice, config: Config, edge: EdgeId) -> usize {
    label(config, lattice.edge(edge).and_then(|e| e.qubit))
}

/// Whether every dual vertex satisfies the branching rule.
pub fn is_branching_valid<T: Scalar>(fusion: &FusionData<T>, lattice: &SurfaceLattice, config: Config) -> bool {
    lattice.triangles().all(|t| triangle_valid(fusion, lattice, config, t.id))
}

fn triangle_valid<T: Scalar>(fusion: &FusionData<T>, lattice: &SurfaceLattice, config: Config, t: TriangleId) -> bool {
    let tri = lattice.triangle(t).expect("triangle exists");
    let l = tri.edges.map(|e| edge_label(lattice, config, e));
    fusion.branching(l[0], l[1], l[2])
}

/// All branching-valid configurations, ascending, by backtracking with
/// constraint propagation over triangles in breadth-first order.
pub fn enumerate_valid_configs<T: Scalar>(fusion: &FusionData<T>, lattice: &SurfaceLattice) -> Result<Vec<Config>> {
    check_fibonacci_like(fusion)?;
    check_slots(lattice)?;
    let nq = lattice.num_qubits();
    if nq > ENUMERATION_QUBIT_LIMIT {
        return Err(TvqError::SizeGuard { what: "qubit count", actual: nq, limit: ENUMERATION_QUBIT_LIMIT });
    }
    // Breadth-first triangle order for early pruning.
    let idx = lattice.edge_triangle_index();
    let mut order: Vec<TriangleId> = Vec::new();
    let mut seen: BTreeSet<TriangleId> = BTreeSet::new();
    for start in lattice.triangles().map(|t| t.id) {
        if !seen.insert(start) {
            continue;
        }
        let mut q = VecDeque::from([start]);
        while let Some(t) = q.pop_front() {
            order.push(t);
            for e in lattice.triangle(t).expect("exists").edges {
                for &n in &idx[&e] {
                    if seen.insert(n) {
                        q.push_back(n);
                    }
                }
            }
        }
    }
    let mut slot_order: Vec<Slot> = Vec::new();
    let mut pos: BTreeMap<Slot, usize> = BTreeMap::new();
    for &t in &order {
        for e in lattice.triangle(t).expect("exists").edges {
            if let Some(s) = lattice.edge(e).expect("exists").qubit {
                if let std::collections::btree_map::Entry::Vacant(e) = pos.entry(s) {
                    e.insert(slot_order.len());
                    slot_order.push(s);
                }
            }
        }
    }
    // Triangles checked once their last qubit is assigned.
    let mut checks: Vec<Vec<[Option<Slot>; 3]>> = vec![Vec::new(); slot_order.len()];
    for t in lattice.triangles() {
        let s = t.edges.map(|e| lattice.edge(e).expect("exists").qubit);
        match s.iter().flatten().map(|x| pos[x]).max() {
            Some(k) => checks[k].push(s),
            None => {
                if !fusion.branching(0, 0, 0) {
                    return Ok(vec![]);
                }
            }
        }
    }
    let mut out = Vec::new();
    fn rec<T: Scalar>(
        k: usize,
        cfg: Config,
        order: &[Slot],
        checks: &[Vec<[Option<Slot>; 3]>],
        fusion: &FusionData<T>,
        out: &mut Vec<Config>,
    ) {
        if k == order.len() {
            out.push(cfg);
            return;
        }
        for v in 0..fusion.num_labels() {
            let c = set_label(cfg, order[k], v);
            if checks[k].iter().all(|s| fusion.branching(label(c, s[0]), label(c, s[1]), label(c, s[2]))) {
                rec(k + 1, c, order, checks, fusion, out);
            }
        }
    }
    rec(0, 0, &slot_order, &checks, fusion, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Vertex projector `Q_v` at the dual vertex of triangle `t`.
pub fn apply_qv<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
    t: TriangleId,
) -> Result<StringNetState<T>> {
    state.check_version(lattice)?;
    if lattice.triangle(t).is_none() {
        return Err(TvqError::InvalidArgument(format!("triangle {t} does not exist")));
    }
    let mut s = state.clone();
    s.amps.retain(|&c, _| triangle_valid(fusion, lattice, c, t));
    Ok(s)
}

/// Applies every vertex projector.
pub fn apply_all_qv<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
) -> Result<StringNetState<T>> {
    state.check_version(lattice)?;
    let mut s = state.clone();
    s.amps.retain(|&c, _| is_branching_valid(fusion, lattice, c));
    Ok(s)
}

/// Plaquette projector `B_p = Σ_s (d_s/D²) B_p^s` around primal vertex `v`.
pub fn apply_bp<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
    v: VertexId,
) -> Result<StringNetState<T>> {
    state.check_version(lattice)?;
    check_fibonacci_like(fusion)?;
    if lattice.is_puncture(v) {
        return Err(TvqError::InvalidArgument(format!("plaquette {v} is a puncture")));
    }
    let plaq =
        lattice.plaquette(v).ok_or_else(|| TvqError::InvalidArgument(format!("vertex {v} has no closed plaquette")))?;
    let spokes: Vec<Slot> = plaq
        .spokes
        .iter()
        .map(|e| lattice.edge(*e).and_then(|e| e.qubit))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TvqError::InvalidArgument(format!("plaquette {v} has frozen spokes")))?;
    let legs: Vec<Option<Slot>> = plaq.legs.iter().map(|e| lattice.edge(*e).and_then(|e| e.qubit)).collect();
    let weights: Vec<T> = (0..fusion.num_labels()).map(|s| fusion.qdim(s) / fusion.total_dim_sq()).collect();
    let mut out: BTreeMap<Config, Complex<T>> = BTreeMap::new();
    let n = spokes.len();
    let pack = |v: &[usize]| v.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
    // The action depends only on the spoke and leg labels; cache it.
    let mut cache: HashMap<(u64, u64), Vec<(Vec<usize>, T)>> = HashMap::new();
    for (&cfg, &amp) in &state.amps {
        let x: Vec<usize> = spokes.iter().map(|&s| label(cfg, Some(s))).collect();
        let l: Vec<usize> = legs.iter().map(|&s| label(cfg, s)).collect();
        let terms = cache.entry((pack(&x), pack(&l))).or_insert_with(|| plaquette_terms(fusion, &weights, &x, &l));
        for (ys, coef) in terms.iter() {
            let mut c = cfg;
            for (k, &s) in spokes.iter().enumerate() {
                c = set_label(c, s, ys[k]);
            }
            *out.entry(c).or_default() += amp * *coef;
        }
    }
    debug_assert!(n > 0);
    let mut s = StringNetState { lattice_version: state.lattice_version, amps: out, tolerance: state.tolerance };
    s.cull();
    Ok(s)
}

/// Nonzero matrix elements `⟨y|B_p|x⟩` for fixed legs `l`: the sum over the
/// loop label `s` of `d_s/D²` times one F-symbol per corner of the plaquette,
/// the corner between spokes `i` and `i+1` contributing
/// `[F^{l_i x_i s}_{y_{i+1}}]_{x_{i+1} y_i}`.
fn plaquette_terms<T: Scalar>(fusion: &FusionData<T>, weights: &[T], x: &[usize], l: &[usize]) -> Vec<(Vec<usize>, T)> {
    let n = x.len();
    let nl = fusion.num_labels();
    let mut out = Vec::new();
    // Depth-first over y_0..y_{n-1} carrying one partial product per loop label.
    let mut stack: Vec<(Vec<usize>, Vec<T>)> = vec![(Vec::new(), weights.to_vec())];
    while let Some((ys, prod)) = stack.pop() {
        let i = ys.len();
        for y in (0..nl).rev() {
            let mut next = prod.clone();
            let mut any = false;
            for (s, f) in next.iter_mut().enumerate() {
                if *f == T::zero() {
                    continue;
                }
                if i > 0 {
                    *f *= fusion.fsym(l[i - 1], x[i - 1], s, y, x[i], ys[i - 1]);
                }
                if i == n - 1 {
                    *f *= fusion.fsym(l[n - 1], x[n - 1], s, ys.first().copied().unwrap_or(y), x[0], y);
                }
                any |= *f != T::zero();
            }
            if !any {
                continue;
            }
            let mut ys2 = ys.clone();
            ys2.push(y);
            if i == n - 1 {
                let total = next.iter().fold(T::zero(), |a, &b| a + b);
                if total != T::zero() {
                    out.push((ys2, total));
                }
            } else {
                stack.push((ys2, next));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Applies all vertex projectors, then every non-puncture plaquette
/// projector.  The result lies in the code space (it is not normalized).
pub fn ground_project<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
) -> Result<StringNetState<T>> {
    let mut s = apply_all_qv(fusion, lattice, state)?;
    for p in lattice.stabilized_plaquettes() {
        s = apply_bp(fusion, lattice, &s, p.vertex)?;
    }
    Ok(s)
}

/// Hermitian inner product `⟨a|b⟩`.
pub fn inner<T: Scalar>(a: &StringNetState<T>, b: &StringNetState<T>) -> Result<Complex<T>> {
    check_same(a, b)?;
    let (small, large, swap) = if a.amps.len() <= b.amps.len() { (a, b, false) } else { (b, a, true) };
    let mut acc = Complex::new(T::zero(), T::zero());
    for (c, x) in &small.amps {
        if let Some(y) = large.amps.get(c) {
            acc += if swap { y.conj() * x } else { x.conj() * y };
        }
    }
    Ok(acc)
}

/// A random state with independent Gaussian-like amplitudes on every
/// branching-valid configuration, normalized.
pub fn random_valid_state<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    rng: &mut impl Rng,
) -> Result<StringNetState<T>> {
    let configs = enumerate_valid_configs(fusion, lattice)?;
    let amps = configs.into_iter().map(|c| {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        (c, Complex::new(T::of(re), T::of(im)))
    });
    Ok(StringNetState::from_amplitudes(lattice, amps).normalized())
}

/// A random normalized code-space state.
pub fn random_code_state<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    rng: &mut impl Rng,
) -> Result<StringNetState<T>> {
    let s = random_valid_state(fusion, lattice, rng)?;
    Ok(ground_project(fusion, lattice, &s)?.normalized())
}

/// Orthonormal basis of the code space, built by Gram-Schmidt on
/// ground-projected seeds: every valid basis configuration when there are at
/// most [`BASIS_SEED_LIMIT`] of them, otherwise seeded random vectors until three
/// consecutive seeds add no new direction.
pub fn code_space_basis<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    seed: u64,
) -> Result<Vec<StringNetState<T>>> {
    let nq = lattice.num_qubits();
    if nq > CODE_SPACE_QUBIT_LIMIT {
        return Err(TvqError::SizeGuard { what: "qubit count", actual: nq, limit: CODE_SPACE_QUBIT_LIMIT });
    }
    let configs = enumerate_valid_configs(fusion, lattice)?;
    let mut basis: Vec<StringNetState<T>> = Vec::new();
    let try_add = |v: StringNetState<T>, basis: &mut Vec<StringNetState<T>>| -> Result<bool> {
        let p = ground_project(fusion, lattice, &v)?;
        let pn = p.norm().as_f64();
        if pn < 1e-12 {
            return Ok(false);
        }
        let mut w = p;
        for _ in 0..2 {
            for b in basis.iter() {
                let k = inner(b, &w)?;
                w = w.axpy(-k, b)?;
            }
        }
        let wn = w.norm().as_f64();
        if wn * wn > RANK_TOL * pn * pn {
            basis.push(w.normalized());
            Ok(true)
        } else {
            Ok(false)
        }
    };
    if configs.len() <= BASIS_SEED_LIMIT {
        for c in configs {
            try_add(StringNetState::basis(lattice, c), &mut basis)?;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut misses = 0;
        let mut tries = 0;
        while misses < 3 && tries < 256 {
            tries += 1;
            let amps = configs
                .iter()
                .map(|&c| (c, Complex::new(T::of(rng.gen_range(-1.0..1.0)), T::of(rng.gen_range(-1.0..1.0)))));
            let v = StringNetState::from_amplitudes(lattice, amps);
            if try_add(v, &mut basis)? {
                misses = 0;
            } else {
                misses += 1;
            }
        }
    }
    Ok(basis)
}

/// Dimension of the code space (numerical Gram rank of projected seeds).
pub fn code_space_dim<T: Scalar>(fusion: &FusionData<T>, lattice: &SurfaceLattice) -> Result<usize> {
    Ok(code_space_basis(fusion, lattice, 0)?.len())
}

/// 2-2 move at the amplitude level: `Ψ'(…f…) = Σ_e [F^{abc}_d]_{ef} Ψ(…e…)`.
pub fn apply_fmove<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
    edge: EdgeId,
) -> Result<(StringNetState<T>, SurfaceLattice)> {
    state.check_version(lattice)?;
    let (l, rec) = pachner_22(lattice, edge)?;
    let s = apply_record_amplitudes(fusion, state, &rec)?;
    Ok((s.rebind(&l), l))
}

/// 1-3 move at the amplitude level: the three new spokes are prepared in
/// the isometric image of the triangle's labels.
pub fn apply_pachner13<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
    triangle: TriangleId,
) -> Result<(StringNetState<T>, SurfaceLattice)> {
    state.check_version(lattice)?;
    check_slots(lattice)?;
    let (l, rec) = pachner_13(lattice, triangle)?;
    check_slots(&l)?;
    let s = apply_record_amplitudes(fusion, state, &rec)?;
    Ok((s.rebind(&l), l))
}

/// 3-1 move: projects the three spokes onto the isometry column and
/// releases them; fails if the state is not locally in the code space.
pub fn apply_pachner31<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
    vertex: VertexId,
) -> Result<(StringNetState<T>, SurfaceLattice)> {
    state.check_version(lattice)?;
    let (l, rec) = pachner_31(lattice, vertex)?;
    let s = apply_record_amplitudes(fusion, state, &rec)?;
    Ok((s.rebind(&l), l))
}

/// Relabels qubits by a connectivity-preserving isomorphism onto `target`.
pub fn apply_state_permutation<T: Scalar>(
    state: &StringNetState<T>,
    lattice: &SurfaceLattice,
    sigma: &SlotMap,
    target: &SurfaceLattice,
) -> Result<(StringNetState<T>, SurfaceLattice)> {
    state.check_version(lattice)?;
    let (l, rec) = apply_cpi(lattice, sigma, target)?;
    check_slots(&l)?;
    let s = permute_amplitudes(
        state,
        match &rec {
            MoveRecord::Permutation { slot_map, .. } => slot_map,
            _ => unreachable!("apply_cpi returns a permutation record"),
        },
    );
    Ok((s.rebind(&l), l))
}

fn permute_amplitudes<T: Scalar>(state: &StringNetState<T>, sigma: &SlotMap) -> StringNetState<T> {
    let mut out = BTreeMap::new();
    for (&c, &a) in &state.amps {
        let mut n: Config = 0;
        for (&s, &t) in sigma {
            n |= ((c >> s) & 1) << t;
        }
        out.insert(n, a);
    }
    StringNetState { lattice_version: state.lattice_version, amps: out, tolerance: state.tolerance }
}

/// Amplitude of the 1-3 isometry column: `⟨x y z| V |A B C⟩`, conjugated as
/// written for non-real data.
pub fn split_coefficient<T: Scalar>(fusion: &FusionData<T>, outer: [usize; 3], spokes: [usize; 3]) -> Complex<T> {
    let [a, b, c] = outer;
    let [x, y, z] = spokes;
    let f = fusion.fsym(a, b, x, y, c, z);
    if f == T::zero() {
        return Complex::default();
    }
    let k = (fusion.qdim(x) * fusion.qdim(y) / fusion.qdim(c)).sqrt() / fusion.total_dim();
    Complex::new(f * k, T::zero()).conj()
}

/// Applies the amplitude transformation of a recorded move.  The caller is
/// responsible for rewriting the lattice and rebinding the version.
pub fn apply_record_amplitudes<T: Scalar>(
    fusion: &FusionData<T>,
    state: &StringNetState<T>,
    record: &MoveRecord,
) -> Result<StringNetState<T>> {
    check_fibonacci_like(fusion)?;
    let nl = fusion.num_labels();
    let mut out: BTreeMap<Config, Complex<T>> = BTreeMap::new();
    match record {
        MoveRecord::FMove { slot, leg_slots, .. } => {
            let s = slot.ok_or_else(|| TvqError::MoveRejected("flipped edge has no qubit".into()))?;
            for (&c, &a) in &state.amps {
                let l = leg_slots.map(|ls| label(c, ls));
                let e = label(c, Some(s));
                for f in 0..nl {
                    let k = fusion.fsym(l[0], l[1], l[2], l[3], e, f);
                    if k != T::zero() {
                        *out.entry(set_label(c, s, f)).or_default() += a * k;
                    }
                }
            }
        }
        MoveRecord::Pachner13 { outer_slots, new_slots, .. } => {
            for (&c, &a) in &state.amps {
                if new_slots.iter().any(|&s| label(c, Some(s)) != 0) {
                    return Err(TvqError::VerificationFailed("ancilla slots of a 1-3 move are not in |0⟩".into()));
                }
                let o = outer_slots.map(|s| label(c, s));
                for x in 0..nl {
                    for y in 0..nl {
                        for z in 0..nl {
                            let k = split_coefficient(fusion, o, [x, y, z]).conj();
                            if k != Complex::default() {
                                let mut n = set_label(c, new_slots[0], x);
                                n = set_label(n, new_slots[1], y);
                                n = set_label(n, new_slots[2], z);
                                *out.entry(n).or_default() += a * k;
                            }
                        }
                    }
                }
            }
        }
        MoveRecord::Pachner31 { outer_slots, new_slots, .. } => {
            let mut before = T::zero();
            for (&c, &a) in &state.amps {
                before += a.norm_sqr();
                let o = outer_slots.map(|s| label(c, s));
                let sp = new_slots.map(|s| label(c, Some(s)));
                let k = split_coefficient(fusion, o, sp);
                if k != Complex::default() {
                    let mut n = c;
                    for &s in new_slots {
                        n = set_label(n, s, 0);
                    }
                    *out.entry(n).or_default() += a * k;
                }
            }
            let after = out.values().fold(T::zero(), |acc, a| acc + a.norm_sqr());
            let residual = if before > T::zero() { ((before - after) / before).as_f64() } else { 0.0 };
            if residual.abs() > RELEASE_TOL {
                return Err(TvqError::ResidualEntanglement { residual, threshold: RELEASE_TOL });
            }
        }
        MoveRecord::LocalSwap { slots, .. } => {
            let sigma: SlotMap = [(slots[0], slots[1]), (slots[1], slots[0])].into_iter().collect();
            for (&c, &a) in &state.amps {
                let mut n = c & !((1u128 << slots[0]) | (1u128 << slots[1]));
                for (&s, &t) in &sigma {
                    n |= ((c >> s) & 1) << t;
                }
                out.insert(n, a);
            }
        }
        MoveRecord::Permutation { slot_map, .. } => {
            return Ok(permute_amplitudes(state, slot_map));
        }
    }
    let mut s = StringNetState { lattice_version: state.lattice_version, amps: out, tolerance: state.tolerance };
    s.cull();
    Ok(s)
}

/// Replays a recorded move on both the lattice and the state.
pub fn apply_move<T: Scalar>(
    fusion: &FusionData<T>,
    lattice: &SurfaceLattice,
    state: &StringNetState<T>,
    record: &MoveRecord,
) -> Result<(StringNetState<T>, SurfaceLattice)> {
    state.check_version(lattice)?;
    let mut l = lattice.clone();
    let rec = l.replay_in_place(record)?;
    check_slots(&l)?;
    let s = apply_record_amplitudes(fusion, state, &rec)?;
    Ok((s.rebind(&l), l))
}

// ----------------------------------------------------------------------
// Snapshot format
// ----------------------------------------------------------------------

/// Header line of a state snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub lattice_version: u64,
    pub edge_count: usize,
    pub tolerance: f64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    config: String,
    re: f64,
    im: f64,
}

/// Writes a JSON-lines snapshot: one header, then one line per amplitude in
/// ascending configuration order.
pub fn write_snapshot<T: Scalar>(state: &StringNetState<T>, lattice: &SurfaceLattice, mut w: impl Write) -> Result<()> {
    state.check_version(lattice)?;
    let io = |e: std::io::Error| TvqError::Io { path: "<snapshot>".into(), source: e };
    let header = SnapshotHeader {
        lattice_version: state.lattice_version,
        edge_count: lattice.num_edges(),
        tolerance: state.tolerance,
    };
    writeln!(w, "{}", serde_json::to_string(&header)?).map_err(io)?;
    for (c, a) in &state.amps {
        let line = SnapshotLine { config: format!("{c:x}"), re: a.re.as_f64(), im: a.im.as_f64() };
        writeln!(w, "{}", serde_json::to_string(&line)?).map_err(io)?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot<T: Scalar>(r: impl BufRead) -> Result<(SnapshotHeader, StringNetState<T>)> {
    let mut lines = r.lines();
    let io = |e: std::io::Error| TvqError::Io { path: "<snapshot>".into(), source: e };
    let first = lines.next().ok_or_else(|| TvqError::Format("empty snapshot".into()))?.map_err(io)?;
    let header: SnapshotHeader = serde_json::from_str(&first)?;
    let mut amps = BTreeMap::new();
    for line in lines {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let l: SnapshotLine = serde_json::from_str(&line)?;
        let c = Config::from_str_radix(&l.config, 16)
            .map_err(|e| TvqError::Format(format!("bad configuration {:?}: {e}", l.config)))?;
        amps.insert(c, Complex::new(T::of(l.re), T::of(l.im)));
    }
    let state = StringNetState { lattice_version: header.lattice_version, amps, tolerance: header.tolerance };
    Ok((header, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_honeycomb_torus, build_planar_patch, build_theta_sphere};

    fn fib() -> FusionData<f64> {
        FusionData::fibonacci()
    }

    #[test]
    fn theta_configs() {
        let l = build_theta_sphere();
        let c = enumerate_valid_configs(&fib(), &l).unwrap();
        assert_eq!(c, vec![0b000, 0b011, 0b101, 0b110, 0b111]);
    }

    #[test]
    fn theta_dim_one() {
        assert_eq!(code_space_dim(&fib(), &build_theta_sphere()).unwrap(), 1);
    }

    #[test]
    fn bp_projector_on_torus() {
        let f = fib();
        let l = build_honeycomb_torus(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_valid_state(&f, &l, &mut rng).unwrap();
        for p in l.plaquettes() {
            let a = apply_bp(&f, &l, &s, p.vertex).unwrap();
            let b = apply_bp(&f, &l, &a, p.vertex).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-10);
        }
    }

    #[test]
    fn split_column_is_unit_and_rotation_invariant() {
        let f = fib();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    if !f.branching(a, b, c) {
                        continue;
                    }
                    let mut n = 0.0;
                    for x in 0..2 {
                        for y in 0..2 {
                            for z in 0..2 {
                                let k = split_coefficient(&f, [a, b, c], [x, y, z]);
                                let r = split_coefficient(&f, [b, c, a], [y, z, x]);
                                assert!((k - r).norm() < 1e-14, "{a}{b}{c} {x}{y}{z}");
                                n += k.norm_sqr();
                            }
                        }
                    }
                    assert!((n - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn split_then_merge_restores() {
        let f = fib();
        let l = build_planar_patch(4, 4, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_code_state(&f, &l, &mut rng).unwrap();
        let t = l.triangles().nth(4).unwrap().id;
        let (s2, l2) = apply_pachner13(&f, &l, &s, t).unwrap();
        assert!((s2.norm() - 1.0).abs() < 1e-12);
        let m = l2.vertices().map(|v| v.id).max().unwrap();
        let (s3, l3) = apply_pachner31(&f, &l2, &s2, m).unwrap();
        assert!(l3.same_structure(&l));
        let s3 = StringNetState { lattice_version: s.lattice_version(), ..s3 };
        assert!(s3.max_abs_diff(&s) < 1e-10);
    }
}
