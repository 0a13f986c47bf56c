//! Fusion-category data: labels, quantum dimensions, branching rules and
//! F-symbols, together with self-consistency checks.
//!
//! F-symbols are indexed as `fsym(a, b, c, d, e, f) = [F^{abc}_d]_{ef}`: the
//! amplitude relating the fusion tree `((a b)_e c)_d` to `(a (b c)_f)_d`.  The
//! entry vanishes unless the triples `(a,b,e)`, `(e,c,d)`, `(b,c,f)` and
//! `(a,f,d)` are all admissible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvqError};
use crate::scalar::{golden_ratio, Scalar};

/// Tolerance used by the shipped self-checks.
pub const FUSION_TOL: f64 = 1e-12;

/// Immutable multiplicity-free, self-dual fusion category data.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionData<T: Scalar> {
    num_labels: usize,
    qdim: Vec<T>,
    branching: Vec<bool>,
    fsym: Vec<T>,
    total_dim_sq: T,
}

impl<T: Scalar> FusionData<T> {
    /// Builds category data from raw tables, checking shapes and that the
    /// F-tensor vanishes on inadmissible index sets.
    ///
    /// `branching` has `n³` entries in row-major `(a,b,c)` order and `fsym`
    /// has `n⁶` entries in row-major `(a,b,c,d,e,f)` order.
    pub fn from_tables(qdim: Vec<T>, branching: Vec<bool>, fsym: Vec<T>) -> Result<Self> {
        let n = qdim.len();
        if n == 0 {
            return Err(TvqError::InvalidArgument("a category needs at least one label".into()));
        }
        if branching.len() != n.pow(3) {
            return Err(TvqError::InvalidArgument(format!(
                "branching table has {} entries, expected {}",
                branching.len(),
                n.pow(3)
            )));
        }
        if fsym.len() != n.pow(6) {
            return Err(TvqError::InvalidArgument(format!(
                "F-tensor has {} entries, expected {}",
                fsym.len(),
                n.pow(6)
            )));
        }
        let total_dim_sq = qdim.iter().fold(T::zero(), |acc, &d| acc + d * d);
        let data = FusionData { num_labels: n, qdim, branching, fsym, total_dim_sq };
        for idx in 0..n.pow(6) {
            let [a, b, c, d, e, f] = data.unflatten6(idx);
            if !data.f_admissible(a, b, c, d, e, f) && data.fsym[idx] != T::zero() {
                return Err(TvqError::InvalidArgument(format!(
                    "F-symbol ({a},{b},{c},{d},{e},{f}) is nonzero on an inadmissible index set"
                )));
            }
        }
        Ok(data)
    }

    /// The Fibonacci category: labels {0 = vacuum, 1 = τ}, `τ × τ = 1 + τ`.
    pub fn fibonacci() -> Self {
        let phi = golden_ratio::<T>();
        let n = 2;
        let mut branching = vec![false; n * n * n];
        for (a, b, c) in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)] {
            branching[(a * n + b) * n + c] = true;
        }
        let inv_phi = T::one() / phi;
        let inv_sqrt_phi = T::one() / phi.sqrt();
        let mut data = FusionData {
            num_labels: n,
            qdim: vec![T::one(), phi],
            branching,
            fsym: vec![T::zero(); n.pow(6)],
            total_dim_sq: T::one() + phi * phi,
        };
        for idx in 0..n.pow(6) {
            let [a, b, c, d, e, f] = data.unflatten6(idx);
            if !data.f_admissible(a, b, c, d, e, f) {
                continue;
            }
            data.fsym[idx] = if (a, b, c, d) == (1, 1, 1, 1) {
                match (e, f) {
                    (0, 0) => inv_phi,
                    (1, 1) => -inv_phi,
                    _ => inv_sqrt_phi,
                }
            } else {
                T::one()
            };
        }
        data
    }

    /// The trivial category with a single (vacuum) label.
    pub fn trivial() -> Self {
        FusionData {
            num_labels: 1,
            qdim: vec![T::one()],
            branching: vec![true],
            fsym: vec![T::one()],
            total_dim_sq: T::one(),
        }
    }

    /// Number of string labels.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Quantum dimension `d_s`.
    pub fn qdim(&self, s: usize) -> T {
        self.qdim[s]
    }

    /// All quantum dimensions.
    pub fn qdims(&self) -> &[T] {
        &self.qdim
    }

    /// `D² = Σ_s d_s²`.
    pub fn total_dim_sq(&self) -> T {
        self.total_dim_sq
    }

    /// Total quantum dimension `D`.
    pub fn total_dim(&self) -> T {
        self.total_dim_sq.sqrt()
    }

    /// Branching rule `δ_abc`.
    pub fn branching(&self, a: usize, b: usize, c: usize) -> bool {
        let n = self.num_labels;
        a < n && b < n && c < n && self.branching[(a * n + b) * n + c]
    }

    /// `[F^{abc}_d]_{ef}`.
    pub fn fsym(&self, a: usize, b: usize, c: usize, d: usize, e: usize, f: usize) -> T {
        self.fsym[self.flatten6([a, b, c, d, e, f])]
    }

    /// Whether the four triples attached to an F-symbol are admissible.
    pub fn f_admissible(&self, a: usize, b: usize, c: usize, d: usize, e: usize, f: usize) -> bool {
        self.branching(a, b, e) && self.branching(e, c, d) && self.branching(b, c, f) && self.branching(a, f, d)
    }

    /// Returns a copy with one F-symbol overwritten (for perturbation tests
    /// and for loading externally edited data).
    pub fn with_fsym(mut self, idx: [usize; 6], value: T) -> Self {
        let i = self.flatten6(idx);
        self.fsym[i] = value;
        self
    }

    /// Admissible `(e, f)` index sets of the block `[F^{abc}_d]`.
    pub fn block_indices(&self, a: usize, b: usize, c: usize, d: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.num_labels;
        let es = (0..n).filter(|&e| self.branching(a, b, e) && self.branching(e, c, d)).collect();
        let fs = (0..n).filter(|&f| self.branching(b, c, f) && self.branching(a, f, d)).collect();
        (es, fs)
    }

    fn flatten6(&self, idx: [usize; 6]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.num_labels + i)
    }

    fn unflatten6(&self, mut flat: usize) -> [usize; 6] {
        let n = self.num_labels;
        let mut out = [0; 6];
        for slot in out.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
        out
    }

    /// Largest deviation of `F Fᵀ` (and `Fᵀ F`) from the identity over all
    /// admissible blocks; a block whose admissible row and column sets differ
    /// in size counts as a deviation of 1.
    pub fn f_unitarity_residual(&self) -> f64 {
        let n = self.num_labels;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let (es, fs) = self.block_indices(a, b, c, d);
                        if es.len() != fs.len() {
                            worst = worst.max(1.0);
                            continue;
                        }
                        for &e1 in &es {
                            for &e2 in &es {
                                let s = fs.iter().fold(T::zero(), |acc, &f| {
                                    acc + self.fsym(a, b, c, d, e1, f) * self.fsym(a, b, c, d, e2, f)
                                });
                                let target = if e1 == e2 { T::one() } else { T::zero() };
                                worst = worst.max((s - target).abs().as_f64());
                            }
                        }
                        for &f1 in &fs {
                            for &f2 in &fs {
                                let s = es.iter().fold(T::zero(), |acc, &e| {
                                    acc + self.fsym(a, b, c, d, e, f1) * self.fsym(a, b, c, d, e, f2)
                                });
                                let target = if f1 == f2 { T::one() } else { T::zero() };
                                worst = worst.max((s - target).abs().as_f64());
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    /// `(d_0/D, d_1/D, …)`: the image of the vacuum under the modular S
    /// preparation used to grow a tadpole loop.
    pub fn vacuum_s_vector(&self) -> Vec<T> {
        let dd = self.total_dim();
        self.qdim.iter().map(|&d| d / dd).collect()
    }

    /// Largest disagreement between any two move sequences of length at most
    /// `max_len` that connect the same pair of four-leaf fusion trees.
    pub fn pentagon_residual(&self, max_len: usize) -> f64 {
        pentagon::max_residual(self, max_len)
    }

    /// Serializable snapshot of the category data.
    pub fn to_dump(&self) -> FusionDump {
        let n = self.num_labels;
        let mut branching = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.branching(a, b, c) {
                        branching.push([a, b, c]);
                    }
                }
            }
        }
        let nested = |a: usize, b: usize, c: usize, d: usize, e: usize| -> Vec<f64> {
            (0..n).map(|f| self.fsym(a, b, c, d, e, f).as_f64()).collect()
        };
        let fsym = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        (0..n)
                            .map(|c| (0..n).map(|d| (0..n).map(|e| nested(a, b, c, d, e)).collect()).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        FusionDump {
            labels: (0..n).collect(),
            qdim: self.qdim.iter().map(|q| q.as_f64()).collect(),
            branching,
            fsym,
            total_dim_sq: self.total_dim_sq.as_f64(),
        }
    }

    /// Rebuilds category data from a snapshot.
    pub fn from_dump(dump: &FusionDump) -> Result<Self> {
        let n = dump.labels.len();
        if dump.qdim.len() != n {
            return Err(TvqError::Format("qdim length differs from label count".into()));
        }
        let mut branching = vec![false; n.pow(3)];
        for &[a, b, c] in &dump.branching {
            if a >= n || b >= n || c >= n {
                return Err(TvqError::Format(format!("branching triple ({a},{b},{c}) out of range")));
            }
            branching[(a * n + b) * n + c] = true;
        }
        let mut fsym = Vec::with_capacity(n.pow(6));
        let shape_err = || TvqError::Format("F-tensor does not have shape n^6".into());
        if dump.fsym.len() != n {
            return Err(shape_err());
        }
        for ta in &dump.fsym {
            if ta.len() != n {
                return Err(shape_err());
            }
            for tb in ta {
                if tb.len() != n {
                    return Err(shape_err());
                }
                for tc in tb {
                    if tc.len() != n {
                        return Err(shape_err());
                    }
                    for td in tc {
                        if td.len() != n {
                            return Err(shape_err());
                        }
                        for te in td {
                            if te.len() != n {
                                return Err(shape_err());
                            }
                            fsym.extend(te.iter().map(|&x| T::of(x)));
                        }
                    }
                }
            }
        }
        FusionData::from_tables(dump.qdim.iter().map(|&x| T::of(x)).collect(), branching, fsym)
    }
}

/// Returns true iff every admissible F-block is orthogonal within `1e-12`.
pub fn verify_f_unitarity<T: Scalar>(data: &FusionData<T>) -> bool {
    data.f_unitarity_residual() <= FUSION_TOL
}

/// Returns true iff all F-move sequences of length ≤ 5 between the same pair
/// of four-leaf fusion trees induce the same linear map within `1e-12`.
pub fn verify_pentagon_coherence<T: Scalar>(data: &FusionData<T>) -> bool {
    data.pentagon_residual(5) <= FUSION_TOL
}

/// `(d_s / D)_s`, a unit vector.
pub fn vacuum_s_vector<T: Scalar>(data: &FusionData<T>) -> Vec<T> {
    data.vacuum_s_vector()
}

/// JSON form of [`FusionData`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionDump {
    pub labels: Vec<usize>,
    pub qdim: Vec<f64>,
    pub branching: Vec<[usize; 3]>,
    /// Nested `fsym[a][b][c][d][e][f]`.
    pub fsym: Vec<Vec<Vec<Vec<Vec<Vec<f64>>>>>>,
    pub total_dim_sq: f64,
}

mod pentagon {
    //! Brute-force coherence check on the five bracketings of four leaves.

    use super::*;

    #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
    pub(super) enum Shape {
        Leaf(usize),
        Node(Box<Shape>, Box<Shape>),
    }

    #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
    enum Labeled {
        Leaf(usize),
        Node(Box<Labeled>, Box<Labeled>, usize),
    }

    /// A single associativity move at the node reached by `path`
    /// (`false` = left child).
    #[derive(Clone, Debug)]
    struct Move {
        path: Vec<bool>,
        forward: bool,
    }

    fn bracketings(lo: usize, hi: usize) -> Vec<Shape> {
        if hi - lo == 1 {
            return vec![Shape::Leaf(lo)];
        }
        let mut out = Vec::new();
        for mid in lo + 1..hi {
            for l in bracketings(lo, mid) {
                for r in bracketings(mid, hi) {
                    out.push(Shape::Node(Box::new(l.clone()), Box::new(r)));
                }
            }
        }
        out
    }

    fn moves_of(shape: &Shape, prefix: &mut Vec<bool>, out: &mut Vec<(Move, Shape)>, root: &Shape) {
        if let Shape::Node(l, r) = shape {
            if let Shape::Node(_, _) = **l {
                let m = Move { path: prefix.clone(), forward: true };
                let s = apply_shape(root, &m);
                out.push((m, s));
            }
            if let Shape::Node(_, _) = **r {
                let m = Move { path: prefix.clone(), forward: false };
                let s = apply_shape(root, &m);
                out.push((m, s));
            }
            prefix.push(false);
            moves_of(l, prefix, out, root);
            prefix.pop();
            prefix.push(true);
            moves_of(r, prefix, out, root);
            prefix.pop();
        }
    }

    fn apply_shape(s: &Shape, m: &Move) -> Shape {
        fn go(s: &Shape, path: &[bool], forward: bool) -> Shape {
            match (s, path.split_first()) {
                (Shape::Node(l, r), Some((&dir, rest))) => {
                    if dir {
                        Shape::Node(l.clone(), Box::new(go(r, rest, forward)))
                    } else {
                        Shape::Node(Box::new(go(l, rest, forward)), r.clone())
                    }
                }
                (Shape::Node(l, r), None) => {
                    if forward {
                        let Shape::Node(x, y) = &**l else { unreachable!("checked by caller") };
                        Shape::Node(x.clone(), Box::new(Shape::Node(y.clone(), r.clone())))
                    } else {
                        let Shape::Node(y, z) = &**r else { unreachable!("checked by caller") };
                        Shape::Node(Box::new(Shape::Node(l.clone(), y.clone())), z.clone())
                    }
                }
                (Shape::Leaf(_), _) => unreachable!("moves address internal nodes"),
            }
        }
        go(s, &m.path, m.forward)
    }

    fn label_of(t: &Labeled, leaves: &[usize]) -> usize {
        match t {
            Labeled::Leaf(i) => leaves[*i],
            Labeled::Node(_, _, x) => *x,
        }
    }

    fn basis<T: Scalar>(data: &FusionData<T>, s: &Shape, leaves: &[usize], root: usize) -> Vec<Labeled> {
        fn go<T: Scalar>(data: &FusionData<T>, s: &Shape, leaves: &[usize], label: usize) -> Vec<Labeled> {
            match s {
                Shape::Leaf(i) => {
                    if leaves[*i] == label {
                        vec![Labeled::Leaf(*i)]
                    } else {
                        vec![]
                    }
                }
                Shape::Node(l, r) => {
                    let n = data.num_labels();
                    let mut out = Vec::new();
                    for x in 0..n {
                        for y in 0..n {
                            if !data.branching(x, y, label) {
                                continue;
                            }
                            for lt in go(data, l, leaves, x) {
                                for rt in go(data, r, leaves, y) {
                                    out.push(Labeled::Node(Box::new(lt.clone()), Box::new(rt), label));
                                }
                            }
                        }
                    }
                    out
                }
            }
        }
        go(data, s, leaves, root)
    }

    fn apply_labeled<T: Scalar>(
        data: &FusionData<T>,
        t: &Labeled,
        path: &[bool],
        forward: bool,
        leaves: &[usize],
    ) -> Vec<(Labeled, T)> {
        match (t, path.split_first()) {
            (Labeled::Node(l, r, w), Some((&dir, rest))) => {
                if dir {
                    apply_labeled(data, r, rest, forward, leaves)
                        .into_iter()
                        .map(|(nr, c)| (Labeled::Node(l.clone(), Box::new(nr), *w), c))
                        .collect()
                } else {
                    apply_labeled(data, l, rest, forward, leaves)
                        .into_iter()
                        .map(|(nl, c)| (Labeled::Node(Box::new(nl), r.clone(), *w), c))
                        .collect()
                }
            }
            (Labeled::Node(l, r, w), None) => {
                let n = data.num_labels();
                let mut out = Vec::new();
                if forward {
                    let Labeled::Node(x, y, e) = &**l else { unreachable!("checked by caller") };
                    let (xl, yl, zl) = (label_of(x, leaves), label_of(y, leaves), label_of(r, leaves));
                    for f in 0..n {
                        let c = data.fsym(xl, yl, zl, *w, *e, f);
                        if c != T::zero() {
                            let inner = Labeled::Node(y.clone(), r.clone(), f);
                            out.push((Labeled::Node(x.clone(), Box::new(inner), *w), c));
                        }
                    }
                } else {
                    let Labeled::Node(y, z, f) = &**r else { unreachable!("checked by caller") };
                    let (xl, yl, zl) = (label_of(l, leaves), label_of(y, leaves), label_of(z, leaves));
                    for e in 0..n {
                        let c = data.fsym(xl, yl, zl, *w, e, *f);
                        if c != T::zero() {
                            let inner = Labeled::Node(l.clone(), y.clone(), e);
                            out.push((Labeled::Node(Box::new(inner), z.clone(), *w), c));
                        }
                    }
                }
                out
            }
            (Labeled::Leaf(_), _) => unreachable!("moves address internal nodes"),
        }
    }

    type LinearMap<T> = BTreeMap<Labeled, BTreeMap<Labeled, T>>;

    fn walk_map<T: Scalar>(data: &FusionData<T>, start: &[Labeled], walk: &[Move], leaves: &[usize]) -> LinearMap<T> {
        let mut out = BTreeMap::new();
        for b in start {
            let mut vec: BTreeMap<Labeled, T> = BTreeMap::new();
            vec.insert(b.clone(), T::one());
            for m in walk {
                let mut next: BTreeMap<Labeled, T> = BTreeMap::new();
                for (t, c) in &vec {
                    for (nt, k) in apply_labeled(data, t, &m.path, m.forward, leaves) {
                        *next.entry(nt).or_insert_with(T::zero) += *c * k;
                    }
                }
                vec = next;
            }
            out.insert(b.clone(), vec);
        }
        out
    }

    fn map_distance<T: Scalar>(a: &LinearMap<T>, b: &LinearMap<T>) -> f64 {
        let mut worst = 0.0f64;
        for (k, va) in a {
            let vb = &b[k];
            for (t, &x) in va {
                let y = vb.get(t).copied().unwrap_or_else(T::zero);
                worst = worst.max((x - y).abs().as_f64());
            }
            for (t, &y) in vb {
                if !va.contains_key(t) {
                    worst = worst.max(y.abs().as_f64());
                }
            }
        }
        worst
    }

    pub(super) fn max_residual<T: Scalar>(data: &FusionData<T>, max_len: usize) -> f64 {
        let shapes = bracketings(0, 4);
        // All walks (as move lists) grouped by (start, end) shape.
        let mut walks: BTreeMap<(Shape, Shape), Vec<Vec<Move>>> = BTreeMap::new();
        for s in &shapes {
            let mut frontier: Vec<(Shape, Vec<Move>)> = vec![(s.clone(), vec![])];
            for len in 0..=max_len {
                let mut next = Vec::new();
                for (cur, w) in &frontier {
                    walks.entry((s.clone(), cur.clone())).or_default().push(w.clone());
                    if len == max_len {
                        continue;
                    }
                    let mut ms = Vec::new();
                    moves_of(cur, &mut Vec::new(), &mut ms, cur);
                    for (m, ns) in ms {
                        let mut nw = w.clone();
                        nw.push(m);
                        next.push((ns, nw));
                    }
                }
                frontier = next;
            }
        }
        let n = data.num_labels();
        let mut worst = 0.0f64;
        for leaves_flat in 0..n.pow(4) {
            let leaves: Vec<usize> = (0..4).map(|i| (leaves_flat / n.pow(3 - i)) % n).collect();
            for root in 0..n {
                for ((start, _end), ws) in &walks {
                    let basis_start = basis(data, start, &leaves, root);
                    if basis_start.is_empty() || ws.len() < 2 {
                        continue;
                    }
                    let reference = walk_map(data, &basis_start, &ws[0], &leaves);
                    for w in &ws[1..] {
                        let m = walk_map(data, &basis_start, w, &leaves);
                        worst = worst.max(map_distance(&reference, &m));
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_ratio_identity() {
        let data = FusionData::<f64>::fibonacci();
        let phi = data.qdim(1);
        assert!((phi * phi - phi - 1.0).abs() < 1e-14);
        assert!((phi - 1.618_033_988_749_895).abs() < 1e-15);
    }

    #[test]
    fn exactly_five_admissible_triples_symmetric() {
        let data = FusionData::<f64>::fibonacci();
        let mut count = 0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let v = data.branching(a, b, c);
                    count += v as usize;
                    assert_eq!(v, data.branching(b, a, c));
                    assert_eq!(v, data.branching(a, c, b));
                    assert_eq!(v, data.branching(c, b, a));
                }
            }
        }
        assert_eq!(count, 5);
        assert!(data.branching(1, 1, 0));
        assert!(!data.branching(1, 0, 0));
    }

    #[test]
    fn nontrivial_block_entries() {
        let data = FusionData::<f64>::fibonacci();
        let phi = data.qdim(1);
        assert!((data.fsym(1, 1, 1, 1, 0, 0) - 1.0 / phi).abs() < 1e-15);
        assert!((data.fsym(1, 1, 1, 1, 1, 1) + 1.0 / phi).abs() < 1e-15);
        assert!((data.fsym(1, 1, 1, 1, 0, 1) - phi.powf(-0.5)).abs() < 1e-15);
        assert!((data.fsym(1, 1, 1, 1, 1, 0) - phi.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn vacuum_leg_entries_are_one() {
        let data = FusionData::<f64>::fibonacci();
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    for e in 0..2 {
                        for f in 0..2 {
                            if data.f_admissible(0, b, c, d, e, f) {
                                assert_eq!(data.fsym(0, b, c, d, e, f), 1.0);
                            } else {
                                assert_eq!(data.fsym(0, b, c, d, e, f), 0.0);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unitarity_and_perturbation() {
        let data = FusionData::<f64>::fibonacci();
        assert!(verify_f_unitarity(&data));
        let v = data.fsym(1, 1, 1, 1, 0, 1);
        let bad = data.clone().with_fsym([1, 1, 1, 1, 0, 1], v + 0.01);
        assert!(!verify_f_unitarity(&bad));
    }

    #[test]
    fn identity_blocks_are_orthogonal() {
        let fib = FusionData::<f64>::fibonacci();
        let mut data = fib.clone();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        for e in 0..2 {
                            for f in 0..2 {
                                if fib.f_admissible(a, b, c, d, e, f) {
                                    let v = if (a, b, c, d) == (1, 1, 1, 1) {
                                        if e == f {
                                            1.0
                                        } else {
                                            0.0
                                        }
                                    } else {
                                        1.0
                                    };
                                    data = data.with_fsym([a, b, c, d, e, f], v);
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(verify_f_unitarity(&data));
    }

    #[test]
    fn pentagon_holds_and_breaks_under_sign_flip() {
        let data = FusionData::<f64>::fibonacci();
        assert!(verify_pentagon_coherence(&data));
        let bad = data.clone().with_fsym([1, 1, 1, 1, 1, 1], 1.0 / data.qdim(1));
        assert!(!verify_pentagon_coherence(&bad));
    }

    #[test]
    fn trivial_category() {
        let data = FusionData::<f64>::trivial();
        assert!(verify_f_unitarity(&data));
        assert!(verify_pentagon_coherence(&data));
        assert_eq!(data.vacuum_s_vector(), vec![1.0]);
    }

    #[test]
    fn s_vector_values() {
        let data = FusionData::<f64>::fibonacci();
        let s = data.vacuum_s_vector();
        let phi = data.qdim(1);
        let dd = (1.0 + phi * phi).sqrt();
        assert!((s[0] - 1.0 / dd).abs() < 1e-15);
        assert!((s[1] - phi / dd).abs() < 1e-15);
        assert!((s[0] - 0.525_731_112_119_133_6).abs() < 1e-12);
        assert!((s[1] - 0.850_650_808_352_039_9).abs() < 1e-12);
        assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_precision_build() {
        let data = FusionData::<f32>::fibonacci();
        assert!(data.f_unitarity_residual() < 1e-6);
        assert!(data.pentagon_residual(5) < 1e-5);
    }

    #[test]
    fn dump_round_trip() {
        let data = FusionData::<f64>::fibonacci();
        let dump = data.to_dump();
        let json = serde_json::to_string(&dump).unwrap();
        let back: FusionDump = serde_json::from_str(&json).unwrap();
        let rebuilt = FusionData::<f64>::from_dump(&back).unwrap();
        assert_eq!(rebuilt, data);
    }
}
