//! Relations, Mal'tsev maps, and witness functions: the succinct
//! representation of a Mal'tsev-closed relation together with membership,
//! pinning, prefix projection, variable permutation, union, and splitting.
//!
//! A witness function ω maps each (coordinate, value) pair either to ⊥ or to
//! a member tuple carrying that value at that coordinate, such that tuples
//! for values sharing a coordinate-equivalence class agree on their prefix.
//! Everything here works through prefix-extension queries on ω plus splices
//! with the Mal'tsev map; no operation ever needs the explicit relation.

use crate::model::Budget;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaltsevError {
    #[error("map is not a polymorphism: {detail}")]
    NotPolymorphism { detail: String },
    #[error("relation not closed: φ applied to {triple:?} yields {image:?} outside the set")]
    NotClosed {
        triple: [Vec<u8>; 3],
        image: Vec<u8>,
    },
    #[error("parts are not disjoint: {tuple:?} appears in parts {first} and {second}")]
    PartsOverlap {
        tuple: Vec<u8>,
        first: usize,
        second: usize,
    },
    #[error("type-partition violation: {0}")]
    TypePartitionViolation(String),
    #[error("more than {limit} part labels observed")]
    TooManyParts { limit: usize },
    #[error("labeler query budget exceeded: used {used}, budget {budget}")]
    QueryBudgetExceeded { used: u64, budget: u64 },
    #[error("labeler failed on {tuple:?}: {msg}")]
    LabelerFailure { tuple: Vec<u8>, msg: String },
    #[error("operation requires a nonempty relation")]
    EmptyRelation,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Budget(#[from] crate::model::ModelError),
}

/// An explicit n-ary relation over the domain {0, …, d−1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub d: usize,
    pub arity: usize,
    pub tuples: BTreeSet<Vec<u8>>,
}

impl Relation {
    pub fn new(d: usize, arity: usize) -> Relation {
        Relation {
            d,
            arity,
            tuples: BTreeSet::new(),
        }
    }

    pub fn from_tuples(d: usize, arity: usize, tuples: impl IntoIterator<Item = Vec<u8>>) -> Relation {
        let set: BTreeSet<Vec<u8>> = tuples.into_iter().collect();
        for t in &set {
            assert_eq!(t.len(), arity);
            assert!(t.iter().all(|&a| (a as usize) < d));
        }
        Relation {
            d,
            arity,
            tuples: set,
        }
    }

    pub fn full(d: usize, arity: usize) -> Relation {
        let tuples = crate::model::Assignments::new(d, arity).collect::<BTreeSet<_>>();
        Relation { d, arity, tuples }
    }

    pub fn contains(&self, t: &[u8]) -> bool {
        self.tuples.contains(t)
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// A ternary map on the domain satisfying φ(a,b,b) = φ(b,b,a) = a.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaltsevMap {
    pub d: usize,
    table: Vec<u8>,
}

/// Checks the Mal'tsev identities on a raw d³ table.
pub fn is_maltsev(d: usize, table: &[u8]) -> bool {
    if table.len() != d * d * d {
        return false;
    }
    for a in 0..d as u8 {
        for b in 0..d as u8 {
            let abb = table[(a as usize * d + b as usize) * d + b as usize];
            let bba = table[(b as usize * d + b as usize) * d + a as usize];
            if abb != a || bba != a {
                return false;
            }
        }
    }
    true
}

impl MaltsevMap {
    pub fn from_table(d: usize, table: Vec<u8>) -> Option<MaltsevMap> {
        if is_maltsev(d, &table) {
            Some(MaltsevMap { d, table })
        } else {
            None
        }
    }

    pub fn apply(&self, a: u8, b: u8, c: u8) -> u8 {
        self.table[(a as usize * self.d + b as usize) * self.d + c as usize]
    }

    /// Coordinatewise application to three tuples.
    pub fn splice(&self, u: &[u8], v: &[u8], w: &[u8]) -> Vec<u8> {
        debug_assert!(u.len() == v.len() && v.len() == w.len());
        u.iter()
            .zip(v.iter())
            .zip(w.iter())
            .map(|((&a, &b), &c)| self.apply(a, b, c))
            .collect()
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    /// Parses lines of the form `a b c -> v`. Triples forced by the Mal'tsev
    /// identities may be omitted; conflicting or missing free triples are
    /// errors.
    pub fn parse(text: &str, d: usize) -> Result<MaltsevMap, MaltsevError> {
        let mut table: Vec<Option<u8>> = vec![None; d * d * d];
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line.split_once("->").ok_or_else(|| {
                MaltsevError::Unsupported(format!("line {}: expected \"a b c -> v\"", idx + 1))
            })?;
            let args: Result<Vec<u8>, _> = lhs.split_whitespace().map(|t| t.parse()).collect();
            let args = args.map_err(|_| {
                MaltsevError::Unsupported(format!("line {}: malformed triple", idx + 1))
            })?;
            let val: u8 = rhs.trim().parse().map_err(|_| {
                MaltsevError::Unsupported(format!("line {}: malformed value", idx + 1))
            })?;
            if args.len() != 3 || args.iter().any(|&a| a as usize >= d) || val as usize >= d {
                return Err(MaltsevError::Unsupported(format!(
                    "line {}: entries out of range for d = {d}",
                    idx + 1
                )));
            }
            let slot = (args[0] as usize * d + args[1] as usize) * d + args[2] as usize;
            if let Some(prev) = table[slot] {
                if prev != val {
                    return Err(MaltsevError::Unsupported(format!(
                        "line {}: conflicting assignment for {:?}",
                        idx + 1,
                        args
                    )));
                }
            }
            table[slot] = Some(val);
        }
        // Fill identities, checking conflicts.
        for a in 0..d as u8 {
            for b in 0..d as u8 {
                for (slot, forced) in [
                    ((a as usize * d + b as usize) * d + b as usize, a),
                    ((b as usize * d + b as usize) * d + a as usize, a),
                ] {
                    match table[slot] {
                        Some(v) if v != forced => {
                            return Err(MaltsevError::Unsupported(format!(
                                "table conflicts with the Mal'tsev identities at slot {slot}"
                            )));
                        }
                        _ => table[slot] = Some(forced),
                    }
                }
            }
        }
        let full: Option<Vec<u8>> = table.into_iter().collect();
        let full = full.ok_or_else(|| {
            MaltsevError::Unsupported("free triple missing from Mal'tsev map file".into())
        })?;
        MaltsevMap::from_table(d, full)
            .ok_or_else(|| MaltsevError::Unsupported("table violates the Mal'tsev identities".into()))
    }
}

impl fmt::Display for MaltsevMap {
    /// Prints the free triples only; identity-forced entries are implied.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.d as u8;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    if b == c || a == b {
                        continue;
                    }
                    writeln!(f, "{a} {b} {c} -> {}", self.apply(a, b, c))?;
                }
            }
        }
        Ok(())
    }
}

/// x ⊕ y ⊕ z on the Boolean domain, the canonical Mal'tsev map for d = 2.
pub fn xor3() -> MaltsevMap {
    let mut table = vec![0u8; 8];
    for a in 0..2u8 {
        for b in 0..2u8 {
            for c in 0..2u8 {
                table[(a as usize * 2 + b as usize) * 2 + c as usize] = a ^ b ^ c;
            }
        }
    }
    MaltsevMap::from_table(2, table).unwrap()
}

/// a − b + c mod 3, the affine Mal'tsev map for d = 3.
pub fn affine3() -> MaltsevMap {
    let mut table = vec![0u8; 27];
    for a in 0..3u8 {
        for b in 0..3u8 {
            for c in 0..3u8 {
                table[(a as usize * 3 + b as usize) * 3 + c as usize] = (a + 3 - b + c) % 3;
            }
        }
    }
    MaltsevMap::from_table(3, table).unwrap()
}

/// Finds a triple of tuples violating closure under φ, or None when φ is a
/// polymorphism. Cost is cubic in the relation size, counted against the
/// budget.
pub fn polymorphism_violation(
    phi: &MaltsevMap,
    rel: &Relation,
    budget: Budget,
) -> Result<Option<([Vec<u8>; 3], Vec<u8>)>, MaltsevError> {
    let m = rel.len() as u64;
    budget.check(m.saturating_mul(m).saturating_mul(m))?;
    let list: Vec<&Vec<u8>> = rel.tuples.iter().collect();
    for u in &list {
        for v in &list {
            for w in &list {
                let image = phi.splice(u, v, w);
                if !rel.contains(&image) {
                    return Ok(Some(([(*u).clone(), (*v).clone(), (*w).clone()], image)));
                }
            }
        }
    }
    Ok(None)
}

pub fn is_polymorphism(phi: &MaltsevMap, rel: &Relation, budget: Budget) -> Result<bool, MaltsevError> {
    Ok(polymorphism_violation(phi, rel, budget)?.is_none())
}

/// The closure of a relation under φ: least superset closed under
/// coordinatewise application. Idempotent and monotone.
pub fn closure(rel: &Relation, phi: &MaltsevMap, budget: Budget) -> Result<Relation, MaltsevError> {
    let mut set: BTreeSet<Vec<u8>> = rel.tuples.clone();
    let mut list: Vec<Vec<u8>> = set.iter().cloned().collect();
    let mut steps: u64 = 0;
    let mut next = 0;
    while next < list.len() {
        let t = list[next].clone();
        next += 1;
        // All triples in which t participates together with earlier tuples
        // (and itself); later tuples reach t again when their turn comes.
        for i in 0..next {
            for j in 0..next {
                steps += 3;
                if steps > budget.max_steps {
                    return Err(MaltsevError::Budget(crate::model::ModelError::BudgetExceeded {
                        needed: steps,
                        budget: budget.max_steps,
                    }));
                }
                let (u, v) = (&list[i], &list[j]);
                for image in [
                    phi.splice(&t, u, v),
                    phi.splice(u, &t, v),
                    phi.splice(u, v, &t),
                ] {
                    if set.insert(image.clone()) {
                        list.push(image);
                    }
                }
            }
        }
    }
    Ok(Relation {
        d: rel.d,
        arity: rel.arity,
        tuples: set,
    })
}

/// Enumerates every identity-respecting ternary table for the given domain in
/// lexicographic table order.
pub fn identity_respecting_tables(d: usize) -> impl Iterator<Item = MaltsevMap> {
    let free: Vec<usize> = {
        let mut out = Vec::new();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    if a != b && b != c {
                        out.push((a * d + b) * d + c);
                    }
                }
            }
        }
        out
    };
    let mut base = vec![0u8; d * d * d];
    for a in 0..d as u8 {
        for b in 0..d as u8 {
            base[(a as usize * d + b as usize) * d + b as usize] = a;
            base[(b as usize * d + b as usize) * d + a as usize] = a;
        }
    }
    let total: u64 = (d as u64).checked_pow(free.len() as u32).unwrap_or(0);
    (0..total).map(move |idx| {
        let mut table = base.clone();
        let mut rem = idx;
        // Most significant digit at the first free slot keeps table order
        // lexicographic.
        for k in (0..free.len()).rev() {
            table[free[k]] = (rem % d as u64) as u8;
            rem /= d as u64;
        }
        MaltsevMap { d, table }
    })
}

/// Searches for the lexicographically least Mal'tsev map that is a
/// polymorphism of every given relation. Enumerative for d ≤ 3; larger
/// domains must supply candidates.
pub fn search_shared_maltsev(
    relations: &[Relation],
    d: usize,
) -> Result<Option<MaltsevMap>, MaltsevError> {
    if d > 3 {
        return Err(MaltsevError::Unsupported(format!(
            "enumerative Mal'tsev search requires d ≤ 3, got {d}; supply candidates instead"
        )));
    }
    Ok(search_shared_maltsev_with(relations, identity_respecting_tables(d)))
}

pub fn search_shared_maltsev_with(
    relations: &[Relation],
    candidates: impl IntoIterator<Item = MaltsevMap>,
) -> Option<MaltsevMap> {
    let lists: Vec<Vec<&Vec<u8>>> = relations
        .iter()
        .map(|r| r.tuples.iter().collect())
        .collect();
    'cand: for phi in candidates {
        for (rel, list) in relations.iter().zip(lists.iter()) {
            for u in list {
                for v in list {
                    for w in list {
                        if !rel.contains(&phi.splice(u, v, w)) {
                            continue 'cand;
                        }
                    }
                }
            }
        }
        return Some(phi);
    }
    None
}

/// The succinct witness-function representation of a Mal'tsev-closed
/// relation, bound to its Mal'tsev map.
#[derive(Debug, Clone)]
pub struct WitnessFunction {
    arity: usize,
    d: usize,
    entries: Vec<Option<Vec<u8>>>,
    phi: MaltsevMap,
}

impl WitnessFunction {
    pub fn empty(d: usize, arity: usize, phi: MaltsevMap) -> WitnessFunction {
        assert!(arity >= 1);
        WitnessFunction {
            arity,
            d,
            entries: vec![None; arity * d],
            phi,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain_size(&self) -> usize {
        self.d
    }

    pub fn phi(&self) -> &MaltsevMap {
        &self.phi
    }

    pub fn get(&self, coordinate: usize, value: u8) -> Option<&Vec<u8>> {
        self.entries[coordinate * self.d + value as usize].as_ref()
    }

    fn set(&mut self, coordinate: usize, value: u8, witness: Vec<u8>) {
        debug_assert_eq!(witness[coordinate], value);
        self.entries[coordinate * self.d + value as usize] = Some(witness);
    }

    /// True when the represented relation has no members.
    pub fn represents_empty(&self) -> bool {
        (0..self.d).all(|a| self.entries[a].is_none())
    }

    /// Finds a member of the relation extending the given prefix, by the
    /// splice walk: maintain a member agreeing with the prefix on a growing
    /// front, merging witnesses with φ.
    pub fn extend_prefix(&self, prefix: &[u8]) -> Option<Vec<u8>> {
        debug_assert!(prefix.len() <= self.arity);
        let mut y: Vec<u8> = match prefix.first() {
            Some(&a) => self.get(0, a)?.clone(),
            None => {
                // Any member at all.
                return (0..self.d as u8).find_map(|a| self.get(0, a).cloned());
            }
        };
        for (i, &xi) in prefix.iter().enumerate().skip(1) {
            if y[i] == xi {
                continue;
            }
            let wx = self.get(i, xi)?;
            let wy = self
                .get(i, y[i])
                .expect("value of a member tuple is always witnessed");
            if wx[..i] != wy[..i] {
                return None;
            }
            y = self.phi.splice(wx, wy, &y);
            debug_assert_eq!(y[i], xi);
        }
        Some(y)
    }

    /// Membership test without the explicit relation.
    pub fn member(&self, x: &[u8]) -> bool {
        debug_assert_eq!(x.len(), self.arity);
        match self.extend_prefix(x) {
            Some(y) => {
                debug_assert_eq!(y, x);
                true
            }
            None => false,
        }
    }

    /// Materializes the represented relation by testing every tuple.
    pub fn enumerate(&self, budget: Budget) -> Result<Relation, MaltsevError> {
        budget.check(crate::model::count_assignments(self.d, self.arity))?;
        let tuples = crate::model::Assignments::new(self.d, self.arity)
            .filter(|t| self.member(t))
            .collect::<BTreeSet<_>>();
        Ok(Relation {
            d: self.d,
            arity: self.arity,
            tuples,
        })
    }

    /// Witness function of the prefix projection: truncate every stored
    /// witness. Coordinate equivalences below the cut coincide with the
    /// original relation's, so validity is preserved.
    pub fn project_prefix(&self, len: usize) -> WitnessFunction {
        assert!(len >= 1 && len <= self.arity);
        let mut out = WitnessFunction::empty(self.d, len, self.phi.clone());
        for i in 0..len {
            for a in 0..self.d as u8 {
                if let Some(w) = self.get(i, a) {
                    out.set(i, a, w[..len].to_vec());
                }
            }
        }
        out
    }

    /// Explicit listing of the prefix projection together with a lift of each
    /// member; refused above the given length limit.
    pub fn project_explicit(
        &self,
        len: usize,
        max_len: usize,
    ) -> Result<Vec<(Vec<u8>, Vec<u8>)>, MaltsevError> {
        if len > max_len {
            return Err(MaltsevError::Unsupported(format!(
                "explicit projection limited to length {max_len}, requested {len}"
            )));
        }
        assert!(len <= self.arity);
        let mut out = Vec::new();
        for p in crate::model::Assignments::new(self.d, len) {
            if let Some(lift) = self.extend_prefix(&p) {
                out.push((p, lift));
            }
        }
        Ok(out)
    }

    /// Witness function for the relation with adjacent coordinates j and j+1
    /// exchanged. Only prefix-window queries on the original are needed.
    fn swap_adjacent(&self, j: usize) -> WitnessFunction {
        let n = self.arity;
        let d = self.d;
        assert!(j + 1 < n);
        let swap = |t: &[u8]| -> Vec<u8> {
            let mut s = t.to_vec();
            s.swap(j, j + 1);
            s
        };
        let mut out = WitnessFunction::empty(d, n, self.phi.clone());
        // Untouched coordinates: swapping inside a witness preserves both the
        // carried value and prefix equality.
        for k in 0..n {
            if k == j || k == j + 1 {
                continue;
            }
            for a in 0..d as u8 {
                if let Some(w) = self.get(k, a) {
                    out.set(k, a, swap(w));
                }
            }
        }
        // New coordinate j carries the old coordinate j+1 values.
        let mut assigned = vec![false; d];
        for b in 0..d as u8 {
            if assigned[b as usize] {
                continue;
            }
            let Some(w) = self.get(j + 1, b) else { continue };
            let x = &w[..j];
            // Window over the two swapped positions under the fixed prefix x.
            let mut window: BTreeMap<(u8, u8), Vec<u8>> = BTreeMap::new();
            for c in 0..d as u8 {
                for e in 0..d as u8 {
                    let mut p = x.to_vec();
                    p.push(c);
                    p.push(e);
                    if let Some(t) = self.extend_prefix(&p) {
                        window.insert((c, e), t);
                    }
                }
            }
            for ((_, e), t) in &window {
                if !assigned[*e as usize] {
                    assigned[*e as usize] = true;
                    out.set(j, *e, swap(t));
                }
            }
            debug_assert!(assigned[b as usize]);
        }
        // New coordinate j+1 carries the old coordinate j values.
        let mut assigned = vec![false; d];
        for a in 0..d as u8 {
            if assigned[a as usize] {
                continue;
            }
            let Some(w) = self.get(j, a) else { continue };
            let x = &w[..j];
            let e0 = w[j + 1];
            let mut window: BTreeMap<(u8, u8), Vec<u8>> = BTreeMap::new();
            for c in 0..d as u8 {
                for e in 0..d as u8 {
                    let mut p = x.to_vec();
                    p.push(c);
                    p.push(e);
                    if let Some(t) = self.extend_prefix(&p) {
                        window.insert((c, e), t);
                    }
                }
            }
            assigned[a as usize] = true;
            out.set(j + 1, a, swap(w));
            for a2 in 0..d as u8 {
                if assigned[a2 as usize] {
                    continue;
                }
                // a2 joins a's class when they extend a common value under x.
                let shared = (0..d as u8).find(|&e| {
                    window.contains_key(&(a2, e)) && window.contains_key(&(a, e))
                });
                if let Some(e) = shared {
                    let y1 = &window[&(a2, e)];
                    let y2 = &window[&(a, e)];
                    let z = self.phi.splice(y1, y2, w);
                    debug_assert_eq!(z[j], a2);
                    debug_assert_eq!(z[j + 1], e0);
                    assigned[a2 as usize] = true;
                    out.set(j + 1, a2, swap(&z));
                }
            }
        }
        out
    }

    /// Witness function for the relation with coordinates rearranged so that
    /// position i of the result carries source coordinate perm[i]. Built as a
    /// chain of adjacent transpositions.
    pub fn permute(&self, perm: &[usize]) -> WitnessFunction {
        assert_eq!(perm.len(), self.arity);
        let mut current: Vec<usize> = (0..self.arity).collect();
        let mut out = self.clone();
        for i in 0..self.arity {
            let p = current[i..]
                .iter()
                .position(|&s| s == perm[i])
                .expect("perm must be a permutation")
                + i;
            for q in (i..p).rev() {
                out = out.swap_adjacent(q);
                current.swap(q, q + 1);
            }
        }
        out
    }

    /// Witness function of the relation with its first coordinates pinned to
    /// the given values. Pinning an unreachable value yields the empty
    /// witness function. The prefix must be shorter than the arity.
    pub fn pin(&self, prefix: &[u8]) -> WitnessFunction {
        assert!(prefix.len() < self.arity, "pinning must leave coordinates free");
        let mut cur = self.clone();
        for &a in prefix {
            cur = cur.pin_front(a);
        }
        cur
    }

    fn pin_front(&self, front: u8) -> WitnessFunction {
        let n = self.arity;
        let d = self.d;
        assert!(n >= 2);
        let mut out = WitnessFunction::empty(d, n - 1, self.phi.clone());
        if self.get(0, front).is_none() {
            return out;
        }
        // Result coordinate 0 (= source coordinate 1): all values reachable
        // under the pin share the empty prefix, so no alignment is needed.
        for b in 0..d as u8 {
            if let Some(t) = self.extend_prefix(&[front, b]) {
                out.set(0, b, t[1..].to_vec());
            }
        }
        // Result coordinate i−1 (= source coordinate i ≥ 2): bring i to
        // position 1 so that reachability becomes a pair-prefix query, then
        // align witnesses within the original coordinate classes.
        for i in 2..n {
            let mut perm: Vec<usize> = Vec::with_capacity(n);
            perm.push(0);
            perm.push(i);
            perm.extend((1..n).filter(|&k| k != i));
            let rotated = self.permute(&perm);
            // Values reachable jointly with the pin, with a raw witness each.
            let mut found: BTreeMap<u8, Vec<u8>> = BTreeMap::new();
            for b in 0..d as u8 {
                if let Some(t) = rotated.extend_prefix(&[front, b]) {
                    // Un-permute back to source coordinates.
                    let mut orig = vec![0u8; n];
                    for (pos, &src) in perm.iter().enumerate() {
                        orig[src] = t[pos];
                    }
                    found.insert(b, orig);
                }
            }
            // Group by the source relation's coordinate classes (witness
            // prefix equality), then align each class onto its least member.
            let mut grouped: BTreeMap<Vec<u8>, Vec<u8>> = BTreeMap::new();
            for (&b, _) in &found {
                let key = self.get(i, b).expect("reachable value is witnessed")[..i].to_vec();
                grouped.entry(key).or_default().push(b);
            }
            for (_, members) in grouped {
                let rep = members[0];
                let base = &found[&rep];
                out.set(i - 1, rep, base[1..].to_vec());
                for &b in &members[1..] {
                    let z = self.phi.splice(base, self.get(i, rep).unwrap(), self.get(i, b).unwrap());
                    debug_assert_eq!(z[0], front);
                    debug_assert_eq!(z[i], b);
                    debug_assert_eq!(z[..i], base[..i]);
                    out.set(i - 1, b, z[1..].to_vec());
                }
            }
        }
        out
    }

    /// Def.-6 validity against an explicit relation: ⊥ exactly off the
    /// coordinate projections, stored tuples are members carrying their
    /// value, and equivalent values share witness prefixes.
    pub fn validate_against(&self, rel: &Relation) -> Result<(), String> {
        for i in 0..self.arity {
            // True coordinate classes: values sharing a prefix, transitively.
            let mut proj: BTreeSet<u8> = BTreeSet::new();
            let mut by_prefix: BTreeMap<Vec<u8>, BTreeSet<u8>> = BTreeMap::new();
            for t in &rel.tuples {
                proj.insert(t[i]);
                by_prefix.entry(t[..i].to_vec()).or_default().insert(t[i]);
            }
            for a in 0..self.d as u8 {
                match self.get(i, a) {
                    None => {
                        if proj.contains(&a) {
                            return Err(format!("ω({i},{a}) = ⊥ but {a} is in the projection"));
                        }
                    }
                    Some(w) => {
                        if !proj.contains(&a) {
                            return Err(format!("ω({i},{a}) set but {a} not in the projection"));
                        }
                        if w[i] != a {
                            return Err(format!("ω({i},{a}) does not carry {a} at {i}"));
                        }
                        if !rel.contains(w) {
                            return Err(format!("ω({i},{a}) = {w:?} is not a member"));
                        }
                    }
                }
            }
            // Union-find the direct-share classes.
            let mut parent: Vec<u8> = (0..self.d as u8).collect();
            fn find(p: &mut Vec<u8>, x: u8) -> u8 {
                let mut x = x;
                while p[x as usize] != x {
                    p[x as usize] = p[p[x as usize] as usize];
                    x = p[x as usize];
                }
                x
            }
            for vals in by_prefix.values() {
                let mut it = vals.iter();
                if let Some(&first) = it.next() {
                    for &v in it {
                        let (a, b) = (find(&mut parent, first), find(&mut parent, v));
                        parent[a as usize] = b;
                    }
                }
            }
            for a in proj.iter() {
                for b in proj.iter() {
                    if a < b && find(&mut parent, *a) == find(&mut parent, *b) {
                        let wa = self.get(i, *a).unwrap();
                        let wb = self.get(i, *b).unwrap();
                        if wa[..i] != wb[..i] {
                            return Err(format!(
                                "equivalent values {a},{b} at coordinate {i} have differing prefixes"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Self-consistency without the explicit relation: stored witnesses carry
    /// their value, pass the membership walk, and no ⊥ value occurs inside a
    /// stored witness.
    pub fn validate_internal(&self) -> Result<(), String> {
        for i in 0..self.arity {
            for a in 0..self.d as u8 {
                if let Some(w) = self.get(i, a) {
                    if w.len() != self.arity {
                        return Err(format!("ω({i},{a}) has wrong length"));
                    }
                    if w[i] != a {
                        return Err(format!("ω({i},{a}) does not carry {a}"));
                    }
                    for (j, &v) in w.iter().enumerate() {
                        if self.get(j, v).is_none() {
                            return Err(format!(
                                "ω({i},{a}) = {w:?} uses value {v} at {j} marked unreachable"
                            ));
                        }
                    }
                    if !self.member(w) {
                        return Err(format!("ω({i},{a}) = {w:?} fails its own membership walk"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds a witness function from an explicit relation, per coordinate: pick
/// a representative witness per equivalence class and splice every other
/// class member onto its prefix with φ.
pub fn build_witness_enumerative(
    rel: &Relation,
    phi: &MaltsevMap,
) -> Result<WitnessFunction, MaltsevError> {
    let n = rel.arity;
    let d = rel.d;
    let mut out = WitnessFunction::empty(d, n, phi.clone());
    if rel.is_empty() {
        return Ok(out);
    }
    for i in 0..n {
        // First witness per value, in tuple order.
        let mut first_witness: BTreeMap<u8, &Vec<u8>> = BTreeMap::new();
        // Values grouped by shared prefix, with a sample tuple per value.
        let mut by_prefix: BTreeMap<&[u8], BTreeMap<u8, &Vec<u8>>> = BTreeMap::new();
        for t in &rel.tuples {
            first_witness.entry(t[i]).or_insert(t);
            by_prefix
                .entry(&t[..i])
                .or_default()
                .entry(t[i])
                .or_insert(t);
        }
        // Direct-share pairs and union-find classes.
        let mut pair_witness: BTreeMap<(u8, u8), (&Vec<u8>, &Vec<u8>)> = BTreeMap::new();
        let mut parent: Vec<u8> = (0..d as u8).collect();
        fn find(p: &mut Vec<u8>, x: u8) -> u8 {
            let mut x = x;
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for group in by_prefix.values() {
            let vals: Vec<u8> = group.keys().copied().collect();
            for (ai, &a) in vals.iter().enumerate() {
                for &b in &vals[ai + 1..] {
                    pair_witness
                        .entry((a, b))
                        .or_insert((group[&a], group[&b]));
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra as usize] = rb;
                }
            }
        }
        let mut classes: BTreeMap<u8, Vec<u8>> = BTreeMap::new();
        for &a in first_witness.keys() {
            let root = find(&mut parent, a);
            classes.entry(root).or_default().push(a);
        }
        for (_, members) in classes {
            let rep = members[0];
            let base = (*first_witness[&rep]).clone();
            out.set(i, rep, base.clone());
            for &b in &members[1..] {
                let (ta, tb) = pair_witness.get(&(rep, b)).ok_or_else(|| {
                    MaltsevError::NotPolymorphism {
                        detail: format!(
                            "coordinate {i}: values {rep} and {b} are equivalent only \
                             transitively, so ∼ is not an equivalence relation"
                        ),
                    }
                })?;
                let y = phi.splice(&base, ta, tb);
                if !rel.contains(&y) {
                    return Err(MaltsevError::NotClosed {
                        triple: [base.clone(), (*ta).clone(), (*tb).clone()],
                        image: y,
                    });
                }
                out.set(i, b, y);
            }
        }
    }
    Ok(out)
}

/// Witness function of a disjoint union of relations sharing φ, assuming the
/// union itself is closed under φ. With `verify` set, disjointness and
/// closure are checked first at enumeration cost.
pub fn union(
    parts: &[WitnessFunction],
    verify: bool,
    budget: Budget,
) -> Result<WitnessFunction, MaltsevError> {
    assert!(!parts.is_empty());
    let n = parts[0].arity();
    let d = parts[0].domain_size();
    let phi = parts[0].phi().clone();
    assert!(parts.iter().all(|p| p.arity() == n && p.domain_size() == d));
    if verify {
        let mut all: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
        let mut rels = Vec::new();
        for (k, p) in parts.iter().enumerate() {
            let rel = p.enumerate(budget)?;
            for t in &rel.tuples {
                if let Some(&prev) = all.get(t) {
                    return Err(MaltsevError::PartsOverlap {
                        tuple: t.clone(),
                        first: prev,
                        second: k,
                    });
                }
                all.insert(t.clone(), k);
            }
            rels.push(rel);
        }
        for rel in &rels {
            if let Some((triple, image)) = polymorphism_violation(&phi, rel, budget)? {
                return Err(MaltsevError::NotClosed { triple, image });
            }
        }
        let whole = Relation::from_tuples(d, n, all.keys().cloned());
        if let Some((triple, image)) = polymorphism_violation(&phi, &whole, budget)? {
            return Err(MaltsevError::NotClosed { triple, image });
        }
    }
    let mut out = WitnessFunction::empty(d, n, phi);
    for i in 0..n {
        let mut assigned = vec![false; d];
        for a in 0..d as u8 {
            if assigned[a as usize] {
                continue;
            }
            let Some(base) = parts.iter().find_map(|p| p.get(i, a)) else {
                continue;
            };
            let base = base.clone();
            assigned[a as usize] = true;
            out.set(i, a, base.clone());
            for b in 0..d as u8 {
                if assigned[b as usize] {
                    continue;
                }
                // b joins a's class exactly when some part reaches b under
                // a's witness prefix.
                let mut probe = base[..i].to_vec();
                probe.push(b);
                if let Some(z) = parts.iter().find_map(|p| p.extend_prefix(&probe)) {
                    assigned[b as usize] = true;
                    out.set(i, b, z);
                }
            }
        }
    }
    Ok(out)
}

/// Result of splitting a witness function along a hidden partition.
#[derive(Debug)]
pub struct SplitOutcome {
    pub part_count: usize,
    pub parts: Vec<WitnessFunction>,
    pub queries_used: u64,
}

/// The labeler query budget asserted per top-level split call.
pub fn split_query_budget(d: usize, n: usize) -> u64 {
    ((d * n + 1) * (d + 2) * n) as u64
}

struct LabelOracle<'a, L: Ord + Clone> {
    labeler: &'a mut dyn FnMut(&[u8]) -> Result<L, String>,
    index_of: BTreeMap<L, usize>,
    cache: BTreeMap<Vec<u8>, usize>,
    by_label: Vec<Vec<Vec<u8>>>,
    used: u64,
    budget: u64,
    limit: usize,
}

impl<'a, L: Ord + Clone> LabelOracle<'a, L> {
    fn query(&mut self, tuple: &[u8]) -> Result<usize, MaltsevError> {
        if let Some(&k) = self.cache.get(tuple) {
            return Ok(k);
        }
        self.used += 1;
        if self.used > self.budget {
            return Err(MaltsevError::QueryBudgetExceeded {
                used: self.used,
                budget: self.budget,
            });
        }
        let label = (self.labeler)(tuple).map_err(|msg| MaltsevError::LabelerFailure {
            tuple: tuple.to_vec(),
            msg,
        })?;
        let next = self.index_of.len();
        let k = *self.index_of.entry(label).or_insert(next);
        if k == self.by_label.len() {
            self.by_label.push(Vec::new());
        }
        self.cache.insert(tuple.to_vec(), k);
        self.by_label[k].push(tuple.to_vec());
        Ok(k)
    }

    /// Any already-labeled tuple of part k satisfying a predicate.
    fn known(&self, k: usize, pred: impl Fn(&[u8]) -> bool) -> Option<Vec<u8>> {
        self.by_label
            .get(k)?
            .iter()
            .find(|t| pred(t))
            .cloned()
    }
}

/// Per-permutation run data: the complete list of types plus per-prefix
/// memoized type lookups.
struct TypeRun {
    perm: Vec<usize>,
    omega: WitnessFunction,
    levels: Vec<BTreeSet<BTreeSet<usize>>>,
    level1: BTreeMap<u8, BTreeSet<usize>>,
    node_memo: BTreeMap<Vec<u8>, (BTreeSet<usize>, Vec<u8>, usize)>,
}

impl TypeRun {
    fn to_original(&self, t: &[u8]) -> Vec<u8> {
        let mut orig = vec![0u8; t.len()];
        for (pos, &src) in self.perm.iter().enumerate() {
            orig[src] = t[pos];
        }
        orig
    }
}

fn unique_containing(
    level: &BTreeSet<BTreeSet<usize>>,
    k: usize,
) -> Result<Option<BTreeSet<usize>>, MaltsevError> {
    let mut hits = level.iter().filter(|u| u.contains(&k));
    match (hits.next(), hits.next()) {
        (None, _) => Ok(None),
        (Some(u), None) => Ok(Some(u.clone())),
        (Some(u), Some(v)) => Err(MaltsevError::TypePartitionViolation(format!(
            "label {k} lies in two stored types {u:?} and {v:?}"
        ))),
    }
}

fn insert_type(
    level: &mut BTreeSet<BTreeSet<usize>>,
    u: BTreeSet<usize>,
) -> Result<(), MaltsevError> {
    for existing in level.iter() {
        if existing != &u && !existing.is_disjoint(&u) {
            return Err(MaltsevError::TypePartitionViolation(format!(
                "computed type {u:?} overlaps stored type {existing:?} without equality"
            )));
        }
    }
    level.insert(u);
    Ok(())
}

/// Splits the relation represented by ω along the hidden partition exposed
/// by the labeler: returns the number of parts and a witness function per
/// part, in first-seen label order. The partition and all its coordinate
/// rotations must be type-partition maps; violations are detected and
/// reported, as is exceeding the query budget or observing more than d
/// labels.
pub fn split<L: Ord + Clone>(
    omega: &WitnessFunction,
    mut labeler: impl FnMut(&[u8]) -> Result<L, String>,
) -> Result<SplitOutcome, MaltsevError> {
    if omega.represents_empty() {
        return Err(MaltsevError::EmptyRelation);
    }
    let n = omega.arity();
    let d = omega.domain_size();
    let mut oracle = LabelOracle {
        labeler: &mut labeler,
        index_of: BTreeMap::new(),
        cache: BTreeMap::new(),
        by_label: Vec::new(),
        used: 0,
        budget: split_query_budget(d, n),
        limit: d,
    };

    // One ComputeType(ε) run per front rotation; rotation 0 is the identity.
    let mut runs: Vec<TypeRun> = Vec::with_capacity(n);
    for i in 0..n {
        let mut perm: Vec<usize> = Vec::with_capacity(n);
        perm.push(i);
        perm.extend((0..n).filter(|&k| k != i));
        let omega_i = if i == 0 {
            omega.clone()
        } else {
            omega.permute(&perm)
        };
        let mut run = TypeRun {
            perm,
            omega: omega_i,
            levels: vec![BTreeSet::new(); n + 1],
            level1: BTreeMap::new(),
            node_memo: BTreeMap::new(),
        };
        compute_type(&mut run, &mut oracle, &[])?;
        // Checked lazily so that type-partition violations surface first
        // even when the offending partition also has too many parts.
        if oracle.index_of.len() > oracle.limit {
            return Err(MaltsevError::TooManyParts { limit: oracle.limit });
        }
        runs.push(run);
    }
    let s = runs[0].levels[0]
        .iter()
        .next()
        .expect("ε-run stores type(ε)")
        .len();
    if s != oracle.index_of.len() {
        return Err(MaltsevError::TypePartitionViolation(format!(
            "type(ε) has {s} labels but {} labels were observed",
            oracle.index_of.len()
        )));
    }

    // Reconstruct a witness function per part. Membership of (i, a) comes
    // from the recorded level-1 types of rotation i; witnesses come from
    // greedy type-tree descents; class alignment follows the identity types.
    let mut parts: Vec<WitnessFunction> =
        vec![WitnessFunction::empty(d, n, omega.phi().clone()); s];
    for i in 0..n {
        for k in 0..s {
            let values: Vec<u8> = runs[i]
                .level1
                .iter()
                .filter(|(_, t)| t.contains(&k))
                .map(|(&a, _)| a)
                .collect();
            // Raw witness per reachable value, in rotated coordinates.
            let mut raw: BTreeMap<u8, Vec<u8>> = BTreeMap::new();
            for &a in &values {
                let t = match oracle.known(k, |t| t[i] == a) {
                    Some(t) => t,
                    None => {
                        let rotated = find_in_part(&mut runs[i], &mut oracle, k, &[a])?;
                        runs[i].to_original(&rotated)
                    }
                };
                raw.insert(a, t);
            }
            let mut assigned: BTreeSet<u8> = BTreeSet::new();
            for &a in &values {
                if assigned.contains(&a) {
                    continue;
                }
                let base = raw[&a].clone();
                let prefix = base[..i].to_vec();
                assigned.insert(a);
                parts[k].set(i, a, base);
                for &b in &values {
                    if assigned.contains(&b) {
                        continue;
                    }
                    // b is equivalent to a within part k exactly when k is in
                    // the identity type of prefix ∘ b.
                    if raw[&b][..i] == prefix[..] {
                        assigned.insert(b);
                        parts[k].set(i, b, raw[&b].clone());
                        continue;
                    }
                    let mut probe = prefix.clone();
                    probe.push(b);
                    if runs[0].omega.extend_prefix(&probe).is_none() {
                        continue;
                    }
                    let (ty, wit, wit_label) = node_type(&mut runs[0], &mut oracle, &probe)?;
                    if !ty.contains(&k) {
                        continue;
                    }
                    let aligned = if wit_label == k {
                        wit
                    } else if let Some(t) = oracle.known(k, |t| t[..i + 1] == probe[..]) {
                        t
                    } else {
                        find_in_part(&mut runs[0], &mut oracle, k, &probe)?
                    };
                    assigned.insert(b);
                    parts[k].set(i, b, aligned);
                }
            }
        }
    }
    Ok(SplitOutcome {
        part_count: s,
        parts,
        queries_used: oracle.used,
    })
}

/// The recursive type computation: returns type(x) while growing the partial
/// list of types stored in the run.
fn compute_type<L: Ord + Clone>(
    run: &mut TypeRun,
    oracle: &mut LabelOracle<'_, L>,
    x: &[u8],
) -> Result<BTreeSet<usize>, MaltsevError> {
    let n = run.omega.arity();
    let ell = x.len();
    if ell == n {
        let k = oracle.query(&run.to_original(x))?;
        let singleton = BTreeSet::from([k]);
        run.levels[n].insert(singleton.clone());
        return Ok(singleton);
    }
    let y = run
        .omega
        .extend_prefix(x)
        .expect("compute_type requires x in the prefix projection");
    let k = oracle.query(&run.to_original(&y))?;
    if let Some(u) = unique_containing(&run.levels[ell], k)? {
        return Ok(u);
    }
    let mut union_type = BTreeSet::new();
    let d = run.omega.domain_size();
    for a in 0..d as u8 {
        let mut xa = x.to_vec();
        xa.push(a);
        let Some(z) = run.omega.extend_prefix(&xa) else { continue };
        let ka = oracle.query(&run.to_original(&z))?;
        let u_a = match unique_containing(&run.levels[ell + 1], ka)? {
            Some(u) => u,
            None => compute_type(run, oracle, &xa)?,
        };
        if ell == 0 {
            run.level1.insert(a, u_a.clone());
        }
        union_type.extend(u_a.iter().copied());
    }
    insert_type(&mut run.levels[ell], union_type.clone())?;
    Ok(union_type)
}

/// Type of an arbitrary prefix once the run's type list is complete: one
/// labeled extension pins down the unique containing type. Returns the type,
/// the extension used, and its label.
fn node_type<L: Ord + Clone>(
    run: &mut TypeRun,
    oracle: &mut LabelOracle<'_, L>,
    x: &[u8],
) -> Result<(BTreeSet<usize>, Vec<u8>, usize), MaltsevError> {
    if let Some(hit) = run.node_memo.get(x) {
        return Ok(hit.clone());
    }
    let y = run
        .omega
        .extend_prefix(x)
        .expect("node_type requires x in the prefix projection");
    let orig = run.to_original(&y);
    let k = oracle.query(&orig)?;
    let ty = unique_containing(&run.levels[x.len()], k)?.ok_or_else(|| {
        MaltsevError::TypePartitionViolation(format!(
            "label {k} of a member extending {x:?} lies in no stored type at level {}",
            x.len()
        ))
    })?;
    let entry = (ty, orig, k);
    run.node_memo.insert(x.to_vec(), entry.clone());
    Ok(entry)
}

/// Greedy descent to a member of part k extending prefix x; `k ∈ type(x)` is
/// required and guarantees progress when the partition condition holds.
fn find_in_part<L: Ord + Clone>(
    run: &mut TypeRun,
    oracle: &mut LabelOracle<'_, L>,
    k: usize,
    x: &[u8],
) -> Result<Vec<u8>, MaltsevError> {
    let n = run.omega.arity();
    let mut x = x.to_vec();
    'level: while x.len() < n {
        let d = run.omega.domain_size();
        for a in 0..d as u8 {
            let mut xa = x.clone();
            xa.push(a);
            if run.omega.extend_prefix(&xa).is_none() {
                continue;
            }
            let (ty, wit, wit_label) = node_type(run, oracle, &xa)?;
            if wit_label == k {
                return Ok(wit);
            }
            if ty.contains(&k) {
                x = xa;
                continue 'level;
            }
        }
        return Err(MaltsevError::TypePartitionViolation(format!(
            "no continuation of {x:?} carries label {k} although its type does"
        )));
    }
    // Full-length prefix: it must itself be the member.
    let orig = run.to_original(&x);
    let label = oracle.query(&orig)?;
    if label != k {
        return Err(MaltsevError::TypePartitionViolation(format!(
            "tuple {orig:?} was predicted in part {k} but the labeler says {label}"
        )));
    }
    Ok(orig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(d: usize, arity: usize, tuples: &[&[u8]]) -> Relation {
        Relation::from_tuples(d, arity, tuples.iter().map(|t| t.to_vec()))
    }

    fn b() -> Budget {
        Budget::default()
    }

    #[test]
    fn maltsev_identities() {
        assert!(is_maltsev(2, xor3().table()));
        assert!(is_maltsev(3, affine3().table()));
        // Majority on d=2 fails: maj(a,b,b) = b
        let maj: Vec<u8> = (0..8)
            .map(|i| {
                let (a, b, c) = ((i >> 2) & 1, (i >> 1) & 1, i & 1);
                if a + b + c >= 2 {
                    1
                } else {
                    0
                }
            })
            .collect();
        assert!(!is_maltsev(2, &maj));
        // First projection fails: φ(b,b,a) = b
        let proj: Vec<u8> = (0..8).map(|i| ((i >> 2) & 1) as u8).collect();
        assert!(!is_maltsev(2, &proj));
    }

    #[test]
    fn polymorphism_examples() {
        let eq = rel(2, 2, &[&[0, 0], &[1, 1]]);
        assert!(is_polymorphism(&xor3(), &eq, b()).unwrap());
        let almost = rel(2, 2, &[&[0, 0], &[1, 1], &[0, 1]]);
        let viol = polymorphism_violation(&xor3(), &almost, b()).unwrap();
        assert!(viol.is_some());
        let affine = rel(2, 3, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        assert!(is_polymorphism(&xor3(), &affine, b()).unwrap());
    }

    #[test]
    fn closure_examples() {
        let seed = rel(2, 2, &[&[0, 0], &[1, 1], &[0, 1]]);
        let closed = closure(&seed, &xor3(), b()).unwrap();
        assert_eq!(closed, Relation::full(2, 2));
        let again = closure(&closed, &xor3(), b()).unwrap();
        assert_eq!(again, closed);
        let single = rel(3, 2, &[&[2, 1]]);
        assert_eq!(closure(&single, &affine3(), b()).unwrap(), single);
    }

    #[test]
    fn search_examples() {
        let eq = rel(2, 2, &[&[0, 0], &[1, 1]]);
        let affine = rel(2, 3, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let found = search_shared_maltsev(&[eq, affine], 2).unwrap().unwrap();
        assert_eq!(found, xor3());
        let or_rel = rel(2, 2, &[&[0, 1], &[1, 0], &[1, 1]]);
        assert!(search_shared_maltsev(&[or_rel], 2).unwrap().is_none());
        let full = Relation::full(3, 3);
        let least = search_shared_maltsev(&[full], 3).unwrap().unwrap();
        let first = identity_respecting_tables(3).next().unwrap();
        assert_eq!(least, first);
        assert!(search_shared_maltsev(&[], 4).is_err());
    }

    #[test]
    fn witness_equality_relation() {
        let eq = rel(2, 2, &[&[0, 0], &[1, 1]]);
        let w = build_witness_enumerative(&eq, &xor3()).unwrap();
        w.validate_against(&eq).unwrap();
        w.validate_internal().unwrap();
        assert!(w.member(&[1, 1]));
        assert!(!w.member(&[0, 1]));
        assert_eq!(w.get(0, 0).unwrap(), &vec![0, 0]);
    }

    #[test]
    fn witness_empty_and_full() {
        let empty = Relation::new(2, 3);
        let w = build_witness_enumerative(&empty, &xor3()).unwrap();
        assert!(w.represents_empty());
        assert!(!w.member(&[0, 0, 0]));
        let full = Relation::full(2, 2);
        let w = build_witness_enumerative(&full, &xor3()).unwrap();
        w.validate_against(&full).unwrap();
    }

    #[test]
    fn pin_examples() {
        let eq = rel(2, 2, &[&[0, 0], &[1, 1]]);
        let w = build_witness_enumerative(&eq, &xor3()).unwrap();
        let pinned = w.pin(&[1]);
        assert_eq!(
            pinned.enumerate(b()).unwrap(),
            rel(2, 1, &[&[1]])
        );
        // Pinning an unreachable value yields the empty witness function.
        let half = rel(2, 2, &[&[1, 0], &[1, 1]]);
        let w = build_witness_enumerative(&half, &xor3()).unwrap();
        assert!(w.pin(&[0]).represents_empty());
        // Affine relation pinned: {(y,z) : y ⊕ z = 1}
        let affine = rel(2, 3, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let w = build_witness_enumerative(&affine, &xor3()).unwrap();
        let pinned = w.pin(&[1]);
        let expect = rel(2, 2, &[&[0, 1], &[1, 0]]);
        assert_eq!(pinned.enumerate(b()).unwrap(), expect);
        pinned.validate_against(&expect).unwrap();
    }

    #[test]
    fn projection_examples() {
        let affine = rel(2, 3, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let w = build_witness_enumerative(&affine, &xor3()).unwrap();
        let p = w.project_prefix(2);
        assert_eq!(p.enumerate(b()).unwrap(), Relation::full(2, 2));
        p.validate_against(&Relation::full(2, 2)).unwrap();
        assert_eq!(
            w.project_prefix(3).enumerate(b()).unwrap(),
            affine
        );
        let explicit = w.project_explicit(2, 4).unwrap();
        assert_eq!(explicit.len(), 4);
        for (p, lift) in explicit {
            assert_eq!(&lift[..2], &p[..]);
            assert!(affine.contains(&lift));
        }
        assert!(w.project_explicit(3, 2).is_err());
    }

    #[test]
    fn permute_examples() {
        let single = rel(2, 2, &[&[0, 1]]);
        let w = build_witness_enumerative(&single, &xor3()).unwrap();
        let swapped = w.permute(&[1, 0]);
        assert_eq!(swapped.enumerate(b()).unwrap(), rel(2, 2, &[&[1, 0]]));
        let affine = rel(2, 3, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let w = build_witness_enumerative(&affine, &xor3()).unwrap();
        let id = w.permute(&[0, 1, 2]);
        assert_eq!(id.enumerate(b()).unwrap(), affine);
        let rotated = w.permute(&[2, 0, 1]);
        assert_eq!(rotated.enumerate(b()).unwrap(), affine);
        rotated.validate_against(&affine).unwrap();
    }

    #[test]
    fn union_examples() {
        let phi = xor3();
        let p1 = build_witness_enumerative(&rel(2, 2, &[&[0, 0]]), &phi).unwrap();
        let p2 = build_witness_enumerative(&rel(2, 2, &[&[1, 1]]), &phi).unwrap();
        let u = union(&[p1.clone(), p2], false, b()).unwrap();
        let eq = rel(2, 2, &[&[0, 0], &[1, 1]]);
        assert_eq!(u.enumerate(b()).unwrap(), eq);
        u.validate_against(&eq).unwrap();
        let alone = union(&[p1], false, b()).unwrap();
        assert_eq!(alone.enumerate(b()).unwrap(), rel(2, 2, &[&[0, 0]]));
        // Verify mode flags a union that is not closed.
        let q1 = build_witness_enumerative(&rel(2, 2, &[&[0, 0]]), &phi).unwrap();
        let q2 = build_witness_enumerative(&rel(2, 2, &[&[0, 1], &[1, 0]]), &phi).unwrap();
        match union(&[q1, q2], true, b()) {
            Err(MaltsevError::NotClosed { image, .. }) => assert_eq!(image, vec![1, 1]),
            other => panic!("expected NotClosed, got {other:?}"),
        }
    }

    #[test]
    fn split_unary() {
        let full = Relation::full(2, 1);
        let w = build_witness_enumerative(&full, &xor3()).unwrap();
        let out = split(&w, |t: &[u8]| Ok::<u8, String>(t[0])).unwrap();
        assert_eq!(out.part_count, 2);
        assert_eq!(
            out.parts[0].enumerate(b()).unwrap(),
            rel(2, 1, &[&[0]])
        );
        assert_eq!(
            out.parts[1].enumerate(b()).unwrap(),
            rel(2, 1, &[&[1]])
        );
        assert!(out.queries_used <= split_query_budget(2, 1));
    }

    #[test]
    fn split_constant_labeler() {
        let affine = rel(2, 3, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let w = build_witness_enumerative(&affine, &xor3()).unwrap();
        let out = split(&w, |_t: &[u8]| Ok::<u8, String>(0)).unwrap();
        assert_eq!(out.part_count, 1);
        assert_eq!(out.parts[0].enumerate(b()).unwrap(), affine);
    }

    #[test]
    fn split_three_part_violation() {
        // Parts {(0,0),(1,1)} / {(0,1)} / {(1,0)}: type(0) = {0,1} and
        // type(1) = {0,2} overlap without being equal.
        let full = Relation::full(2, 2);
        let w = build_witness_enumerative(&full, &xor3()).unwrap();
        let labeler = |t: &[u8]| -> Result<u8, String> {
            Ok(if t[0] == t[1] { 0 } else if t == [0, 1] { 1 } else { 2 })
        };
        match split(&w, labeler) {
            Err(MaltsevError::TypePartitionViolation(_)) => {}
            other => panic!("expected TypePartitionViolation, got {other:?}"),
        }
    }

    #[test]
    fn split_refuses_empty() {
        let w = build_witness_enumerative(&Relation::new(2, 2), &xor3()).unwrap();
        assert!(matches!(
            split(&w, |_t: &[u8]| Ok::<u8, String>(0)),
            Err(MaltsevError::EmptyRelation)
        ));
    }

    #[test]
    fn maltsev_map_parse_roundtrip() {
        let phi = xor3();
        let text = phi.to_string();
        let parsed = MaltsevMap::parse(&text, 2).unwrap();
        assert_eq!(parsed, phi);
        // Forced triples may be omitted entirely for d = 2 when free ones
        // are given; conflicting entries are rejected.
        let conflicting = "0 0 0 -> 1\n";
        assert!(MaltsevMap::parse(conflicting, 2).is_err());
        let missing = "0 1 0 -> 1\n";
        assert!(MaltsevMap::parse(missing, 2).is_err());
    }
}
