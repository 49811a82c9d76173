//! Row representations and the structural tests behind the tractability
//! conditions: linear dependence, magnitude partitions, block orthogonality,
//! function classification, and type-partition analysis.
//!
//! Magnitudes are only ever compared for equality, via squared magnitudes,
//! which stay inside the field. Zero rows are excluded before any pairwise
//! test. All outputs are deterministic: equivalence classes are ordered by
//! their lexicographically least member.

use crate::cyclo::CycloValue;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RowError {
    #[error("zero vector passed to a pairwise row test")]
    ZeroVector,
    #[error("vectors have distinct supports or non-proportional magnitude patterns")]
    NotMagnitudeProportional,
}

pub fn is_zero_vector(x: &[CycloValue]) -> bool {
    x.iter().all(|v| v.is_zero())
}

/// Exact linear dependence over the field: x_i·y_j = x_j·y_i for all i < j.
pub fn linearly_dependent(x: &[CycloValue], y: &[CycloValue]) -> Result<bool, RowError> {
    if is_zero_vector(x) || is_zero_vector(y) {
        return Err(RowError::ZeroVector);
    }
    Ok(cross_products_vanish(x, y))
}

fn cross_products_vanish(x: &[CycloValue], y: &[CycloValue]) -> bool {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if x[i].mul(&y[j]) != x[j].mul(&y[i]) {
                return false;
            }
        }
    }
    true
}

/// The support of a vector and its partition into blocks of equal squared
/// magnitude. Blocks are ordered by least member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MagnitudePartition {
    pub support: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
}

pub fn magnitude_partition(x: &[CycloValue]) -> Result<MagnitudePartition, RowError> {
    if is_zero_vector(x) {
        return Err(RowError::ZeroVector);
    }
    let support: Vec<usize> = (0..x.len()).filter(|&i| !x[i].is_zero()).collect();
    let mut by_msq: BTreeMap<CycloValue, Vec<usize>> = BTreeMap::new();
    for &i in &support {
        by_msq.entry(x[i].magnitude_sq()).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = by_msq.into_values().collect();
    blocks.sort_by_key(|b| b[0]);
    Ok(MagnitudePartition { support, blocks })
}

/// True when the squared-magnitude vectors of x and y are proportional,
/// which for vectors sharing a support is proportionality of |x| and |y|.
pub fn magnitudes_proportional(x: &[CycloValue], y: &[CycloValue]) -> bool {
    let mx: Vec<CycloValue> = x.iter().map(|v| v.magnitude_sq()).collect();
    let my: Vec<CycloValue> = y.iter().map(|v| v.magnitude_sq()).collect();
    cross_products_vanish(&mx, &my)
}

/// Block orthogonality of a pair: within every equal-magnitude block T_k of
/// the shared support, Σ_{i∈T_k} x_i·conj(y_i) = 0.
pub fn block_orthogonal_pair(x: &[CycloValue], y: &[CycloValue]) -> Result<bool, RowError> {
    if is_zero_vector(x) || is_zero_vector(y) {
        return Err(RowError::ZeroVector);
    }
    if !magnitudes_proportional(x, y) {
        return Err(RowError::NotMagnitudeProportional);
    }
    let part = magnitude_partition(x)?;
    let order = x[part.support[0]].order();
    for block in &part.blocks {
        let mut acc = CycloValue::zero(order);
        for &i in block {
            acc = acc.add(&x[i].mul(&y[i].conj()));
        }
        if !acc.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Normalizes a nonzero vector so its first nonzero entry is 1.
pub fn normalize_direction(row: &[CycloValue]) -> Vec<CycloValue> {
    let first = row
        .iter()
        .find(|v| !v.is_zero())
        .expect("cannot normalize the zero vector");
    let inv = first.inv().expect("nonzero entry inverts");
    row.iter().map(|v| v.mul(&inv)).collect()
}

/// The row representation of a function viewed as a matrix: the equivalence
/// classes of nonzero rows under linear dependence, each with its normalized
/// representative vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowRepresentation {
    /// Arity of the function; rows are indexed by tuples in D^{arity−1}.
    pub arity: usize,
    pub pairs: Vec<(Vec<Vec<u8>>, Vec<CycloValue>)>,
}

impl RowRepresentation {
    pub fn class_count(&self) -> usize {
        self.pairs.len()
    }

    /// Union of all classes: the tuples with nonzero rows.
    pub fn row_support(&self) -> Vec<Vec<u8>> {
        let mut out: Vec<Vec<u8>> = self
            .pairs
            .iter()
            .flat_map(|(s, _)| s.iter().cloned())
            .collect();
        out.sort();
        out
    }
}

/// Builds the row representation from explicitly enumerated rows, which must
/// arrive in lexicographic tuple order. Classes end up ordered by least
/// member.
pub fn row_representation(
    rows: impl IntoIterator<Item = (Vec<u8>, Vec<CycloValue>)>,
    arity: usize,
) -> RowRepresentation {
    let mut pairs: Vec<(Vec<Vec<u8>>, Vec<CycloValue>)> = Vec::new();
    for (key, row) in rows {
        if is_zero_vector(&row) {
            continue;
        }
        let mut found = false;
        for (members, rep) in pairs.iter_mut() {
            if cross_products_vanish(&row, rep) {
                members.push(key.clone());
                found = true;
                break;
            }
        }
        if !found {
            pairs.push((vec![key], normalize_direction(&row)));
        }
    }
    RowRepresentation { arity, pairs }
}

/// Outcome of classifying a function's rows per the block-orthogonality
/// requirement. Failures carry a witness pair of row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    BlockOrthogonal,
    NotBlockRank1 { pair: (Vec<u8>, Vec<u8>) },
    NotBlockOrthogonal { pair: (Vec<u8>, Vec<u8>) },
}

/// Classifies a function from its enumerated rows: block-rank-1 requires
/// every two nonzero magnitude rows to be linearly dependent or have
/// disjoint positive support; block orthogonality additionally requires
/// magnitude-equivalent row pairs to be linearly dependent or
/// block-orthogonal.
pub fn classify_function(rows: &[(Vec<u8>, Vec<CycloValue>)]) -> Classification {
    let nonzero: Vec<&(Vec<u8>, Vec<CycloValue>)> =
        rows.iter().filter(|(_, r)| !is_zero_vector(r)).collect();
    for i in 0..nonzero.len() {
        for j in (i + 1)..nonzero.len() {
            let (kx, x) = nonzero[i];
            let (ky, y) = nonzero[j];
            let shared_support = (0..x.len()).any(|c| !x[c].is_zero() && !y[c].is_zero());
            let mag_dep = magnitudes_proportional(x, y);
            if shared_support && !mag_dep {
                return Classification::NotBlockRank1 {
                    pair: (kx.clone(), ky.clone()),
                };
            }
            if mag_dep {
                // Same magnitude pattern: rows must be dependent or
                // block-orthogonal.
                if !cross_products_vanish(x, y)
                    && !block_orthogonal_pair(x, y).expect("preconditions established")
                {
                    return Classification::NotBlockOrthogonal {
                        pair: (kx.clone(), ky.clone()),
                    };
                }
            }
        }
    }
    Classification::BlockOrthogonal
}

/// The per-prefix-length type sets of a row representation's class partition,
/// together with the type-partition verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeList {
    pub class_count: usize,
    /// per_length[ℓ] is the set of nonempty types arising from prefixes of
    /// length ℓ; index 0 holds the full label set.
    pub per_length: Vec<BTreeSet<BTreeSet<usize>>>,
    pub is_type_partition: bool,
    /// A witness pair of overlapping-but-unequal types when the verdict is
    /// negative.
    pub violation: Option<(BTreeSet<usize>, BTreeSet<usize>)>,
}

/// Computes type(x) for every prefix length from the explicit class members.
/// Class members live in D^{arity−1}, so prefix lengths run from 0 (the full
/// label set) through arity−1 (singletons or empty).
pub fn type_list(rep: &RowRepresentation) -> TypeList {
    let k = rep.class_count();
    let row_len = rep.arity - 1;
    let mut per_length: Vec<BTreeSet<BTreeSet<usize>>> = Vec::with_capacity(row_len + 1);
    let mut is_partition = true;
    let mut violation = None;
    for len in 0..=row_len {
        // type(x) for each prefix x of length `len` that extends to a member.
        let mut types: BTreeMap<Vec<u8>, BTreeSet<usize>> = BTreeMap::new();
        for (label, (members, _)) in rep.pairs.iter().enumerate() {
            for m in members {
                types
                    .entry(m[..len].to_vec())
                    .or_default()
                    .insert(label);
            }
        }
        let set: BTreeSet<BTreeSet<usize>> = types.into_values().collect();
        let list: Vec<&BTreeSet<usize>> = set.iter().collect();
        for i in 0..list.len() {
            for j in (i + 1)..list.len() {
                let disjoint = list[i].is_disjoint(list[j]);
                if !disjoint && list[i] != list[j] {
                    is_partition = false;
                    if violation.is_none() {
                        violation = Some((list[i].clone(), list[j].clone()));
                    }
                }
            }
        }
        per_length.push(set);
    }
    if k == 0 {
        // Empty representation: no prefixes, vacuously a partition map.
        return TypeList {
            class_count: 0,
            per_length,
            is_type_partition: true,
            violation: None,
        };
    }
    debug_assert_eq!(
        per_length[0].iter().next().map(|s| s.len()),
        Some(k),
        "type of the empty prefix is the full label set"
    );
    TypeList {
        class_count: k,
        per_length,
        is_type_partition: is_partition,
        violation,
    }
}

/// Applies a coordinate permutation to every class member and recomputes the
/// type list; used to probe the type-partition condition beyond the identity
/// ordering. `perm[i]` gives the source coordinate placed at position i.
pub fn permuted_type_list(rep: &RowRepresentation, perm: &[usize]) -> TypeList {
    let permuted = RowRepresentation {
        arity: rep.arity,
        pairs: rep
            .pairs
            .iter()
            .map(|(members, v)| {
                (
                    members
                        .iter()
                        .map(|m| perm.iter().map(|&p| m[p]).collect())
                        .collect(),
                    v.clone(),
                )
            })
            .collect(),
    };
    type_list(&permuted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclo::CycloValue;
    use crate::model::{hadamard_instance, xor3_instance, Assignments, Budget};

    fn iv(vals: &[i64], order: u32) -> Vec<CycloValue> {
        vals.iter().map(|&v| CycloValue::from_int(v, order)).collect()
    }

    #[test]
    fn dependence_examples() {
        assert!(linearly_dependent(&iv(&[1, 1], 1), &iv(&[2, 2], 1)).unwrap());
        assert!(!linearly_dependent(&iv(&[1, 1], 1), &iv(&[1, -1], 1)).unwrap());
        assert!(!linearly_dependent(&iv(&[1, 0], 1), &iv(&[0, 1], 1)).unwrap());
        assert_eq!(
            linearly_dependent(&iv(&[0, 0], 1), &iv(&[1, 1], 1)),
            Err(RowError::ZeroVector)
        );
    }

    #[test]
    fn magnitude_partition_examples() {
        let p = magnitude_partition(&iv(&[1, -1, 2], 2)).unwrap();
        assert_eq!(p.support, vec![0, 1, 2]);
        assert_eq!(p.blocks, vec![vec![0, 1], vec![2]]);
        let z = CycloValue::root_of_unity(4, 1);
        let p = magnitude_partition(&[z, CycloValue::one(4)]).unwrap();
        assert_eq!(p.blocks, vec![vec![0, 1]]);
        let p = magnitude_partition(&iv(&[0, 3], 1)).unwrap();
        assert_eq!(p.support, vec![1]);
        assert_eq!(p.blocks.len(), 1);
    }

    #[test]
    fn block_orthogonality_examples() {
        assert!(block_orthogonal_pair(&iv(&[1, 1], 2), &iv(&[1, -1], 2)).unwrap());
        let z = CycloValue::root_of_unity(4, 1);
        let x = iv(&[1, 1], 4);
        let y = vec![CycloValue::one(4), z];
        // 1 + conj(ζ) = 1 − ζ ≠ 0
        assert!(!block_orthogonal_pair(&x, &y).unwrap());
        assert_eq!(
            block_orthogonal_pair(&iv(&[1, 2], 1), &iv(&[2, -1], 1)),
            Err(RowError::NotMagnitudeProportional)
        );
    }

    #[test]
    fn block_orthogonal_implies_orthogonal() {
        let pairs = [
            (iv(&[1, 1], 2), iv(&[1, -1], 2)),
            (iv(&[1, 1, 2, 2], 2), iv(&[1, -1, 2, -2], 2)),
        ];
        for (x, y) in pairs {
            if block_orthogonal_pair(&x, &y).unwrap() {
                let mut dot = CycloValue::zero(2);
                for (a, b) in x.iter().zip(y.iter()) {
                    dot = dot.add(&a.mul(&b.conj()));
                }
                assert!(dot.is_zero());
            }
        }
    }

    fn instance_rows(
        inst: &crate::model::Instance,
        t: usize,
    ) -> Vec<(Vec<u8>, Vec<CycloValue>)> {
        let budget = Budget::default();
        Assignments::new(inst.domain.d, t - 1)
            .map(|x| {
                let row = inst.marginal_row(t, &x, budget).unwrap();
                (x, row)
            })
            .collect()
    }

    #[test]
    fn representation_of_hadamard() {
        let inst = hadamard_instance();
        let rows = instance_rows(&inst, 2);
        let rep = row_representation(rows, 2);
        assert_eq!(rep.class_count(), 2);
        assert_eq!(rep.pairs[0].0, vec![vec![0]]);
        assert_eq!(rep.pairs[0].1, iv(&[1, 1], 2));
        assert_eq!(rep.pairs[1].0, vec![vec![1]]);
        assert_eq!(rep.pairs[1].1, iv(&[1, -1], 2));
    }

    #[test]
    fn representation_of_xor() {
        let inst = xor3_instance();
        let rows = instance_rows(&inst, 3);
        let rep = row_representation(rows, 3);
        assert_eq!(rep.class_count(), 2);
        assert_eq!(rep.pairs[0].0, vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(rep.pairs[0].1, iv(&[1, 0], 1));
        assert_eq!(rep.pairs[1].0, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(rep.pairs[1].1, iv(&[0, 1], 1));
        // Re-checking members against their representative.
        for (members, rep_v) in &rep.pairs {
            for m in members {
                let row = inst.marginal_row(3, m, Budget::default()).unwrap();
                assert!(linearly_dependent(&row, rep_v).unwrap());
            }
        }
    }

    #[test]
    fn empty_representation() {
        let rep = row_representation(
            vec![(vec![0u8], iv(&[0, 0], 1)), (vec![1u8], iv(&[0, 0], 1))],
            2,
        );
        assert_eq!(rep.class_count(), 0);
    }

    #[test]
    fn classification_examples() {
        let inst = hadamard_instance();
        assert_eq!(
            classify_function(&instance_rows(&inst, 2)),
            Classification::BlockOrthogonal
        );
        let rows = vec![
            (vec![0u8], iv(&[1, 1], 1)),
            (vec![1u8], iv(&[1, 2], 1)),
        ];
        assert!(matches!(
            classify_function(&rows),
            Classification::NotBlockRank1 { .. }
        ));
        let z = CycloValue::root_of_unity(4, 1);
        let rows = vec![
            (vec![0u8], iv(&[1, 1], 4)),
            (vec![1u8], vec![CycloValue::one(4), z]),
        ];
        assert!(matches!(
            classify_function(&rows),
            Classification::NotBlockOrthogonal { .. }
        ));
    }

    #[test]
    fn type_lists() {
        let inst = xor3_instance();
        let rep = row_representation(instance_rows(&inst, 3), 3);
        let tl = type_list(&rep);
        assert!(tl.is_type_partition);
        // T_1 = {{0,1}}, T_2 = {{0},{1}} with 0-based labels
        let t1: Vec<_> = tl.per_length[1].iter().cloned().collect();
        assert_eq!(t1, vec![BTreeSet::from([0usize, 1])]);
        assert_eq!(tl.per_length[2].len(), 2);
        // Union property per prefix length.
        for level in &tl.per_length {
            let mut all = BTreeSet::new();
            for t in level {
                all.extend(t.iter().copied());
            }
            assert_eq!(all, BTreeSet::from([0usize, 1]));
        }

        // Overlapping non-equal types: S_1 = {(0,0),(1,1)}, S_2 = {(0,1)}
        let rep = RowRepresentation {
            arity: 3,
            pairs: vec![
                (vec![vec![0, 0], vec![1, 1]], iv(&[1, 0], 1)),
                (vec![vec![0, 1]], iv(&[0, 1], 1)),
            ],
        };
        let tl = type_list(&rep);
        assert!(!tl.is_type_partition);
        assert!(tl.violation.is_some());

        // A single class is always a partition map.
        let rep = RowRepresentation {
            arity: 2,
            pairs: vec![(vec![vec![0], vec![1]], iv(&[1, 1], 1))],
        };
        assert!(type_list(&rep).is_type_partition);
    }
}
