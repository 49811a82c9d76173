//! The tractable-case counting pipeline: instance-level condition checks,
//! the downward level induction producing per-level direction/witness pairs,
//! the recursive marginal evaluator, and the exact partition function.
//!
//! Two modes exist. Verified mode runs the (exponential) instance-level
//! condition checks first and refuses with a certificate on failure.
//! Optimistic mode runs the pipeline directly and converts runtime
//! detections into violations; both modes produce the exact value or a
//! reproducible certificate, never a wrong number.

use crate::cyclo::{sum_values, CycloValue};
use crate::maltsev::{
    build_witness_enumerative, polymorphism_violation, split, union, MaltsevError, MaltsevMap,
    Relation, WitnessFunction,
};
use crate::model::{count_assignments, Assignments, Budget, Instance, ModelError};
use crate::rowspace::{
    classify_function, normalize_direction, permuted_type_list, row_representation, type_list,
    Classification, RowRepresentation,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// A reproducible certificate for a failed condition or a runtime detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BlockOrthogonality {
        t: usize,
        x: Vec<u8>,
        y: Vec<u8>,
        /// True when even block-rank-1 fails for the witness pair.
        rank1_failure: bool,
    },
    TypePartition {
        t: usize,
        detail: String,
    },
    Maltsev {
        relation: String,
        triple: [Vec<u8>; 3],
        image: Vec<u8>,
    },
    Runtime {
        t: usize,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BlockOrthogonality { t, x, y, rank1_failure } => {
                let kind = if *rank1_failure {
                    "block-rank-1"
                } else {
                    "block-orthogonality"
                };
                write!(f, "{kind} failure at level {t}: rows {x:?} and {y:?}")
            }
            Violation::TypePartition { t, detail } => {
                write!(f, "type-partition failure at level {t}: {detail}")
            }
            Violation::Maltsev { relation, triple, image } => write!(
                f,
                "Mal'tsev failure on {relation}: φ{triple:?} = {image:?} escapes the relation"
            ),
            Violation::Runtime { t, detail } => {
                write!(f, "runtime detection at level {t}: {detail}")
            }
        }
    }
}

/// Per-condition outcome of the instance-level checks; None means pass.
#[derive(Debug, Clone, Default)]
pub struct ConditionReport {
    pub block_orthogonality: Option<Violation>,
    pub type_partition: Option<Violation>,
    pub maltsev: Option<Violation>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.block_orthogonality.is_none()
            && self.type_partition.is_none()
            && self.maltsev.is_none()
    }

    pub fn violations(&self) -> Vec<Violation> {
        [
            self.block_orthogonality.clone(),
            self.type_partition.clone(),
            self.maltsev.clone(),
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

/// One level of the induction: the linearly independent normalized
/// directions of the marginal's rows, each with a witness function for its
/// row class.
pub struct LevelData {
    pub t: usize,
    pub pairs: Vec<(Vec<CycloValue>, WitnessFunction)>,
}

impl LevelData {
    pub fn class_count(&self) -> usize {
        self.pairs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Verified,
    Optimistic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Verified => write!(f, "verified"),
            Mode::Optimistic => write!(f, "optimistic"),
        }
    }
}

/// Outcome of a solve: either an exact value with the per-level data, or a
/// list of violations with no value.
pub struct PipelineResult {
    pub z: Option<CycloValue>,
    pub levels: Vec<LevelData>,
    pub mode: Mode,
    pub violations: Vec<Violation>,
}

/// Tuning for the condition checks.
#[derive(Debug, Clone, Copy)]
pub struct CheckConfig {
    /// Exhaustive permutation coverage while (t−1)! stays at or below this.
    pub perm_exhaustive_cap: u64,
    /// Uniform random permutations sampled above the cap.
    pub perm_samples: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            perm_exhaustive_cap: 720,
            perm_samples: 50,
            seed: 0xC5F1,
        }
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product::<u64>().max(1)
}

fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// All rows of the marginal F^{[t]}, keyed by prefix in lexicographic order.
pub fn marginal_rows(
    instance: &Instance,
    t: usize,
    budget: Budget,
) -> Result<Vec<(Vec<u8>, Vec<CycloValue>)>, ModelError> {
    budget.check(count_assignments(instance.domain.d, instance.n))?;
    let mut rows = Vec::new();
    for x in Assignments::new(instance.domain.d, t - 1) {
        let row = instance.marginal_row(t, &x, budget)?;
        rows.push((x, row));
    }
    Ok(rows)
}

/// Boolean(F^{[t]}) as an explicit relation, from brute-force marginals.
pub fn boolean_relation(
    instance: &Instance,
    t: usize,
    budget: Budget,
) -> Result<Relation, ModelError> {
    budget.check(count_assignments(instance.domain.d, instance.n))?;
    let mut tuples = Vec::new();
    for x in Assignments::new(instance.domain.d, t) {
        if !instance.marginal(t, &x, budget)?.is_zero() {
            tuples.push(x);
        }
    }
    Ok(Relation::from_tuples(instance.domain.d, t, tuples))
}

/// Ω_{F^{[t]}}: pairs of prefixes whose rows are nonzero and linearly
/// dependent, as an explicit relation over 2(t−1) coordinates.
pub fn omega_relation(
    instance: &Instance,
    t: usize,
    budget: Budget,
) -> Result<Relation, ModelError> {
    assert!(t >= 2);
    let d = instance.domain.d;
    budget.check(count_assignments(d, 2 * (t - 1)))?;
    let rows = marginal_rows(instance, t, budget)?;
    let rep = row_representation(rows, t);
    let mut tuples = Vec::new();
    for (members, _) in &rep.pairs {
        for x in members {
            for y in members {
                let mut pair = x.clone();
                pair.extend_from_slice(y);
                tuples.push(pair);
            }
        }
    }
    Ok(Relation::from_tuples(d, 2 * (t - 1), tuples))
}

/// Checks closedness of Ω_{F^{[t]}} under φ through the class structure:
/// the union of classes must be closed, and the class of a φ-image must
/// depend only on the classes of the arguments. Equivalent to the direct
/// cubic check on Ω but cubic in the prefix support instead.
fn omega_polymorphism_violation(
    rep: &RowRepresentation,
    phi: &MaltsevMap,
    budget: Budget,
) -> Result<Option<([Vec<u8>; 3], Vec<u8>)>, ModelError> {
    let mut label_of: BTreeMap<&Vec<u8>, usize> = BTreeMap::new();
    for (j, (members, _)) in rep.pairs.iter().enumerate() {
        for m in members {
            label_of.insert(m, j);
        }
    }
    let support: Vec<&Vec<u8>> = label_of.keys().copied().collect();
    let m = support.len() as u64;
    budget.check(m.saturating_mul(m).saturating_mul(m))?;
    let mut images: BTreeMap<(usize, usize, usize), (Vec<&Vec<u8>>, usize)> = BTreeMap::new();
    for &x1 in &support {
        for &x2 in &support {
            for &x3 in &support {
                let z = phi.splice(x1, x2, x3);
                let pair = |a: &[u8], b: &[u8]| {
                    let mut p = a.to_vec();
                    p.extend_from_slice(b);
                    p
                };
                let Some(&lz) = label_of.get(&z) else {
                    // Image escapes the union of classes: the diagonal triple
                    // violates Ω directly.
                    return Ok(Some((
                        [pair(x1, x1), pair(x2, x2), pair(x3, x3)],
                        pair(&z, &z),
                    )));
                };
                let key = (label_of[x1], label_of[x2], label_of[x3]);
                match images.get(&key) {
                    None => {
                        images.insert(key, (vec![x1, x2, x3], lz));
                    }
                    Some((prev, lw)) if *lw != lz => {
                        let w = phi.splice(prev[0], prev[1], prev[2]);
                        return Ok(Some((
                            [pair(prev[0], x1), pair(prev[1], x2), pair(prev[2], x3)],
                            pair(&w, &z),
                        )));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(None)
}

/// Runs the three instance-level condition checks for every marginal level.
pub fn check_instance_conditions(
    instance: &Instance,
    phi: &MaltsevMap,
    budget: Budget,
    config: CheckConfig,
) -> Result<ConditionReport, ModelError> {
    let mut report = ConditionReport::default();
    for t in 2..=instance.n {
        let rows = marginal_rows(instance, t, budget)?;
        if report.block_orthogonality.is_none() {
            match classify_function(&rows) {
                Classification::BlockOrthogonal => {}
                Classification::NotBlockRank1 { pair } => {
                    report.block_orthogonality = Some(Violation::BlockOrthogonality {
                        t,
                        x: pair.0,
                        y: pair.1,
                        rank1_failure: true,
                    });
                }
                Classification::NotBlockOrthogonal { pair } => {
                    report.block_orthogonality = Some(Violation::BlockOrthogonality {
                        t,
                        x: pair.0,
                        y: pair.1,
                        rank1_failure: false,
                    });
                }
            }
        }
        let rep = row_representation(rows, t);
        if report.type_partition.is_none() {
            let identity = type_list(&rep);
            if !identity.is_type_partition {
                let (a, b) = identity.violation.unwrap();
                report.type_partition = Some(Violation::TypePartition {
                    t,
                    detail: format!("types {a:?} and {b:?} overlap without equality"),
                });
            } else {
                let k = t - 1;
                let perms: Vec<Vec<usize>> = if factorial(k) <= config.perm_exhaustive_cap {
                    all_permutations(k)
                } else {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
                    (0..config.perm_samples)
                        .map(|_| {
                            let mut p: Vec<usize> = (0..k).collect();
                            p.shuffle(&mut rng);
                            p
                        })
                        .collect()
                };
                for perm in perms {
                    let tl = permuted_type_list(&rep, &perm);
                    if !tl.is_type_partition {
                        let (a, b) = tl.violation.unwrap();
                        report.type_partition = Some(Violation::TypePartition {
                            t,
                            detail: format!(
                                "under coordinate order {perm:?}, types {a:?} and {b:?} \
                                 overlap without equality"
                            ),
                        });
                        break;
                    }
                }
            }
        }
        if report.maltsev.is_none() {
            let boolean = boolean_relation(instance, t, budget)?;
            match polymorphism_violation(phi, &boolean, budget) {
                Ok(Some((triple, image))) => {
                    report.maltsev = Some(Violation::Maltsev {
                        relation: format!("Boolean(F^[{t}])"),
                        triple,
                        image,
                    });
                }
                Ok(None) => {
                    if let Some((triple, image)) =
                        omega_polymorphism_violation(&rep, phi, budget)?
                    {
                        report.maltsev = Some(Violation::Maltsev {
                            relation: format!("Omega(F^[{t}])"),
                            triple,
                            image,
                        });
                    }
                }
                Err(MaltsevError::Budget(e)) => return Err(e),
                Err(e) => {
                    return Err(ModelError::Unsupported(format!(
                        "polymorphism check failed: {e}"
                    )))
                }
            }
        }
    }
    Ok(report)
}

/// Witness function of Boolean(F_I) over all n coordinates, built by
/// enumeration. In verified mode the polymorphism precondition is checked
/// first.
pub fn boolean_relation_witness(
    instance: &Instance,
    phi: &MaltsevMap,
    verified: bool,
    budget: Budget,
) -> Result<WitnessFunction, PipelineInterrupt> {
    let support = instance.support(budget).map_err(PipelineError::Model)?;
    let rel = Relation::from_tuples(instance.domain.d, instance.n, support);
    if verified {
        match polymorphism_violation(phi, &rel, budget) {
            Ok(None) => {}
            Ok(Some((triple, image))) => {
                return Err(PipelineInterrupt::Violation(Violation::Maltsev {
                    relation: "Boolean(F_I)".into(),
                    triple,
                    image,
                }));
            }
            Err(MaltsevError::Budget(e)) => return Err(PipelineError::Model(e).into()),
            Err(e) => {
                return Err(PipelineError::Unsupported(format!("{e}")).into());
            }
        }
    }
    build_witness_enumerative(&rel, phi).map_err(|e| maltsev_to_interrupt(instance.n, e))
}

/// Either a hard error (budget, unsupported) or a condition violation
/// detected while running.
#[derive(Debug)]
pub enum PipelineInterrupt {
    Error(PipelineError),
    Violation(Violation),
}

impl From<PipelineError> for PipelineInterrupt {
    fn from(e: PipelineError) -> Self {
        PipelineInterrupt::Error(e)
    }
}

fn maltsev_to_interrupt(t: usize, e: MaltsevError) -> PipelineInterrupt {
    match e {
        MaltsevError::Budget(m) => PipelineInterrupt::Error(PipelineError::Model(m)),
        MaltsevError::NotClosed { triple, image } => {
            PipelineInterrupt::Violation(Violation::Maltsev {
                relation: format!("level-{t} class relation"),
                triple,
                image,
            })
        }
        MaltsevError::TypePartitionViolation(detail) => {
            PipelineInterrupt::Violation(Violation::TypePartition { t, detail })
        }
        MaltsevError::TooManyParts { limit } => {
            PipelineInterrupt::Violation(Violation::Runtime {
                t,
                detail: format!("more than {limit} row classes observed"),
            })
        }
        other => PipelineInterrupt::Violation(Violation::Runtime {
            t,
            detail: other.to_string(),
        }),
    }
}

/// The recursive marginal evaluator: F^{[t]}(a) from the levels above t.
/// At the top level it evaluates the instance directly; otherwise it locates
/// the unique row class containing the prefix and recurses one level up.
pub fn compute_f(
    levels: &[LevelData],
    instance: &Instance,
    t: usize,
    prefix: &[u8],
) -> Result<CycloValue, String> {
    debug_assert_eq!(prefix.len(), t);
    if t == instance.n {
        return Ok(instance.eval(prefix));
    }
    let level = levels
        .iter()
        .find(|l| l.t == t + 1)
        .ok_or_else(|| format!("level {} missing", t + 1))?;
    let mut hit: Option<usize> = None;
    for (j, (_, omega)) in level.pairs.iter().enumerate() {
        if omega.member(prefix) {
            if let Some(first) = hit {
                return Err(format!(
                    "prefix {prefix:?} lies in row classes {first} and {j} of level {}",
                    t + 1
                ));
            }
            hit = Some(j);
        }
    }
    let Some(j) = hit else {
        return Ok(CycloValue::zero(instance.root_order));
    };
    let direction = &level.pairs[j].0;
    let next = direction
        .iter()
        .position(|v| !v.is_zero())
        .expect("stored directions are nonzero");
    debug_assert_eq!(direction[next], CycloValue::one(instance.root_order));
    let mut extended = prefix.to_vec();
    extended.push(next as u8);
    let up = compute_f(levels, instance, t + 1, &extended)?;
    let total = sum_values(instance.root_order, direction.iter());
    Ok(up.mul(&total))
}

/// The downward induction: starting from the support of the full product
/// function, split each prefix projection along normalized row directions,
/// keep the classes whose direction sums are nonzero, and union them into
/// the next level's support.
pub fn run_levels(
    instance: &Instance,
    phi: &MaltsevMap,
    verified: bool,
    budget: Budget,
) -> Result<(Vec<LevelData>, bool), PipelineInterrupt> {
    let n = instance.n;
    let mut levels: Vec<LevelData> = Vec::new();
    if n < 2 {
        return Ok((levels, false));
    }
    let omega_n = boolean_relation_witness(instance, phi, verified, budget)?;
    if omega_n.represents_empty() {
        return Ok((levels, true));
    }
    let mut current = omega_n;
    for t in (2..=n).rev() {
        let psi = current.project_prefix(t - 1);
        let mut directions: Vec<Vec<CycloValue>> = Vec::new();
        let mut seen: BTreeMap<Vec<CycloValue>, usize> = BTreeMap::new();
        let outcome = {
            let levels_ref = &levels;
            let labeler = |x: &[u8]| -> Result<Vec<CycloValue>, String> {
                let mut row = Vec::with_capacity(instance.domain.d);
                for b in 0..instance.domain.d as u8 {
                    let mut key = x.to_vec();
                    key.push(b);
                    row.push(compute_f(levels_ref, instance, t, &key)?);
                }
                if row.iter().all(|v| v.is_zero()) {
                    return Err(format!(
                        "prefix {x:?} lies in the level-{t} support but its row is zero"
                    ));
                }
                let dir = normalize_direction(&row);
                if !seen.contains_key(&dir) {
                    seen.insert(dir.clone(), directions.len());
                    directions.push(dir.clone());
                }
                Ok(dir)
            };
            split(&psi, labeler)
        }
        .map_err(|e| maltsev_to_interrupt(t, e))?;
        debug_assert_eq!(outcome.part_count, directions.len());
        let pairs: Vec<(Vec<CycloValue>, WitnessFunction)> = directions
            .into_iter()
            .zip(outcome.parts.into_iter())
            .collect();
        let kept: Vec<WitnessFunction> = pairs
            .iter()
            .filter(|(v, _)| !sum_values(instance.root_order, v.iter()).is_zero())
            .map(|(_, w)| w.clone())
            .collect();
        levels.push(LevelData { t, pairs });
        if t > 2 {
            if kept.is_empty() {
                // The next marginal is identically zero, hence so is Z.
                return Ok((levels, true));
            }
            current = union(&kept, false, budget).map_err(|e| maltsev_to_interrupt(t, e))?;
        }
    }
    Ok((levels, false))
}

/// Full solve: condition checks per mode, the level induction, and the exact
/// partition function as the sum of first-level marginals.
pub fn solve(
    instance: &Instance,
    phi: &MaltsevMap,
    mode: Mode,
    budget: Budget,
) -> Result<PipelineResult, PipelineError> {
    solve_with_config(instance, phi, mode, budget, CheckConfig::default())
}

pub fn solve_with_config(
    instance: &Instance,
    phi: &MaltsevMap,
    mode: Mode,
    budget: Budget,
    config: CheckConfig,
) -> Result<PipelineResult, PipelineError> {
    if mode == Mode::Verified {
        let report = check_instance_conditions(instance, phi, budget, config)?;
        if !report.passed() {
            return Ok(PipelineResult {
                z: None,
                levels: Vec::new(),
                mode,
                violations: report.violations(),
            });
        }
    }
    let (levels, known_zero) = match run_levels(instance, phi, mode == Mode::Verified, budget) {
        Ok(ok) => ok,
        Err(PipelineInterrupt::Error(e)) => return Err(e),
        Err(PipelineInterrupt::Violation(v)) => {
            return Ok(PipelineResult {
                z: None,
                levels: Vec::new(),
                mode,
                violations: vec![v],
            });
        }
    };
    let z = if known_zero {
        CycloValue::zero(instance.root_order)
    } else if instance.n == 0 {
        instance.eval(&[])
    } else {
        let mut acc = CycloValue::zero(instance.root_order);
        for a in 0..instance.domain.d as u8 {
            match compute_f(&levels, instance, 1, &[a]) {
                Ok(v) => acc = acc.add(&v),
                Err(detail) => {
                    return Ok(PipelineResult {
                        z: None,
                        levels,
                        mode,
                        violations: vec![Violation::Runtime { t: 1, detail }],
                    });
                }
            }
        }
        acc
    };
    Ok(PipelineResult {
        z: Some(z),
        levels,
        mode,
        violations: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclo::CycloValue;
    use crate::maltsev::xor3;
    use crate::model::{hadamard_instance, xor3_instance, DomainSpec, Instance, TableFunction};

    fn b() -> Budget {
        Budget::default()
    }

    #[test]
    fn hadamard_levels_and_z() {
        let inst = hadamard_instance();
        let result = solve(&inst, &xor3(), Mode::Verified, b()).unwrap();
        assert_eq!(result.z, Some(CycloValue::from_int(2, 2)));
        assert_eq!(result.levels.len(), 1);
        let level = &result.levels[0];
        assert_eq!(level.t, 2);
        assert_eq!(level.class_count(), 2);
        assert_eq!(
            level.pairs[0].0,
            vec![CycloValue::one(2), CycloValue::one(2)]
        );
        assert_eq!(
            level.pairs[1].0,
            vec![CycloValue::one(2), CycloValue::from_int(-1, 2)]
        );
    }

    #[test]
    fn xor_levels_and_z() {
        let inst = xor3_instance();
        let result = solve(&inst, &xor3(), Mode::Verified, b()).unwrap();
        assert_eq!(result.z, Some(CycloValue::from_int(4, 1)));
        // s_3 = 2 with directions (1,0) and (0,1); s_2 = 1 with (1,1).
        let l3 = result.levels.iter().find(|l| l.t == 3).unwrap();
        assert_eq!(l3.class_count(), 2);
        assert_eq!(l3.pairs[0].0, vec![CycloValue::one(1), CycloValue::zero(1)]);
        assert_eq!(l3.pairs[1].0, vec![CycloValue::zero(1), CycloValue::one(1)]);
        let l2 = result.levels.iter().find(|l| l.t == 2).unwrap();
        assert_eq!(l2.class_count(), 1);
        assert_eq!(l2.pairs[0].0, vec![CycloValue::one(1), CycloValue::one(1)]);
    }

    #[test]
    fn compute_f_matches_marginals() {
        let inst = hadamard_instance();
        let (levels, zero) = run_levels(&inst, &xor3(), false, b()).unwrap();
        assert!(!zero);
        assert_eq!(
            compute_f(&levels, &inst, 1, &[0]).unwrap(),
            CycloValue::from_int(2, 2)
        );
        assert_eq!(
            compute_f(&levels, &inst, 1, &[1]).unwrap(),
            CycloValue::zero(2)
        );
        assert_eq!(
            compute_f(&levels, &inst, 2, &[1, 1]).unwrap(),
            inst.eval(&[1, 1])
        );
    }

    #[test]
    fn zero_instance_early_exit() {
        let mut inst = Instance::new(DomainSpec::new(2), 1, 2);
        let f = TableFunction::new("z", 1, 2, 1);
        // Empty table: identically zero function.
        inst.add_function(f);
        inst.apply("z", vec![0]);
        let result = solve(&inst, &xor3(), Mode::Optimistic, b()).unwrap();
        assert_eq!(result.z, Some(CycloValue::zero(1)));
        assert!(result.levels.is_empty());
    }

    #[test]
    fn conditions_pass_for_hadamard() {
        let report =
            check_instance_conditions(&hadamard_instance(), &xor3(), b(), CheckConfig::default())
                .unwrap();
        assert!(report.passed());
    }

    #[test]
    fn block_orthogonality_violation_detected() {
        // Binary function with rows (1,1) and (1,ζ) over Q(i).
        let mut inst = Instance::new(DomainSpec::new(2), 4, 2);
        let mut g = TableFunction::new("g", 2, 2, 4);
        g.set(vec![0, 0], CycloValue::one(4));
        g.set(vec![0, 1], CycloValue::one(4));
        g.set(vec![1, 0], CycloValue::one(4));
        g.set(vec![1, 1], CycloValue::root_of_unity(4, 1));
        inst.add_function(g);
        inst.apply("g", vec![0, 1]);
        let report =
            check_instance_conditions(&inst, &xor3(), b(), CheckConfig::default()).unwrap();
        match &report.block_orthogonality {
            Some(Violation::BlockOrthogonality { t: 2, rank1_failure: false, .. }) => {}
            other => panic!("expected block-orthogonality failure, got {other:?}"),
        }
        let result = solve(&inst, &xor3(), Mode::Verified, b()).unwrap();
        assert!(result.z.is_none());
        assert!(!result.violations.is_empty());
    }

    #[test]
    fn maltsev_violation_detected() {
        // The OR relation admits no Mal'tsev polymorphism at all.
        let mut inst = Instance::new(DomainSpec::new(2), 1, 2);
        let mut f = TableFunction::new("or", 2, 2, 1);
        f.set(vec![0, 1], CycloValue::one(1));
        f.set(vec![1, 0], CycloValue::one(1));
        f.set(vec![1, 1], CycloValue::one(1));
        inst.add_function(f);
        inst.apply("or", vec![0, 1]);
        let report =
            check_instance_conditions(&inst, &xor3(), b(), CheckConfig::default()).unwrap();
        assert!(matches!(report.maltsev, Some(Violation::Maltsev { .. })));
    }

    #[test]
    fn omega_relation_examples() {
        let inst = hadamard_instance();
        let omega = omega_relation(&inst, 2, b()).unwrap();
        assert_eq!(
            omega,
            Relation::from_tuples(2, 2, vec![vec![0, 0], vec![1, 1]])
        );
    }
}
