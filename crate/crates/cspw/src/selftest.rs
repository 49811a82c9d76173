//! Built-in invariant suites over seeded random corpora, surfaced through
//! the command line. Each suite either passes or reports its first failure.

use crate::corpus;
use crate::cyclo::CycloValue;
use crate::maltsev::{build_witness_enumerative, split, union, MaltsevError};
use crate::model::{Assignments, Budget};
use crate::pipeline::{solve, Mode};
use crate::reductions::count_via_vandermonde;
use crate::rowspace::{block_orthogonal_pair, classify_function, Classification};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub type SuiteResult = (String, Result<(), String>);

fn budget() -> Budget {
    Budget::default()
}

fn suite_cyclo_laws(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for order in [1u32, 2, 3, 4, 6, 8, 12] {
        for _ in 0..20 {
            let a = corpus::random_cyclo(&mut rng, order);
            let b = corpus::random_cyclo(&mut rng, order);
            let c = corpus::random_cyclo(&mut rng, order);
            if a.mul(&b).mul(&c) != a.mul(&b.mul(&c)) {
                return Err(format!("associativity failed at order {order}"));
            }
            if a.mul(&b.add(&c)) != a.mul(&b).add(&a.mul(&c)) {
                return Err(format!("distributivity failed at order {order}"));
            }
            if !a.is_zero() {
                let inv = a.inv().map_err(|e| e.to_string())?;
                if a.mul(&inv) != CycloValue::one(order) {
                    return Err(format!("inverse failed at order {order}"));
                }
            }
            if a.conj().conj() != a {
                return Err("conjugation is not an involution".into());
            }
            if a.mul(&b).conj() != a.conj().mul(&b.conj()) {
                return Err("conjugation is not multiplicative".into());
            }
            if a.mul(&b).magnitude_sq() != a.magnitude_sq().mul(&b.magnitude_sq()) {
                return Err("magnitude_sq is not multiplicative".into());
            }
            if (a.sub(&b).is_zero()) != (a == b) {
                return Err("canonical equality mismatch".into());
            }
        }
    }
    Ok(())
}

fn suite_model_identities(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    for _ in 0..10 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=4);
        let inst = corpus::pure_weight_instance(&mut rng, 2, 4, n, m);
        let z = inst.brute_force_z(budget()).map_err(|e| e.to_string())?;
        let mut marg_sum = CycloValue::zero(inst.root_order);
        for a in 0..inst.domain.d as u8 {
            marg_sum = marg_sum.add(&inst.marginal(1, &[a], budget()).map_err(|e| e.to_string())?);
        }
        if marg_sum != z {
            return Err("marginal sum disagrees with Z".into());
        }
        let hist = inst.value_histogram(budget()).map_err(|e| e.to_string())?;
        let total: u64 = hist.values().sum();
        if total != crate::model::count_assignments(inst.domain.d, inst.n) {
            return Err("histogram counts do not sum to d^n".into());
        }
        let mut weighted = CycloValue::zero(inst.root_order);
        for (v, c) in &hist {
            weighted = weighted.add(&v.scale(&crate::cyclo::Rational::from(num::BigInt::from(*c))));
        }
        if weighted != z {
            return Err("histogram-weighted sum disagrees with Z".into());
        }
        let squared = inst.power(2);
        for x in Assignments::new(inst.domain.d, inst.n) {
            if squared.eval(&x) != inst.eval(&x).mul(&inst.eval(&x)) {
                return Err("power instance law failed".into());
            }
        }
    }
    Ok(())
}

fn suite_witness_roundtrip(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
    for _ in 0..15 {
        let d = rng.gen_range(2..=3);
        let arity = rng.gen_range(2..=5);
        let phi = corpus::corpus_maltsev_map(&mut rng, d);
        let rel = corpus::random_closed_relation(&mut rng, d, arity, &phi, 200);
        let w = build_witness_enumerative(&rel, &phi).map_err(|e| e.to_string())?;
        w.validate_against(&rel).map_err(|e| format!("build: {e}"))?;
        for t in Assignments::new(d, arity) {
            if w.member(&t) != rel.contains(&t) {
                return Err(format!("membership mismatch at {t:?}"));
            }
        }
        if rel.is_empty() {
            continue;
        }
        // Pinning against enumerative recomputation.
        let a = rng.gen_range(0..d as u8);
        let pinned = w.pin(&[a]);
        let expect = crate::maltsev::Relation::from_tuples(
            d,
            arity - 1,
            rel.tuples
                .iter()
                .filter(|t| t[0] == a)
                .map(|t| t[1..].to_vec()),
        );
        if pinned.enumerate(budget()).map_err(|e| e.to_string())? != expect {
            return Err("pin disagrees with enumeration".into());
        }
        pinned
            .validate_against(&expect)
            .map_err(|e| format!("pin validity: {e}"))?;
        // Projection.
        let ell = rng.gen_range(1..arity);
        let proj = w.project_prefix(ell);
        let expect = crate::maltsev::Relation::from_tuples(
            d,
            ell,
            rel.tuples.iter().map(|t| t[..ell].to_vec()),
        );
        if proj.enumerate(budget()).map_err(|e| e.to_string())? != expect {
            return Err("projection disagrees with enumeration".into());
        }
        // Permutation.
        let mut perm: Vec<usize> = (0..arity).collect();
        perm.shuffle(&mut rng);
        let permuted = w.permute(&perm);
        let expect = crate::maltsev::Relation::from_tuples(
            d,
            arity,
            rel.tuples
                .iter()
                .map(|t| perm.iter().map(|&p| t[p]).collect::<Vec<u8>>()),
        );
        if permuted.enumerate(budget()).map_err(|e| e.to_string())? != expect {
            return Err("permutation disagrees with enumeration".into());
        }
        permuted
            .validate_against(&expect)
            .map_err(|e| format!("permute validity: {e}"))?;
    }
    Ok(())
}

fn suite_split(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
    for case in 0..10 {
        let d = rng.gen_range(2..=3);
        let arity = rng.gen_range(2..=4);
        let phi = if d == 2 {
            crate::maltsev::xor3()
        } else {
            crate::maltsev::affine3()
        };
        let rel = corpus::random_closed_relation(&mut rng, d, arity, &phi, 150);
        if rel.is_empty() {
            continue;
        }
        let w = build_witness_enumerative(&rel, &phi).map_err(|e| e.to_string())?;
        let labeler_fn = corpus::LinearLabeler::random(&mut rng, arity, d as u8);
        let outcome = split(&w, |t: &[u8]| Ok::<u8, String>(labeler_fn.label(t)))
            .map_err(|e| format!("case {case}: {e}"))?;
        // Parts must partition the relation and agree with the labeler.
        let mut seen_labels: Vec<u8> = Vec::new();
        for t in &rel.tuples {
            let l = labeler_fn.label(t);
            if !seen_labels.contains(&l) {
                seen_labels.push(l);
            }
            let idx = seen_labels.iter().position(|&x| x == l).unwrap();
            for (j, part) in outcome.parts.iter().enumerate() {
                if part.member(t) != (j == idx) {
                    return Err(format!("case {case}: part membership wrong at {t:?}"));
                }
            }
        }
        if outcome.part_count != seen_labels.len() {
            return Err(format!("case {case}: part count mismatch"));
        }
    }
    // A guaranteed violating partition: one tuple versus the rest.
    let phi = crate::maltsev::xor3();
    let full = crate::maltsev::Relation::full(2, 3);
    let w = build_witness_enumerative(&full, &phi).map_err(|e| e.to_string())?;
    match split(&w, |t: &[u8]| Ok::<u8, String>(u8::from(t == [0, 0, 0]))) {
        Err(MaltsevError::TypePartitionViolation(_)) => Ok(()),
        Err(other) => Err(format!(
            "singleton-versus-rest should raise a type-partition violation, got {other}"
        )),
        Ok(_) => Err("singleton-versus-rest split unexpectedly succeeded".into()),
    }
}

fn suite_pipeline_exactness(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x44);
    for case in 0..12 {
        let (inst, phi) = match case % 4 {
            0 => {
                let n = rng.gen_range(2..=5);
                let m = rng.gen_range(1..=5);
                (corpus::affine_instance(&mut rng, 2, n, m).0, crate::maltsev::xor3())
            }
            1 => {
                let n = rng.gen_range(2..=5);
                let m = rng.gen_range(1..=5);
                (
                    corpus::hadamard_weight_instance(&mut rng, n, m),
                    crate::maltsev::xor3(),
                )
            }
            2 => {
                let n = rng.gen_range(2..=4);
                let m = rng.gen_range(1..=5);
                (
                    corpus::block_weight_instance(&mut rng, 2, n, m),
                    crate::maltsev::xor3(),
                )
            }
            _ => {
                let n = rng.gen_range(2..=4);
                let m = rng.gen_range(1..=4);
                (corpus::affine_instance(&mut rng, 3, n, m).0, crate::maltsev::affine3())
            }
        };
        let expected = inst.brute_force_z(budget()).map_err(|e| e.to_string())?;
        let result = solve(&inst, &phi, Mode::Optimistic, budget()).map_err(|e| e.to_string())?;
        match result.z {
            Some(z) if z == expected => {}
            Some(z) => return Err(format!("case {case}: solve returned {z}, oracle {expected}")),
            None => {
                return Err(format!(
                    "case {case}: unexpected violations {:?}",
                    result.violations
                ))
            }
        }
    }
    Ok(())
}

fn suite_vandermonde(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    for _ in 0..8 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let inst = corpus::pure_weight_instance(&mut rng, 2, 4, n, m);
        let mut oracle = |i: &crate::model::Instance| i.brute_force_z(budget());
        let hist = count_via_vandermonde(&inst, &mut oracle, budget()).map_err(|e| e.to_string())?;
        let direct = inst.value_histogram(budget()).map_err(|e| e.to_string())?;
        if hist != direct {
            return Err("vandermonde histogram disagrees with enumeration".into());
        }
    }
    Ok(())
}

fn suite_block_orthogonal_identities(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x66);
    for _ in 0..10 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=4);
        let inst = corpus::hadamard_weight_instance(&mut rng, n, m);
        for t in 2..=inst.n {
            let rows = crate::pipeline::marginal_rows(&inst, t, budget()).map_err(|e| e.to_string())?;
            if !matches!(classify_function(&rows), Classification::BlockOrthogonal) {
                return Err("Hadamard-family marginal not block-orthogonal".into());
            }
            let nonzero: Vec<&Vec<CycloValue>> = rows
                .iter()
                .filter(|(_, r)| !r.iter().all(|v| v.is_zero()))
                .map(|(_, r)| r)
                .collect();
            for i in 0..nonzero.len() {
                for j in (i + 1)..nonzero.len() {
                    if let Ok(true) = block_orthogonal_pair(nonzero[i], nonzero[j]) {
                        let dot = nonzero[i]
                            .iter()
                            .zip(nonzero[j].iter())
                            .fold(CycloValue::zero(inst.root_order), |acc, (a, b)| {
                                acc.add(&a.mul(&b.conj()))
                            });
                        if !dot.is_zero() {
                            return Err("block-orthogonal pair is not orthogonal".into());
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn suite_union_split_inverse(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    for _ in 0..8 {
        let d = 2;
        let phi = crate::maltsev::xor3();
        let arity = rng.gen_range(2..=4);
        let rel = corpus::random_closed_relation(&mut rng, d, arity, &phi, 100);
        if rel.is_empty() {
            continue;
        }
        let w = build_witness_enumerative(&rel, &phi).map_err(|e| e.to_string())?;
        let labeler_fn = corpus::LinearLabeler::random(&mut rng, arity, d as u8);
        let outcome = split(&w, |t: &[u8]| Ok::<u8, String>(labeler_fn.label(t)))
            .map_err(|e| e.to_string())?;
        let rejoined = union(&outcome.parts, true, budget()).map_err(|e| e.to_string())?;
        if rejoined.enumerate(budget()).map_err(|e| e.to_string())? != rel {
            return Err("union of split parts disagrees with the original".into());
        }
    }
    Ok(())
}

/// Runs every suite at the given seed.
pub fn run_selftest(seed: u64) -> Vec<SuiteResult> {
    vec![
        ("cyclo-field-laws".into(), suite_cyclo_laws(seed)),
        ("model-identities".into(), suite_model_identities(seed)),
        ("witness-roundtrip".into(), suite_witness_roundtrip(seed)),
        ("split".into(), suite_split(seed)),
        ("pipeline-exactness".into(), suite_pipeline_exactness(seed)),
        ("vandermonde-roundtrip".into(), suite_vandermonde(seed)),
        (
            "block-orthogonality".into(),
            suite_block_orthogonal_identities(seed),
        ),
        ("union-split-inverse".into(), suite_union_split_inverse(seed)),
    ]
}
