//! Seeded generators for test corpora: tractable instance families, random
//! Mal'tsev-closed relations, and partitions with or without the
//! type-partition property. Shared between the built-in selftest and the
//! test suites.

use crate::cyclo::{CycloValue, Rational};
use crate::maltsev::{affine3, closure, identity_respecting_tables, xor3, MaltsevMap, Relation};
use crate::model::{Assignments, Budget, DomainSpec, Instance, TableFunction};
use num::BigInt;
use rand::prelude::*;

/// A linear equation Σ coef_i · x_i ≡ rhs (mod modulus) over listed variables.
#[derive(Debug, Clone)]
pub struct Equation {
    pub vars: Vec<usize>,
    pub coefs: Vec<u8>,
    pub rhs: u8,
    pub modulus: u8,
}

/// Builds the 0/1 table of an equation as a constraint function.
fn equation_table(name: String, eq: &Equation, d: usize) -> TableFunction {
    let mut f = TableFunction::new(name, eq.vars.len(), d, 1);
    for x in Assignments::new(d, eq.vars.len()) {
        let mut acc: u32 = 0;
        for (v, c) in x.iter().zip(eq.coefs.iter()) {
            acc += *v as u32 * *c as u32;
        }
        if acc % eq.modulus as u32 == eq.rhs as u32 {
            f.set(x, CycloValue::one(1));
        }
    }
    f
}

/// A consistent random linear system over Z_modulus as a 0/1 instance,
/// together with its equations for independent verification.
pub fn affine_instance(
    rng: &mut impl Rng,
    modulus: u8,
    n: usize,
    m: usize,
) -> (Instance, Vec<Equation>) {
    let d = modulus as usize;
    let hidden: Vec<u8> = (0..n).map(|_| rng.gen_range(0..modulus)).collect();
    let mut inst = Instance::new(DomainSpec::new(d), 1, n);
    let mut equations = Vec::with_capacity(m);
    for idx in 0..m {
        let arity = rng.gen_range(1..=3usize.min(n));
        let mut vars: Vec<usize> = (0..n).collect();
        vars.shuffle(rng);
        vars.truncate(arity);
        vars.sort_unstable();
        let coefs: Vec<u8> = (0..arity).map(|_| rng.gen_range(1..modulus.max(2))).collect();
        let mut rhs: u32 = 0;
        for (v, c) in vars.iter().zip(coefs.iter()) {
            rhs += hidden[*v] as u32 * *c as u32;
        }
        let eq = Equation {
            vars: vars.clone(),
            coefs,
            rhs: (rhs % modulus as u32) as u8,
            modulus,
        };
        let name = format!("e{idx}");
        inst.add_function(equation_table(name.clone(), &eq, d));
        inst.apply(&name, vars);
        equations.push(eq);
    }
    (inst, equations)
}

/// Random Hadamard-weight instance: products of (−1)^{x_i x_j} constraints.
pub fn hadamard_weight_instance(rng: &mut impl Rng, n: usize, m: usize) -> Instance {
    assert!(n >= 2);
    let mut inst = Instance::new(DomainSpec::new(2), 2, n);
    inst.add_function(crate::model::hadamard_function(2));
    for _ in 0..m {
        let i = rng.gen_range(0..n);
        let j = loop {
            let j = rng.gen_range(0..n);
            if j != i {
                break j;
            }
        };
        inst.apply("h", vec![i, j]);
    }
    inst
}

fn small_positive_rational(rng: &mut impl Rng) -> Rational {
    let num = rng.gen_range(1..=6i64);
    let den = rng.gen_range(1..=4i64);
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Random instance over block-diagonal nonnegative weights: binary
/// same-block indicator functions with per-block weights, plus strictly
/// positive unary weights. Blocks are {0,…,d−1} singletons, or the pair
/// {0,1} when the domain is Boolean.
pub fn block_weight_instance(rng: &mut impl Rng, d: usize, n: usize, m: usize) -> Instance {
    let mut inst = Instance::new(DomainSpec::new(d), 1, n);
    // Unary positive weights.
    let mut u = TableFunction::new("u", 1, d, 1);
    for a in 0..d as u8 {
        u.set(
            vec![a],
            CycloValue::from_rational(small_positive_rational(rng), 1),
        );
    }
    inst.add_function(u);
    // Binary block weights: singleton blocks always; the whole-domain block
    // is also valid for d = 2.
    let merged = d == 2 && rng.gen_bool(0.3);
    let mut b = TableFunction::new("b", 2, d, 1);
    if merged {
        let w = small_positive_rational(rng);
        for x in 0..d as u8 {
            for y in 0..d as u8 {
                b.set(vec![x, y], CycloValue::from_rational(w.clone(), 1));
            }
        }
    } else {
        for a in 0..d as u8 {
            b.set(
                vec![a, a],
                CycloValue::from_rational(small_positive_rational(rng), 1),
            );
        }
    }
    inst.add_function(b);
    for _ in 0..m {
        if n >= 2 && rng.gen_bool(0.7) {
            let i = rng.gen_range(0..n);
            let j = loop {
                let j = rng.gen_range(0..n);
                if j != i {
                    break j;
                }
            };
            inst.apply("b", vec![i, j]);
        } else {
            inst.apply("u", vec![rng.gen_range(0..n)]);
        }
    }
    inst
}

/// A random Mal'tsev map: identity-forced entries plus uniform free entries.
pub fn random_maltsev_map(rng: &mut impl Rng, d: usize) -> MaltsevMap {
    let free = d * (d - 1) * (d - 1);
    let total = (d as u64).pow(free as u32);
    let idx = rng.gen_range(0..total);
    identity_respecting_tables(d)
        .nth(idx as usize)
        .expect("index within candidate count")
}

/// A random nonempty φ-closed relation: the closure of a few random seed
/// tuples, re-rolled until it fits the size cap.
pub fn random_closed_relation(
    rng: &mut impl Rng,
    d: usize,
    arity: usize,
    phi: &MaltsevMap,
    size_cap: usize,
) -> Relation {
    let budget = Budget::new(1 << 26);
    loop {
        let seed_count = rng.gen_range(1..=3);
        let seeds: Vec<Vec<u8>> = (0..seed_count)
            .map(|_| (0..arity).map(|_| rng.gen_range(0..d as u8)).collect())
            .collect();
        let rel = Relation::from_tuples(d, arity, seeds);
        if let Ok(closed) = closure(&rel, phi, budget) {
            if closed.len() <= size_cap {
                return closed;
            }
        }
    }
}

/// A canonical φ for each small domain plus random ones.
pub fn corpus_maltsev_map(rng: &mut impl Rng, d: usize) -> MaltsevMap {
    match (d, rng.gen_range(0..3u8)) {
        (2, 0 | 1) => xor3(),
        (3, 0 | 1) => affine3(),
        _ => random_maltsev_map(rng, d),
    }
}

/// A labeling of an affine-closed relation by a random linear functional,
/// which always satisfies the type-partition property (the parts are fibers
/// of an affine map, so every coordinate rotation stays affine).
pub struct LinearLabeler {
    pub coefs: Vec<u8>,
    pub modulus: u8,
}

impl LinearLabeler {
    pub fn random(rng: &mut impl Rng, arity: usize, modulus: u8) -> LinearLabeler {
        LinearLabeler {
            coefs: (0..arity).map(|_| rng.gen_range(0..modulus)).collect(),
            modulus,
        }
    }

    pub fn label(&self, t: &[u8]) -> u8 {
        let mut acc: u32 = 0;
        for (v, c) in t.iter().zip(self.coefs.iter()) {
            acc += *v as u32 * *c as u32;
        }
        (acc % self.modulus as u32) as u8
    }
}

/// Random pure-weight instance: sparse tables of values q·ζ^k with small
/// rational q, suitable for histogram and purification tests.
pub fn pure_weight_instance(
    rng: &mut impl Rng,
    d: usize,
    root_order: u32,
    n: usize,
    m: usize,
) -> Instance {
    let mut inst = Instance::new(DomainSpec::new(d), root_order, n);
    let fn_count = rng.gen_range(1..=2);
    for fi in 0..fn_count {
        let arity = rng.gen_range(1..=2.min(n));
        let name = format!("p{fi}");
        let mut f = TableFunction::new(name.clone(), arity, d, root_order);
        for key in Assignments::new(d, arity) {
            if rng.gen_bool(0.8) {
                let q = small_positive_rational(rng);
                let k = rng.gen_range(0..root_order);
                f.set(key, CycloValue::root_of_unity(root_order, k).scale(&q));
            }
        }
        inst.add_function(f);
    }
    let names: Vec<String> = inst.library.keys().cloned().collect();
    for _ in 0..m {
        let name = names.choose(rng).unwrap().clone();
        let arity = inst.library[&name].arity;
        let vars: Vec<usize> = (0..arity).map(|_| rng.gen_range(0..n)).collect();
        inst.apply(&name, vars);
    }
    inst
}

/// Random general cyclotomic value with small coefficients.
pub fn random_cyclo(rng: &mut impl Rng, order: u32) -> CycloValue {
    let phi = crate::cyclo::euler_phi(order);
    let coeffs: Vec<Rational> = (0..phi)
        .map(|_| {
            Rational::new(
                BigInt::from(rng.gen_range(-9..=9i64)),
                BigInt::from(rng.gen_range(1..=9i64)),
            )
        })
        .collect();
    CycloValue::canonicalize(&coeffs, order)
}
