//! Constructive reduction machinery: recovering value histograms through
//! Vandermonde systems over powered instances, purification of rational-
//! magnitude functions onto canonical primes, function order, and the
//! gadget matrices with their graph-to-instance realizations.

use crate::cyclo::{solve_cyclo_system, CycloValue, Rational};
use crate::model::{
    count_assignments, Assignments, Budget, DomainSpec, Instance, ModelError, TableFunction,
};
use crate::rowspace::{classify_function, linearly_dependent, Classification};
use num::bigint::BigInt;
use num::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A directed or undirected multigraph with 0-based vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub directed: bool,
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(directed: bool, vertices: usize) -> Graph {
        Graph {
            directed,
            vertices,
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.vertices && v < self.vertices);
        self.edges.push((u, v));
    }
}

/// Parses `graph <directed|undirected> <V>` followed by `edge u v` lines.
pub fn parse_graph(text: &str) -> Result<Graph, ModelError> {
    let mut graph: Option<Graph> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match (&mut graph, tokens[0]) {
            (None, "graph") => {
                if tokens.len() != 3 {
                    return Err(ModelError::Parse {
                        line: line_no,
                        msg: "expected \"graph <directed|undirected> <V>\"".into(),
                    });
                }
                let directed = match tokens[1] {
                    "directed" => true,
                    "undirected" => false,
                    other => {
                        return Err(ModelError::Parse {
                            line: line_no,
                            msg: format!("unknown orientation \"{other}\""),
                        })
                    }
                };
                let v: usize = tokens[2].parse().map_err(|_| ModelError::Parse {
                    line: line_no,
                    msg: "malformed vertex count".into(),
                })?;
                graph = Some(Graph::new(directed, v));
            }
            (Some(g), "edge") => {
                if tokens.len() != 3 {
                    return Err(ModelError::Parse {
                        line: line_no,
                        msg: "expected \"edge <u> <v>\"".into(),
                    });
                }
                let u: usize = tokens[1].parse().map_err(|_| ModelError::Parse {
                    line: line_no,
                    msg: "malformed endpoint".into(),
                })?;
                let v: usize = tokens[2].parse().map_err(|_| ModelError::Parse {
                    line: line_no,
                    msg: "malformed endpoint".into(),
                })?;
                if u >= g.vertices || v >= g.vertices {
                    return Err(ModelError::Parse {
                        line: line_no,
                        msg: format!("edge endpoint out of range (V = {})", g.vertices),
                    });
                }
                g.edges.push((u, v));
            }
            (None, other) => {
                return Err(ModelError::Parse {
                    line: line_no,
                    msg: format!("expected \"graph\" header, found \"{other}\""),
                })
            }
            (Some(_), other) => {
                return Err(ModelError::Parse {
                    line: line_no,
                    msg: format!("unknown directive \"{other}\""),
                })
            }
        }
    }
    graph.ok_or(ModelError::Parse {
        line: 0,
        msg: "empty graph file".into(),
    })
}

/// A square matrix of field values with tuple-valued index labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetMatrix {
    pub labels: Vec<Vec<u8>>,
    pub entries: Vec<Vec<CycloValue>>,
}

impl GadgetMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn rows(&self) -> Vec<(Vec<u8>, Vec<CycloValue>)> {
        self.labels
            .iter()
            .cloned()
            .zip(self.entries.iter().cloned())
            .collect()
    }
}

impl fmt::Display for GadgetMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, row) in self.labels.iter().zip(self.entries.iter()) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let key: Vec<String> = label.iter().map(|a| a.to_string()).collect();
            writeln!(f, "({}) | {}", key.join(","), cells.join(" | "))?;
        }
        Ok(())
    }
}

/// Block-rank-1/orthogonality classification of a matrix, by its rows.
pub fn matrix_classification(m: &GadgetMatrix) -> Classification {
    classify_function(&m.rows())
}

/// Z_A(G): the graph-homomorphism partition function of a square matrix.
pub fn eval_graph_hom(
    a: &GadgetMatrix,
    g: &Graph,
    budget: Budget,
) -> Result<CycloValue, ModelError> {
    let dim = a.dim();
    assert!(dim >= 1);
    let order = a.entries[0][0].order();
    budget.check(count_assignments(dim, g.vertices))?;
    let mut acc = CycloValue::zero(order);
    let dim_u8 = dim.min(255) as usize;
    for x in Assignments::new(dim_u8, g.vertices) {
        let mut term = CycloValue::one(order);
        let mut zero = false;
        for &(u, v) in &g.edges {
            let e = &a.entries[x[u] as usize][x[v] as usize];
            if e.is_zero() {
                zero = true;
                break;
            }
            term = term.mul(e);
        }
        if !zero {
            acc = acc.add(&term);
        }
    }
    Ok(acc)
}

/// All products of exactly m factors drawn (with repetition) from the image
/// set, deduplicated. Guarded by a combinatorial budget on the set size.
pub fn candidate_value_set(
    image: &[CycloValue],
    m: usize,
    budget: Budget,
) -> Result<BTreeSet<CycloValue>, ReductionError> {
    assert!(m >= 1);
    assert!(!image.is_empty());
    let order = image[0].order();
    let mut current: BTreeSet<CycloValue> = BTreeSet::new();
    current.insert(CycloValue::one(order));
    let mut steps: u64 = 0;
    for _ in 0..m {
        let mut next = BTreeSet::new();
        for base in &current {
            for factor in image {
                steps += 1;
                if steps > budget.max_steps {
                    return Err(ReductionError::Model(ModelError::BudgetExceeded {
                        needed: steps,
                        budget: budget.max_steps,
                    }));
                }
                next.insert(base.mul(factor));
            }
        }
        current = next;
    }
    Ok(current)
}

/// Recovers the value histogram of an instance from partition-function
/// values of its powered copies, by an exact Vandermonde solve. The zero
/// count comes from the d^n complement.
pub fn count_via_vandermonde(
    instance: &Instance,
    z_oracle: &mut dyn FnMut(&Instance) -> Result<CycloValue, ModelError>,
    budget: Budget,
) -> Result<BTreeMap<CycloValue, u64>, ReductionError> {
    let total = count_assignments(instance.domain.d, instance.n);
    let m = instance.constraints.len();
    if m == 0 {
        // Empty product: F_I is identically 1.
        let mut hist = BTreeMap::new();
        hist.insert(CycloValue::one(instance.root_order), total);
        return Ok(hist);
    }
    let image = instance.applied_image_nonzero();
    let candidates: Vec<CycloValue> = if image.is_empty() {
        Vec::new()
    } else {
        candidate_value_set(&image, m, budget)?
            .into_iter()
            .collect()
    };
    let s = candidates.len();
    let mut counts: BTreeMap<CycloValue, u64> = BTreeMap::new();
    let mut nonzero_total: u64 = 0;
    if s > 0 {
        let mut rhs = Vec::with_capacity(s);
        let mut mat = Vec::with_capacity(s);
        for ell in 1..=s {
            rhs.push(z_oracle(&instance.power(ell))?);
            mat.push(
                candidates
                    .iter()
                    .map(|c| c.pow(ell as u64))
                    .collect::<Vec<_>>(),
            );
        }
        let solution = solve_cyclo_system(&mat, &rhs)
            .expect("Vandermonde system on distinct nonzero values is nonsingular");
        for (c, n_c) in candidates.into_iter().zip(solution) {
            let q = n_c.as_rational().ok_or_else(|| {
                ReductionError::Inconsistent(format!(
                    "count for value {c} came out non-rational: {n_c}"
                ))
            })?;
            if q.is_negative() || !q.denom().is_one() {
                return Err(ReductionError::Inconsistent(format!(
                    "count for value {c} came out as {q}, not a non-negative integer"
                )));
            }
            let n: u64 = q.numer().try_into().map_err(|_| {
                ReductionError::Inconsistent(format!("count for value {c} overflows"))
            })?;
            if n > 0 {
                counts.insert(c, n);
                nonzero_total += n;
            }
        }
    }
    if nonzero_total > total {
        return Err(ReductionError::Inconsistent(format!(
            "recovered counts sum to {nonzero_total} > d^n = {total}"
        )));
    }
    let zero_count = total - nonzero_total;
    if zero_count > 0 {
        counts.insert(CycloValue::zero(instance.root_order), zero_count);
    }
    Ok(counts)
}

/// order(F): the least positive K making every nonzero value's K-th power
/// positive, i.e. the lcm of the unit-part orders. Errors on non-pure input.
pub fn order_of(f: &TableFunction) -> Result<u32, ReductionError> {
    let mut k: u32 = 1;
    for (key, v) in f.entries() {
        let pure = v.to_pure().ok_or_else(|| {
            ReductionError::Unsupported(format!("value {v} of {} at {key:?} is not pure", f.name))
        })?;
        k = num::integer::lcm(k, pure.unit_order(f.root_order));
    }
    Ok(k)
}

/// Purification over rational magnitudes: the generating set is the sorted
/// list of primes occurring in any nonzero magnitude, the i-th generator is
/// replaced by the i-th prime, and unit parts are preserved.
pub fn purify(fns: &[TableFunction]) -> Result<Vec<TableFunction>, ReductionError> {
    // Gather the primes appearing in any magnitude.
    let mut generator_primes: BTreeSet<u64> = BTreeSet::new();
    let mut pures: Vec<Vec<(Vec<u8>, Rational, u32)>> = Vec::new();
    for f in fns {
        let mut entries = Vec::new();
        for (key, v) in f.entries() {
            let pure = v.to_pure().ok_or_else(|| {
                ReductionError::Unsupported(format!(
                    "value {v} of {} at {key:?} has no rational-magnitude pure form",
                    f.name
                ))
            })?;
            for prime in factor_primes(pure.magnitude.numer()) {
                generator_primes.insert(prime);
            }
            for prime in factor_primes(pure.magnitude.denom()) {
                generator_primes.insert(prime);
            }
            entries.push((key.clone(), pure.magnitude, pure.unit_exponent));
        }
        pures.push(entries);
    }
    let generators: Vec<u64> = generator_primes.into_iter().collect();
    let targets: Vec<u64> = small_primes(generators.len());
    let mut out = Vec::with_capacity(fns.len());
    for (f, entries) in fns.iter().zip(pures) {
        let mut g = TableFunction::new(f.name.clone(), f.arity, f.d, f.root_order);
        for (key, magnitude, unit_exp) in entries {
            let mut exps: BTreeMap<u64, i64> = BTreeMap::new();
            for (p, e) in factor_with_multiplicity(magnitude.numer()) {
                *exps.entry(p).or_insert(0) += e;
            }
            for (p, e) in factor_with_multiplicity(magnitude.denom()) {
                *exps.entry(p).or_insert(0) -= e;
            }
            let mut new_mag = Rational::one();
            for (p, e) in exps {
                let idx = generators.binary_search(&p).expect("prime was collected");
                let target = Rational::from(BigInt::from(targets[idx]));
                if e >= 0 {
                    for _ in 0..e {
                        new_mag *= &target;
                    }
                } else {
                    for _ in 0..(-e) {
                        new_mag /= &target;
                    }
                }
            }
            let value = CycloValue::root_of_unity(f.root_order, unit_exp).scale(&new_mag);
            g.set(key, value);
        }
        // Boolean pattern is preserved by construction; assert it.
        debug_assert_eq!(f.support(), g.support());
        out.push(g);
    }
    // Dependence pattern is preserved both ways on shared-support row pairs.
    for (f, g) in fns.iter().zip(out.iter()) {
        if f.arity >= 2 {
            assert_dependence_pattern_preserved(f, g)?;
        }
    }
    Ok(out)
}

fn assert_dependence_pattern_preserved(
    f: &TableFunction,
    g: &TableFunction,
) -> Result<(), ReductionError> {
    let rows_f = table_rows(f);
    let rows_g = table_rows(g);
    for i in 0..rows_f.len() {
        for j in (i + 1)..rows_f.len() {
            let (_, rf1) = &rows_f[i];
            let (_, rf2) = &rows_f[j];
            let (_, rg1) = &rows_g[i];
            let (_, rg2) = &rows_g[j];
            let shared = (0..rf1.len()).any(|c| !rf1[c].is_zero() && !rf2[c].is_zero());
            if !shared {
                continue;
            }
            let before = linearly_dependent(rf1, rf2);
            let after = linearly_dependent(rg1, rg2);
            if let (Ok(b), Ok(a)) = (before, after) {
                if b != a {
                    return Err(ReductionError::Inconsistent(format!(
                        "purification changed the dependence pattern of rows {:?} and {:?} of {}",
                        rows_f[i].0, rows_f[j].0, f.name
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The rows of a standalone table function viewed as a matrix over
/// D^{arity−1} × D.
pub fn table_rows(f: &TableFunction) -> Vec<(Vec<u8>, Vec<CycloValue>)> {
    let mut rows = Vec::new();
    for x in Assignments::new(f.d, f.arity - 1) {
        let mut row = Vec::with_capacity(f.d);
        let mut key = x.clone();
        key.push(0);
        for a in 0..f.d as u8 {
            *key.last_mut().unwrap() = a;
            row.push(f.value(&key));
        }
        rows.push((x, row));
    }
    rows
}

fn factor_primes(n: &BigInt) -> Vec<u64> {
    factor_with_multiplicity(n).into_iter().map(|(p, _)| p).collect()
}

fn factor_with_multiplicity(n: &BigInt) -> Vec<(u64, i64)> {
    let mut out = Vec::new();
    let mut m = n.abs();
    if m.is_zero() || m.is_one() {
        return out;
    }
    let mut p: u64 = 2;
    loop {
        let bp = BigInt::from(p);
        if (&bp * &bp) > m {
            break;
        }
        let mut e = 0i64;
        while (&m % &bp).is_zero() {
            m /= &bp;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if !m.is_one() {
        let last: u64 = (&m).try_into().expect("magnitudes fit machine primes");
        out.push((last, 1));
    }
    out
}

fn small_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate: u64 = 2;
    while out.len() < count {
        if (2..candidate).take_while(|q| q * q <= candidate).all(|q| candidate % q != 0) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// The power-sum gadget matrix over row prefixes:
/// A_r(w, w') = Σ_i F(w,i) · (F(w',i))^{rK−1}, with K = order(F).
pub fn gadget_a_r(f: &TableFunction, r: u32) -> Result<GadgetMatrix, ReductionError> {
    assert!(f.arity >= 2);
    assert!(r >= 1);
    let k = order_of(f)?;
    let rows = table_rows(f);
    let e = (r * k - 1) as u64;
    let labels: Vec<Vec<u8>> = rows.iter().map(|(x, _)| x.clone()).collect();
    let mut entries = Vec::with_capacity(labels.len());
    for (_, row_w) in &rows {
        let mut out_row = Vec::with_capacity(labels.len());
        for (_, row_w2) in &rows {
            let mut acc = CycloValue::zero(f.root_order);
            for i in 0..f.d {
                acc = acc.add(&row_w[i].mul(&row_w2[i].pow(e)));
            }
            out_row.push(acc);
        }
        entries.push(out_row);
    }
    Ok(GadgetMatrix { labels, entries })
}

/// Realizes EVAL(A_r) inside #CSP(F): per directed edge (u, v), one copy of
/// F on u's vertex variables with the edge variable, and rK−1 copies on v's.
pub fn realize_a_r(f: &TableFunction, r: u32, g: &Graph) -> Result<Instance, ReductionError> {
    assert!(g.directed, "the power-sum gadget consumes directed graphs");
    let k = order_of(f)?;
    let block = f.arity - 1;
    let n = block * g.vertices + g.edges.len();
    let mut inst = Instance::new(DomainSpec::new(f.d), f.root_order, n);
    inst.add_function(f.clone());
    for (e_idx, &(u, v)) in g.edges.iter().enumerate() {
        let w_e = block * g.vertices + e_idx;
        let mut head: Vec<usize> = (0..block).map(|j| u * block + j).collect();
        head.push(w_e);
        inst.apply(&f.name, head);
        let mut tail: Vec<usize> = (0..block).map(|j| v * block + j).collect();
        tail.push(w_e);
        for _ in 0..(r * k - 1) {
            inst.apply(&f.name, tail.clone());
        }
    }
    Ok(inst)
}

/// The symmetric type-partition gadget matrix over D^ℓ:
/// A(z, w) = Σ_{z', w'} (Σ_p F(z,z',p)·F(w,w',p)^{K−1})(Σ_q F(z,z',q)^{K−1}·F(w,w',q)).
pub fn gadget_a_typepartition(
    f: &TableFunction,
    ell: usize,
) -> Result<GadgetMatrix, ReductionError> {
    assert!(f.arity >= 2);
    assert!(ell >= 1 && ell + 2 <= f.arity, "need 1 ≤ ℓ ≤ n−2");
    let k = order_of(f)?;
    if !matches!(classify_function(&table_rows(f)), Classification::BlockOrthogonal) {
        return Err(ReductionError::Unsupported(format!(
            "{} is not block-orthogonal; the type-partition gadget requires it",
            f.name
        )));
    }
    let mid = f.arity - 1 - ell;
    let e = (k - 1) as u64;
    let labels: Vec<Vec<u8>> = Assignments::new(f.d, ell).collect();
    let mut entries = vec![vec![CycloValue::zero(f.root_order); labels.len()]; labels.len()];
    for (zi, z) in labels.iter().enumerate() {
        for (wi, w) in labels.iter().enumerate() {
            let mut acc = CycloValue::zero(f.root_order);
            for zp in Assignments::new(f.d, mid) {
                for wp in Assignments::new(f.d, mid) {
                    let mut left = CycloValue::zero(f.root_order);
                    let mut right = CycloValue::zero(f.root_order);
                    for p in 0..f.d as u8 {
                        let mut kz: Vec<u8> = z.clone();
                        kz.extend_from_slice(&zp);
                        kz.push(p);
                        let mut kw: Vec<u8> = w.clone();
                        kw.extend_from_slice(&wp);
                        kw.push(p);
                        let fz = f.value(&kz);
                        let fw = f.value(&kw);
                        left = left.add(&fz.mul(&fw.pow(e)));
                        right = right.add(&fz.pow(e).mul(&fw));
                    }
                    acc = acc.add(&left.mul(&right));
                }
            }
            entries[zi][wi] = acc;
        }
    }
    Ok(GadgetMatrix { labels, entries })
}

/// Realizes EVAL(A) for the type-partition gadget inside #CSP(F) on an
/// undirected graph, with shared vertex prefixes and per-edge auxiliaries.
pub fn realize_a_typepartition(
    f: &TableFunction,
    ell: usize,
    g: &Graph,
) -> Result<Instance, ReductionError> {
    assert!(!g.directed, "the type-partition gadget consumes undirected graphs");
    assert!(ell >= 1 && ell + 2 <= f.arity);
    let k = order_of(f)?;
    let mid = f.arity - 1 - ell;
    // Per vertex: ℓ variables; per edge: p, q, then mid-sized s and r blocks.
    let edge_block = 2 + 2 * mid;
    let n = ell * g.vertices + edge_block * g.edges.len();
    let mut inst = Instance::new(DomainSpec::new(f.d), f.root_order, n);
    inst.add_function(f.clone());
    let vertex_vars = |v: usize| -> Vec<usize> { (0..ell).map(|j| v * ell + j).collect() };
    for (e_idx, &(u, v)) in g.edges.iter().enumerate() {
        let base = ell * g.vertices + edge_block * e_idx;
        let p_e = base;
        let q_e = base + 1;
        let s_vars: Vec<usize> = (0..mid).map(|j| base + 2 + j).collect();
        let r_vars: Vec<usize> = (0..mid).map(|j| base + 2 + mid + j).collect();
        let mut u_s_p = vertex_vars(u);
        u_s_p.extend_from_slice(&s_vars);
        u_s_p.push(p_e);
        inst.apply(&f.name, u_s_p.clone());
        let mut v_r_q = vertex_vars(v);
        v_r_q.extend_from_slice(&r_vars);
        v_r_q.push(q_e);
        inst.apply(&f.name, v_r_q.clone());
        let mut u_s_q = vertex_vars(u);
        u_s_q.extend_from_slice(&s_vars);
        u_s_q.push(q_e);
        let mut v_r_p = vertex_vars(v);
        v_r_p.extend_from_slice(&r_vars);
        v_r_p.push(p_e);
        for _ in 0..(k - 1) {
            inst.apply(&f.name, u_s_q.clone());
            inst.apply(&f.name, v_r_p.clone());
        }
    }
    Ok(inst)
}

/// The dependence-detector function H(x, y) = Σ_z F(x,z) · (F(y,z))^{K−1}
/// over 2(n−1) variables; its support is exactly the row-dependence relation.
pub fn gadget_h(f: &TableFunction) -> Result<TableFunction, ReductionError> {
    assert!(f.arity >= 2);
    let k = order_of(f)?;
    if !matches!(classify_function(&table_rows(f)), Classification::BlockOrthogonal) {
        return Err(ReductionError::Unsupported(format!(
            "{} is not block-orthogonal; the dependence detector requires it",
            f.name
        )));
    }
    let block = f.arity - 1;
    let e = (k - 1) as u64;
    let mut h = TableFunction::new(format!("H_{}", f.name), 2 * block, f.d, f.root_order);
    for x in Assignments::new(f.d, block) {
        for y in Assignments::new(f.d, block) {
            let mut acc = CycloValue::zero(f.root_order);
            for z in 0..f.d as u8 {
                let mut kx = x.clone();
                kx.push(z);
                let mut ky = y.clone();
                ky.push(z);
                acc = acc.add(&f.value(&kx).mul(&f.value(&ky).pow(e)));
            }
            if !acc.is_zero() {
                let mut key = x.clone();
                key.extend_from_slice(&y);
                h.set(key, acc);
            }
        }
    }
    Ok(h)
}

/// Rewrites H-applications into F-applications: each application on
/// (x…, y…) gains a fresh variable z and becomes one copy of F(x…, z) plus
/// K−1 copies of F(y…, z).
pub fn realize_h(
    f: &TableFunction,
    applications: &[(Vec<usize>, Vec<usize>)],
    n_vars: usize,
) -> Result<Instance, ReductionError> {
    let k = order_of(f)?;
    let block = f.arity - 1;
    let n = n_vars + applications.len();
    let mut inst = Instance::new(DomainSpec::new(f.d), f.root_order, n);
    inst.add_function(f.clone());
    for (idx, (xs, ys)) in applications.iter().enumerate() {
        assert_eq!(xs.len(), block);
        assert_eq!(ys.len(), block);
        let z = n_vars + idx;
        let mut head = xs.clone();
        head.push(z);
        inst.apply(&f.name, head);
        let mut tail = ys.clone();
        tail.push(z);
        for _ in 0..(k - 1) {
            inst.apply(&f.name, tail.clone());
        }
    }
    Ok(inst)
}

/// B = |A||A|^T with B(i,j) = Σ_k |A(i,k)|·|A(j,k)|; requires pure entries.
pub fn gadget_b(a: &GadgetMatrix) -> Result<GadgetMatrix, ReductionError> {
    let dim = a.dim();
    let order = a.entries[0][0].order();
    let mut abs = vec![vec![CycloValue::zero(order); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let v = &a.entries[i][j];
            let pure = v.to_pure().ok_or_else(|| {
                ReductionError::Unsupported(format!(
                    "matrix entry {v} at ({i},{j}) has no pure form; |A| is not field-valued"
                ))
            })?;
            abs[i][j] = CycloValue::from_rational(pure.magnitude, order);
        }
    }
    let mut entries = vec![vec![CycloValue::zero(order); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = CycloValue::zero(order);
            for k in 0..dim {
                acc = acc.add(&abs[i][k].mul(&abs[j][k]));
            }
            entries[i][j] = acc;
        }
    }
    Ok(GadgetMatrix {
        labels: a.labels.clone(),
        entries,
    })
}

/// The entrywise-magnitude matrix |A|; requires pure entries.
pub fn abs_matrix(a: &GadgetMatrix) -> Result<GadgetMatrix, ReductionError> {
    let dim = a.dim();
    let order = a.entries[0][0].order();
    let mut entries = vec![vec![CycloValue::zero(order); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let pure = a.entries[i][j].to_pure().ok_or_else(|| {
                ReductionError::Unsupported(format!(
                    "matrix entry at ({i},{j}) has no pure form"
                ))
            })?;
            entries[i][j] = CycloValue::from_rational(pure.magnitude, order);
        }
    }
    Ok(GadgetMatrix {
        labels: a.labels.clone(),
        entries,
    })
}

/// The vertex-and-edge bipartite double cover: Z_B(G) = Z_{|A|}(transform(G)).
pub fn gadget_b_transform(g: &Graph) -> Graph {
    assert!(!g.directed);
    let mut out = Graph::new(true, g.vertices + g.edges.len());
    for (e_idx, &(u, v)) in g.edges.iter().enumerate() {
        let x_e = g.vertices + e_idx;
        out.add_edge(u, x_e);
        out.add_edge(v, x_e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hadamard_function, hadamard_instance};

    fn b() -> Budget {
        Budget::default()
    }

    fn int(v: i64, order: u32) -> CycloValue {
        CycloValue::from_int(v, order)
    }

    #[test]
    fn candidate_sets() {
        let image = vec![int(1, 1), int(2, 1)];
        let set = candidate_value_set(&image, 2, b()).unwrap();
        let expect: BTreeSet<CycloValue> = [int(1, 1), int(2, 1), int(4, 1)].into_iter().collect();
        assert_eq!(set, expect);
        let z = CycloValue::root_of_unity(4, 1);
        let set = candidate_value_set(&[z.clone()], 3, b()).unwrap();
        assert_eq!(set, [z.pow(3)].into_iter().collect());
        let ones = candidate_value_set(&[int(1, 1)], 5, b()).unwrap();
        assert_eq!(ones.len(), 1);
    }

    #[test]
    fn vandermonde_unary_example() {
        // F(0) = 1, F(1) = 2, one constraint: N_1 = N_2 = 1.
        let mut inst = Instance::new(DomainSpec::new(2), 1, 1);
        let mut f = TableFunction::new("f", 1, 2, 1);
        f.set(vec![0], int(1, 1));
        f.set(vec![1], int(2, 1));
        inst.add_function(f);
        inst.apply("f", vec![0]);
        let mut oracle = |i: &Instance| i.brute_force_z(b());
        let hist = count_via_vandermonde(&inst, &mut oracle, b()).unwrap();
        assert_eq!(hist.get(&int(1, 1)), Some(&1));
        assert_eq!(hist.get(&int(2, 1)), Some(&1));
        assert_eq!(hist.len(), 2);
    }

    #[test]
    fn vandermonde_matches_histogram() {
        let inst = hadamard_instance();
        let mut oracle = |i: &Instance| i.brute_force_z(b());
        let hist = count_via_vandermonde(&inst, &mut oracle, b()).unwrap();
        assert_eq!(hist, inst.value_histogram(b()).unwrap());
        // Zero-valued functions get their count from the complement.
        let inst = crate::model::xor3_instance();
        let hist = count_via_vandermonde(&inst, &mut oracle, b()).unwrap();
        assert_eq!(hist.get(&CycloValue::zero(1)), Some(&4));
        assert_eq!(hist, inst.value_histogram(b()).unwrap());
    }

    #[test]
    fn order_examples() {
        let mut f = TableFunction::new("f", 1, 2, 4);
        f.set(vec![0], int(1, 4));
        f.set(vec![1], CycloValue::root_of_unity(4, 1));
        assert_eq!(order_of(&f).unwrap(), 4);
        let mut g = TableFunction::new("g", 1, 2, 4);
        g.set(vec![0], CycloValue::from_rational(Rational::new(3.into(), 2.into()), 4));
        g.set(vec![1], int(7, 4));
        assert_eq!(order_of(&g).unwrap(), 1);
        let mut h = TableFunction::new("h", 1, 1, 2);
        h.set(vec![0], int(-2, 2));
        assert_eq!(order_of(&h).unwrap(), 2);
    }

    #[test]
    fn purify_examples() {
        let z = CycloValue::root_of_unity(4, 1);
        // {2ζ} keeps its prime: 2 maps to 2.
        let mut f = TableFunction::new("f", 1, 1, 4);
        f.set(vec![0], z.scale(&Rational::from(BigInt::from(2))));
        let out = purify(std::slice::from_ref(&f)).unwrap();
        assert_eq!(out[0].value(&[0]), z.scale(&Rational::from(BigInt::from(2))));
        // {3ζ}: the sole generator 3 maps to the first prime 2.
        let mut f = TableFunction::new("f", 1, 1, 4);
        f.set(vec![0], z.scale(&Rational::from(BigInt::from(3))));
        let out = purify(std::slice::from_ref(&f)).unwrap();
        assert_eq!(out[0].value(&[0]), z.scale(&Rational::from(BigInt::from(2))));
        // {6, ζ}: generators (2,3) map to (2,3); units untouched.
        let mut f = TableFunction::new("f", 1, 2, 4);
        f.set(vec![0], int(6, 4));
        f.set(vec![1], z.clone());
        let out = purify(std::slice::from_ref(&f)).unwrap();
        assert_eq!(out[0].value(&[0]), int(6, 4));
        assert_eq!(out[0].value(&[1]), z);
        // Non-pure input is refused.
        let mut f = TableFunction::new("f", 1, 1, 4);
        f.set(vec![0], CycloValue::one(4).add(&z));
        assert!(purify(std::slice::from_ref(&f)).is_err());
    }

    #[test]
    fn gadget_a_r_worked_example() {
        // F with rows (1,1) and (1,ζ): A_1 = [[2, 1−ζ],[1+ζ, 2]].
        let z = CycloValue::root_of_unity(4, 1);
        let mut f = TableFunction::new("f", 2, 2, 4);
        f.set(vec![0, 0], int(1, 4));
        f.set(vec![0, 1], int(1, 4));
        f.set(vec![1, 0], int(1, 4));
        f.set(vec![1, 1], z.clone());
        let a = gadget_a_r(&f, 1).unwrap();
        assert_eq!(a.entries[0][0], int(2, 4));
        assert_eq!(a.entries[0][1], CycloValue::one(4).sub(&z));
        assert_eq!(a.entries[1][0], CycloValue::one(4).add(&z));
        assert_eq!(a.entries[1][1], int(2, 4));
        // |A_1| fails block-rank-1: all entries positive, rows independent.
        assert!(matches!(
            matrix_classification(&a),
            Classification::NotBlockRank1 { .. }
        ));

        // Hadamard: A_1 = 2I, which is block-rank-1 (disjoint supports).
        let h = hadamard_function(2);
        let a = gadget_a_r(&h, 1).unwrap();
        assert_eq!(a.entries[0][0], int(2, 2));
        assert_eq!(a.entries[0][1], int(0, 2));
        assert_eq!(a.entries[1][1], int(2, 2));
        assert!(matches!(
            matrix_classification(&a),
            Classification::BlockOrthogonal
        ));
    }

    #[test]
    fn gadget_a_r_realization_identity() {
        let h = hadamard_function(2);
        let a = gadget_a_r(&h, 1).unwrap();
        let mut g = Graph::new(true, 2);
        g.add_edge(0, 1);
        let za = eval_graph_hom(&a, &g, b()).unwrap();
        let inst = realize_a_r(&h, 1, &g).unwrap();
        assert_eq!(za, inst.brute_force_z(b()).unwrap());
    }

    #[test]
    fn gadget_type_partition_worked_example() {
        // Rows: F(0,0,*) = (1,1), F(1,1,*) = (1,1), F(0,1,*) = (1,−1),
        // F(1,0,*) = (0,0); ℓ = 1, K = 2.
        let mut f = TableFunction::new("f", 3, 2, 2);
        f.set(vec![0, 0, 0], int(1, 2));
        f.set(vec![0, 0, 1], int(1, 2));
        f.set(vec![1, 1, 0], int(1, 2));
        f.set(vec![1, 1, 1], int(1, 2));
        f.set(vec![0, 1, 0], int(1, 2));
        f.set(vec![0, 1, 1], int(-1, 2));
        let a = gadget_a_typepartition(&f, 1).unwrap();
        assert_eq!(a.entries[0][0], int(8, 2));
        assert_eq!(a.entries[1][1], int(4, 2));
        assert_eq!(a.entries[0][1], int(4, 2));
        assert_eq!(a.entries[1][0], int(4, 2));
        // 8·4 > 4·4: the non-block-rank-1 certificate.
        assert!(matches!(
            matrix_classification(&a),
            Classification::NotBlockRank1 { .. }
        ));
    }

    #[test]
    fn gadget_type_partition_realization_identity() {
        let mut f = TableFunction::new("f", 3, 2, 2);
        f.set(vec![0, 0, 0], int(1, 2));
        f.set(vec![0, 0, 1], int(1, 2));
        f.set(vec![1, 1, 0], int(1, 2));
        f.set(vec![1, 1, 1], int(1, 2));
        f.set(vec![0, 1, 0], int(1, 2));
        f.set(vec![0, 1, 1], int(-1, 2));
        let a = gadget_a_typepartition(&f, 1).unwrap();
        // Triangle graph.
        let mut g = Graph::new(false, 3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        let za = eval_graph_hom(&a, &g, b()).unwrap();
        let inst = realize_a_typepartition(&f, 1, &g).unwrap();
        assert_eq!(za, inst.brute_force_z(b()).unwrap());
    }

    #[test]
    fn gadget_h_examples() {
        let h = hadamard_function(2);
        let hh = gadget_h(&h).unwrap();
        // Boolean(H) = equality = Ω for the Hadamard function.
        assert_eq!(hh.support(), vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(hh.value(&[0, 0]), int(2, 2));
        // Realization: one H-application equals its K-tuple rewrite.
        let mut direct = Instance::new(DomainSpec::new(2), 2, 2);
        direct.add_function(hh);
        direct.apply("H_h", vec![0, 1]);
        let realized = realize_h(&h, &[(vec![0], vec![1])], 2).unwrap();
        assert_eq!(
            direct.brute_force_z(b()).unwrap(),
            realized.brute_force_z(b()).unwrap()
        );
        // All rows dependent: support is the full square.
        let mut f = TableFunction::new("c", 2, 2, 1);
        for key in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            f.set(key.to_vec(), int(1, 1));
        }
        let hh = gadget_h(&f).unwrap();
        assert_eq!(hh.support().len(), 4);
    }

    #[test]
    fn gadget_b_example() {
        // A = [[1,1],[1,2]] → B = [[2,3],[3,5]], not block-rank-1.
        let a = GadgetMatrix {
            labels: vec![vec![0], vec![1]],
            entries: vec![
                vec![int(1, 1), int(1, 1)],
                vec![int(1, 1), int(2, 1)],
            ],
        };
        let bm = gadget_b(&a).unwrap();
        assert_eq!(bm.entries[0][0], int(2, 1));
        assert_eq!(bm.entries[0][1], int(3, 1));
        assert_eq!(bm.entries[1][1], int(5, 1));
        assert!(matches!(
            matrix_classification(&bm),
            Classification::NotBlockRank1 { .. }
        ));
        // Z_B(G) = Z_{|A|}(G') on the triangle.
        let mut g = Graph::new(false, 3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        let zb = eval_graph_hom(&bm, &g, b()).unwrap();
        let gp = gadget_b_transform(&g);
        let za = eval_graph_hom(&abs_matrix(&a).unwrap(), &gp, b()).unwrap();
        assert_eq!(zb, za);
    }

    #[test]
    fn graph_eval_all_ones() {
        let ones = GadgetMatrix {
            labels: vec![vec![0], vec![1]],
            entries: vec![
                vec![int(1, 1), int(1, 1)],
                vec![int(1, 1), int(1, 1)],
            ],
        };
        let mut g = Graph::new(false, 3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        assert_eq!(eval_graph_hom(&ones, &g, b()).unwrap(), int(8, 1));
    }

    #[test]
    fn graph_parse() {
        let g = parse_graph("# triangle\ngraph undirected 3\nedge 0 1\nedge 1 2\nedge 0 2\n").unwrap();
        assert_eq!(g.vertices, 3);
        assert_eq!(g.edges.len(), 3);
        assert!(parse_graph("graph undirected 2\nedge 0 5\n").is_err());
        assert!(parse_graph("edge 0 1\n").is_err());
    }
}
