//! The weighted #CSP instance model: constraint libraries, applied tuples,
//! and brute-force oracles for the product function, its partition function,
//! marginals, and value histograms.
//!
//! Domain elements and variable indices are 0-based. Tables are sparse with
//! absent entries meaning 0. Every brute-force operation is guarded by an
//! enumeration budget.

use crate::cyclo::CycloValue;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Cap on elementary enumeration steps for brute-force operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_steps: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps: DEFAULT_BUDGET,
        }
    }
}

impl Budget {
    pub fn new(max_steps: u64) -> Budget {
        Budget { max_steps }
    }

    pub fn check(&self, needed: u64) -> Result<(), ModelError> {
        if needed > self.max_steps {
            Err(ModelError::BudgetExceeded {
                needed,
                budget: self.max_steps,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("enumeration budget exceeded: needed {needed} steps, budget {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        msg: msg.into(),
    }
}

/// The domain {0, …, d−1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainSpec {
    pub d: usize,
}

impl DomainSpec {
    pub fn new(d: usize) -> DomainSpec {
        assert!(d >= 1, "domain must be nonempty");
        DomainSpec { d }
    }

    pub fn elements(&self) -> impl Iterator<Item = u8> {
        (0..self.d as u8).collect::<Vec<_>>().into_iter()
    }
}

/// Iterates over D^n in lexicographic order.
pub struct Assignments {
    d: usize,
    next: Option<Vec<u8>>,
}

impl Assignments {
    pub fn new(d: usize, n: usize) -> Assignments {
        Assignments {
            d,
            next: Some(vec![0; n]),
        }
    }
}

impl Iterator for Assignments {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                self.next = None;
                break;
            }
            i -= 1;
            if (succ[i] as usize) + 1 < self.d {
                succ[i] += 1;
                for v in succ[i + 1..].iter_mut() {
                    *v = 0;
                }
                self.next = Some(succ);
                break;
            }
        }
        Some(cur)
    }
}

pub fn count_assignments(d: usize, n: usize) -> u64 {
    (d as u64).checked_pow(n as u32).unwrap_or(u64::MAX)
}

/// A named table function D^r → Q(ζ_N); entries absent from the map are 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableFunction {
    pub name: String,
    pub arity: usize,
    pub root_order: u32,
    pub d: usize,
    table: BTreeMap<Vec<u8>, CycloValue>,
}

impl TableFunction {
    pub fn new(name: impl Into<String>, arity: usize, d: usize, root_order: u32) -> TableFunction {
        assert!(arity >= 1);
        TableFunction {
            name: name.into(),
            arity,
            root_order,
            d,
            table: BTreeMap::new(),
        }
    }

    /// Stores an entry; zero values are dropped to keep the table sparse.
    pub fn set(&mut self, key: Vec<u8>, value: CycloValue) {
        assert_eq!(key.len(), self.arity, "table key arity mismatch");
        assert!(key.iter().all(|&a| (a as usize) < self.d));
        if value.is_zero() {
            self.table.remove(&key);
        } else {
            self.table.insert(key, value);
        }
    }

    pub fn value(&self, key: &[u8]) -> CycloValue {
        debug_assert_eq!(key.len(), self.arity);
        self.table
            .get(key)
            .cloned()
            .unwrap_or_else(|| CycloValue::zero(self.root_order))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u8>, &CycloValue)> {
        self.table.iter()
    }

    /// The nonzero values appearing in the table, deduplicated.
    pub fn image_nonzero(&self) -> Vec<CycloValue> {
        let mut seen = std::collections::BTreeSet::new();
        self.table.values().for_each(|v| {
            seen.insert(v.clone());
        });
        seen.into_iter().collect()
    }

    /// The support relation Boolean(F) as an explicit tuple list.
    pub fn support(&self) -> Vec<Vec<u8>> {
        self.table.keys().cloned().collect()
    }

    /// |F|: each value replaced by its pure-form magnitude. Errors when some
    /// value is not a magnitude times a root of unity.
    pub fn abs_table(&self) -> Result<TableFunction, ModelError> {
        let mut out = TableFunction::new(
            format!("|{}|", self.name),
            self.arity,
            self.d,
            self.root_order,
        );
        for (k, v) in &self.table {
            let pure = v.to_pure().ok_or_else(|| {
                ModelError::Unsupported(format!(
                    "value {v} of {} at {:?} has no pure form (irrational magnitude)",
                    self.name, k
                ))
            })?;
            out.set(
                k.clone(),
                CycloValue::from_rational(pure.magnitude, self.root_order),
            );
        }
        Ok(out)
    }
}

/// A #CSP instance: a variable count, a library of table functions, and a
/// multiset of applied constraints.
#[derive(Debug, Clone)]
pub struct Instance {
    pub domain: DomainSpec,
    pub root_order: u32,
    pub n: usize,
    pub library: BTreeMap<String, TableFunction>,
    pub constraints: Vec<(String, Vec<usize>)>,
}

impl Instance {
    pub fn new(domain: DomainSpec, root_order: u32, n: usize) -> Instance {
        Instance {
            domain,
            root_order,
            n,
            library: BTreeMap::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_function(&mut self, f: TableFunction) {
        assert_eq!(f.d, self.domain.d);
        assert_eq!(f.root_order, self.root_order);
        self.library.insert(f.name.clone(), f);
    }

    pub fn apply(&mut self, name: &str, vars: Vec<usize>) {
        let f = self
            .library
            .get(name)
            .unwrap_or_else(|| panic!("unknown function {name}"));
        assert_eq!(f.arity, vars.len(), "constraint arity mismatch");
        assert!(vars.iter().all(|&i| i < self.n), "variable out of range");
        self.constraints.push((name.to_string(), vars));
    }

    /// F_I(x): the product of all applied function values at x.
    pub fn eval(&self, x: &[u8]) -> CycloValue {
        debug_assert_eq!(x.len(), self.n);
        let mut acc = CycloValue::one(self.root_order);
        let mut key = Vec::new();
        for (name, vars) in &self.constraints {
            let f = &self.library[name];
            key.clear();
            key.extend(vars.iter().map(|&i| x[i]));
            let v = f.value(&key);
            if v.is_zero() {
                return CycloValue::zero(self.root_order);
            }
            acc = acc.mul(&v);
        }
        acc
    }

    /// Z(F_I) = Σ_x F_I(x) by full enumeration.
    pub fn brute_force_z(&self, budget: Budget) -> Result<CycloValue, ModelError> {
        budget.check(count_assignments(self.domain.d, self.n))?;
        let mut acc = CycloValue::zero(self.root_order);
        for x in Assignments::new(self.domain.d, self.n) {
            acc = acc.add(&self.eval(&x));
        }
        Ok(acc)
    }

    /// The marginal F^{[t]}(x) = Σ over the last n−t variables.
    pub fn marginal(&self, t: usize, prefix: &[u8], budget: Budget) -> Result<CycloValue, ModelError> {
        assert!(t >= 1 && t <= self.n);
        assert_eq!(prefix.len(), t);
        budget.check(count_assignments(self.domain.d, self.n - t))?;
        let mut acc = CycloValue::zero(self.root_order);
        let mut full = prefix.to_vec();
        full.resize(self.n, 0);
        for suffix in Assignments::new(self.domain.d, self.n - t) {
            full[t..].copy_from_slice(&suffix);
            acc = acc.add(&self.eval(&full));
        }
        Ok(acc)
    }

    /// The row F^{[t]}(x, ∗): a d-dimensional vector indexed by the t-th
    /// coordinate, for x ∈ D^{t−1}.
    pub fn marginal_row(
        &self,
        t: usize,
        prefix: &[u8],
        budget: Budget,
    ) -> Result<Vec<CycloValue>, ModelError> {
        assert!(t >= 1 && t <= self.n);
        assert_eq!(prefix.len(), t - 1);
        let mut row = Vec::with_capacity(self.domain.d);
        let mut key = prefix.to_vec();
        key.push(0);
        for a in 0..self.domain.d as u8 {
            *key.last_mut().unwrap() = a;
            row.push(self.marginal(t, &key, budget)?);
        }
        Ok(row)
    }

    /// Counts assignments per value of F_I over all of D^n.
    pub fn value_histogram(&self, budget: Budget) -> Result<BTreeMap<CycloValue, u64>, ModelError> {
        budget.check(count_assignments(self.domain.d, self.n))?;
        let mut hist = BTreeMap::new();
        for x in Assignments::new(self.domain.d, self.n) {
            *hist.entry(self.eval(&x)).or_insert(0) += 1;
        }
        Ok(hist)
    }

    /// The instance with every constraint repeated ℓ times, so that the
    /// defined function is the ℓ-th power pointwise.
    pub fn power(&self, ell: usize) -> Instance {
        assert!(ell >= 1);
        let mut out = self.clone();
        out.constraints = Vec::with_capacity(self.constraints.len() * ell);
        for c in &self.constraints {
            for _ in 0..ell {
                out.constraints.push(c.clone());
            }
        }
        out
    }

    /// Boolean(F_I): the support of the product function, enumerated.
    pub fn support(&self, budget: Budget) -> Result<Vec<Vec<u8>>, ModelError> {
        budget.check(count_assignments(self.domain.d, self.n))?;
        let mut out = Vec::new();
        for x in Assignments::new(self.domain.d, self.n) {
            if !self.eval(&x).is_zero() {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Nonzero values occurring in the tables of applied functions.
    pub fn applied_image_nonzero(&self) -> Vec<CycloValue> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, _) in &self.constraints {
            for v in self.library[name].image_nonzero() {
                seen.insert(v);
            }
        }
        seen.into_iter().collect()
    }
}

impl fmt::Display for Instance {
    /// Serializes back to the instance file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cspw 1")?;
        writeln!(f, "domain {}", self.domain.d)?;
        writeln!(f, "root {}", self.root_order)?;
        for func in self.library.values() {
            writeln!(f, "fn {} {}", func.name, func.arity)?;
            for (k, v) in func.entries() {
                let key: Vec<String> = k.iter().map(|a| a.to_string()).collect();
                writeln!(f, "{} := {}", key.join(" "), v)?;
            }
            writeln!(f, "end")?;
        }
        writeln!(f, "vars {}", self.n)?;
        for (name, vars) in &self.constraints {
            let idx: Vec<String> = vars.iter().map(|i| i.to_string()).collect();
            writeln!(f, "apply {} {}", name, idx.join(" "))?;
        }
        Ok(())
    }
}

/// Parses the line-oriented instance format. `#` starts a comment; parsing
/// is strict and unknown directives are errors.
pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    enum State {
        Header,
        Domain,
        Root,
        Body,
        InFn(TableFunction),
        Applies,
    }
    let mut state = State::Header;
    let mut domain = 0usize;
    let mut root = 0u32;
    let mut instance: Option<Instance> = None;
    let mut pending_fns: Vec<TableFunction> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match &mut state {
            State::Header => {
                if tokens != ["cspw", "1"] {
                    return Err(parse_err(line_no, "expected header \"cspw 1\""));
                }
                state = State::Domain;
            }
            State::Domain => {
                if tokens.len() != 2 || tokens[0] != "domain" {
                    return Err(parse_err(line_no, "expected \"domain <d>\""));
                }
                domain = tokens[1]
                    .parse()
                    .map_err(|_| parse_err(line_no, "malformed domain size"))?;
                if domain == 0 {
                    return Err(parse_err(line_no, "domain size must be at least 1"));
                }
                state = State::Root;
            }
            State::Root => {
                if tokens.len() != 2 || tokens[0] != "root" {
                    return Err(parse_err(line_no, "expected \"root <N>\""));
                }
                root = tokens[1]
                    .parse()
                    .map_err(|_| parse_err(line_no, "malformed root order"))?;
                if root == 0 {
                    return Err(parse_err(line_no, "root order must be at least 1"));
                }
                state = State::Body;
            }
            State::Body => match tokens[0] {
                "fn" => {
                    if tokens.len() != 3 {
                        return Err(parse_err(line_no, "expected \"fn <name> <arity>\""));
                    }
                    let arity: usize = tokens[2]
                        .parse()
                        .map_err(|_| parse_err(line_no, "malformed arity"))?;
                    if arity == 0 {
                        return Err(parse_err(line_no, "arity must be at least 1"));
                    }
                    if pending_fns.iter().any(|f| f.name == tokens[1]) {
                        return Err(parse_err(
                            line_no,
                            format!("duplicate function name {}", tokens[1]),
                        ));
                    }
                    state = State::InFn(TableFunction::new(tokens[1], arity, domain, root));
                }
                "vars" => {
                    if tokens.len() != 2 {
                        return Err(parse_err(line_no, "expected \"vars <n>\""));
                    }
                    let n: usize = tokens[1]
                        .parse()
                        .map_err(|_| parse_err(line_no, "malformed variable count"))?;
                    let mut inst = Instance::new(DomainSpec::new(domain), root, n);
                    for f in pending_fns.drain(..) {
                        inst.add_function(f);
                    }
                    instance = Some(inst);
                    state = State::Applies;
                }
                other => {
                    return Err(parse_err(line_no, format!("unknown directive \"{other}\"")));
                }
            },
            State::InFn(func) => {
                if tokens == ["end"] {
                    let done = std::mem::replace(
                        func,
                        TableFunction::new("", 1, domain, root),
                    );
                    pending_fns.push(done);
                    state = State::Body;
                    continue;
                }
                let (lhs, rhs) = line
                    .split_once(":=")
                    .ok_or_else(|| parse_err(line_no, "expected \"<args> := <value>\" or \"end\""))?;
                let args: Result<Vec<u8>, _> =
                    lhs.split_whitespace().map(|t| t.parse::<u8>()).collect();
                let args = args.map_err(|_| parse_err(line_no, "malformed table key"))?;
                if args.len() != func.arity {
                    return Err(parse_err(
                        line_no,
                        format!(
                            "key has {} entries but {} is {}-ary",
                            args.len(),
                            func.name,
                            func.arity
                        ),
                    ));
                }
                if let Some(&bad) = args.iter().find(|&&a| a as usize >= domain) {
                    return Err(parse_err(
                        line_no,
                        format!("domain element {bad} out of range (d = {domain})"),
                    ));
                }
                if !func.value(&args).is_zero() {
                    return Err(parse_err(line_no, "duplicate table entry"));
                }
                let value = CycloValue::parse(rhs.trim(), root)
                    .map_err(|e| parse_err(line_no, e.to_string()))?;
                func.set(args, value);
            }
            State::Applies => {
                if tokens[0] != "apply" || tokens.len() < 2 {
                    return Err(parse_err(line_no, "expected \"apply <name> <vars…>\""));
                }
                let inst = instance.as_mut().unwrap();
                let name = tokens[1];
                let f = inst
                    .library
                    .get(name)
                    .ok_or_else(|| parse_err(line_no, format!("unknown function \"{name}\"")))?;
                let vars: Result<Vec<usize>, _> =
                    tokens[2..].iter().map(|t| t.parse::<usize>()).collect();
                let vars = vars.map_err(|_| parse_err(line_no, "malformed variable index"))?;
                if vars.len() != f.arity {
                    return Err(parse_err(
                        line_no,
                        format!("{} is {}-ary but {} indices given", name, f.arity, vars.len()),
                    ));
                }
                if let Some(&bad) = vars.iter().find(|&&i| i >= inst.n) {
                    return Err(parse_err(
                        line_no,
                        format!("variable {bad} out of range (vars = {})", inst.n),
                    ));
                }
                inst.constraints.push((name.to_string(), vars));
            }
        }
    }
    match state {
        State::Applies => Ok(instance.unwrap()),
        State::InFn(_) => Err(parse_err(
            text.lines().count(),
            "unterminated fn block (missing \"end\")",
        )),
        _ => Err(parse_err(text.lines().count(), "incomplete instance file")),
    }
}

/// The ±1 Hadamard-type binary function (−1)^{xy}, the canonical example.
pub fn hadamard_function(root_order: u32) -> TableFunction {
    assert!(root_order % 2 == 0 || root_order == 2);
    let mut f = TableFunction::new("h", 2, 2, root_order);
    let one = CycloValue::one(root_order);
    let minus = CycloValue::from_int(-1, root_order);
    f.set(vec![0, 0], one.clone());
    f.set(vec![0, 1], one.clone());
    f.set(vec![1, 0], one);
    f.set(vec![1, 1], minus);
    f
}

/// Single-constraint Hadamard instance on two variables.
pub fn hadamard_instance() -> Instance {
    let mut inst = Instance::new(DomainSpec::new(2), 2, 2);
    inst.add_function(hadamard_function(2));
    inst.apply("h", vec![0, 1]);
    inst
}

/// The 0/1 relation {x ⊕ y ⊕ z = 0} as a single-constraint instance.
pub fn xor3_instance() -> Instance {
    let mut inst = Instance::new(DomainSpec::new(2), 1, 3);
    let mut f = TableFunction::new("xor", 3, 2, 1);
    for x in Assignments::new(2, 3) {
        if x[0] ^ x[1] ^ x[2] == 0 {
            f.set(x, CycloValue::one(1));
        }
    }
    inst.add_function(f);
    inst.apply("xor", vec![0, 1, 2]);
    inst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b() -> Budget {
        Budget::default()
    }

    #[test]
    fn eval_hadamard() {
        let inst = hadamard_instance();
        assert_eq!(inst.eval(&[1, 1]), CycloValue::from_int(-1, 2));
        let twice = inst.power(2);
        assert_eq!(twice.eval(&[1, 1]), CycloValue::one(2));
        assert_eq!(twice.constraints.len(), 2);
    }

    #[test]
    fn eval_zero_entry() {
        let inst = xor3_instance();
        assert_eq!(inst.eval(&[1, 0, 0]), CycloValue::zero(1));
    }

    #[test]
    fn brute_force_values() {
        assert_eq!(
            hadamard_instance().brute_force_z(b()).unwrap(),
            CycloValue::from_int(2, 2)
        );
        assert_eq!(
            xor3_instance().brute_force_z(b()).unwrap(),
            CycloValue::from_int(4, 1)
        );
        let empty = Instance::new(DomainSpec::new(2), 1, 2);
        assert_eq!(empty.brute_force_z(b()).unwrap(), CycloValue::from_int(4, 1));
    }

    #[test]
    fn marginals() {
        let inst = hadamard_instance();
        assert_eq!(
            inst.marginal(1, &[0], b()).unwrap(),
            CycloValue::from_int(2, 2)
        );
        assert_eq!(inst.marginal(1, &[1], b()).unwrap(), CycloValue::zero(2));
        assert_eq!(inst.marginal(2, &[1, 1], b()).unwrap(), inst.eval(&[1, 1]));
        let row = inst.marginal_row(2, &[1], b()).unwrap();
        assert_eq!(row, vec![CycloValue::one(2), CycloValue::from_int(-1, 2)]);
    }

    #[test]
    fn histogram() {
        let hist = hadamard_instance().value_histogram(b()).unwrap();
        assert_eq!(hist.get(&CycloValue::one(2)), Some(&3));
        assert_eq!(hist.get(&CycloValue::from_int(-1, 2)), Some(&1));
        assert_eq!(hist.values().sum::<u64>(), 4);
    }

    #[test]
    fn power_identity() {
        let inst = xor3_instance();
        let p2 = inst.power(2);
        for x in Assignments::new(2, 3) {
            assert_eq!(p2.eval(&x), inst.eval(&x).mul(&inst.eval(&x)));
        }
        let p1 = inst.power(1);
        assert_eq!(p1.constraints, inst.constraints);
        // Hadamard squared is the constant-1 function
        assert_eq!(
            hadamard_instance().power(2).brute_force_z(b()).unwrap(),
            CycloValue::from_int(4, 2)
        );
    }

    #[test]
    fn abs_table_cases() {
        let f = hadamard_function(2);
        let a = f.abs_table().unwrap();
        for (_, v) in a.entries() {
            assert_eq!(*v, CycloValue::one(2));
        }
        let mut g = TableFunction::new("g", 1, 2, 4);
        g.set(vec![0], CycloValue::root_of_unity(4, 3).scale(&crate::cyclo::Rational::from(num::BigInt::from(2))));
        assert_eq!(
            g.abs_table().unwrap().value(&[0]),
            CycloValue::from_int(2, 4)
        );
        let mut h = TableFunction::new("h2", 1, 2, 4);
        h.set(
            vec![0],
            CycloValue::one(4).add(&CycloValue::root_of_unity(4, 1)),
        );
        assert!(matches!(h.abs_table(), Err(ModelError::Unsupported(_))));
    }

    #[test]
    fn budget_guard() {
        let inst = Instance::new(DomainSpec::new(3), 1, 20);
        let tiny = Budget::new(100);
        assert!(matches!(
            inst.brute_force_z(tiny),
            Err(ModelError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn parse_roundtrip() {
        let text = "\
# a Hadamard instance
cspw 1
domain 2
root 2
fn h 2
0 0 := 1
0 1 := 1
1 0 := 1
1 1 := -1
end
vars 2
apply h 0 1
";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.n, 2);
        assert_eq!(inst.constraints.len(), 1);
        assert_eq!(
            inst.brute_force_z(b()).unwrap(),
            CycloValue::from_int(2, 2)
        );
        let reprinted = inst.to_string();
        let again = parse_instance(&reprinted).unwrap();
        assert_eq!(again.brute_force_z(b()).unwrap(), CycloValue::from_int(2, 2));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad_index = "cspw 1\ndomain 2\nroot 2\nfn f 1\n0 := 1\nend\nvars 3\napply f 5\n";
        match parse_instance(bad_index) {
            Err(ModelError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("expected parse error, got {other:?}"),
        }
        let unknown = "cspw 1\ndomain 2\nroot 2\nfrobnicate 3\n";
        assert!(matches!(
            parse_instance(unknown),
            Err(ModelError::Parse { line: 4, .. })
        ));
    }
}
