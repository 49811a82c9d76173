//! Exact arithmetic in the cyclotomic field Q(ζ_N).
//!
//! Values are stored as canonical coefficient vectors over the power basis
//! ζ^0, …, ζ^{φ(N)−1} after reduction modulo the N-th cyclotomic polynomial.
//! Two values are equal exactly when their root orders match and their
//! coefficient vectors match entrywise. All operations are pure; values are
//! immutable and freely shareable between threads.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

/// Exact rational scalar: reduced fraction with positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CycloError {
    #[error("division by zero in Q(ζ_{0})")]
    ZeroInverse(u32),
    #[error("value syntax error: {0}")]
    Syntax(String),
}

/// Euler totient of `n`.
pub fn euler_phi(n: u32) -> usize {
    let mut result = n;
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result as usize
}

fn big(i: i64) -> BigInt {
    BigInt::from(i)
}

/// Integer polynomial division `num / den` for monic `den`; requires the
/// division to be exact, which holds for products of cyclotomic polynomials.
fn poly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let dn = den.len() - 1;
    let mut rem: Vec<BigInt> = num.to_vec();
    let mut quot = vec![BigInt::zero(); rem.len().saturating_sub(dn)];
    while rem.len() > dn {
        let lead = rem.last().unwrap().clone();
        let shift = rem.len() - 1 - dn;
        if !lead.is_zero() {
            for (i, c) in den.iter().enumerate() {
                let idx = shift + i;
                let sub = &lead * c;
                rem[idx] -= sub;
            }
            quot[shift] = lead;
        }
        debug_assert!(rem.last().unwrap().is_zero());
        rem.pop();
    }
    debug_assert!(rem.iter().all(|c| c.is_zero()));
    quot
}

/// The N-th cyclotomic polynomial Φ_N as integer coefficients, index = power.
/// Computed as (x^N − 1) / ∏_{d | N, d < N} Φ_d and cached per order.
pub fn cyclotomic_poly(n: u32) -> Vec<BigInt> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Vec<BigInt>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&n) {
        return p.clone();
    }
    let poly = if n == 1 {
        vec![big(-1), big(1)]
    } else {
        // x^n - 1
        let mut num = vec![BigInt::zero(); n as usize + 1];
        num[0] = big(-1);
        num[n as usize] = big(1);
        let mut acc = num;
        for d in 1..n {
            if n % d == 0 {
                let phi_d = cyclotomic_poly(d);
                acc = poly_div_exact(&acc, &phi_d);
            }
        }
        acc
    };
    cache.lock().unwrap().insert(n, poly.clone());
    poly
}

/// An element of Q(ζ_N), canonical over the power basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycloValue {
    order: u32,
    coeffs: Vec<Rational>,
}

impl CycloValue {
    /// Reduces a raw coefficient vector over powers ζ^0..ζ^m to the canonical
    /// representative modulo Φ_N. Idempotent on canonical input.
    pub fn canonicalize(raw: &[Rational], order: u32) -> CycloValue {
        assert!(order >= 1, "root order must be positive");
        let phi = euler_phi(order);
        // Fold exponents modulo N first (ζ^N = 1), then reduce mod Φ_N.
        let mut folded = vec![Rational::zero(); order as usize];
        for (e, c) in raw.iter().enumerate() {
            if !c.is_zero() {
                folded[e % order as usize] += c;
            }
        }
        let modulus = cyclotomic_poly(order);
        let deg = modulus.len() - 1;
        debug_assert_eq!(deg, phi);
        // Long division by the monic modulus, keeping only the remainder.
        let mut rem = folded;
        while rem.len() > deg {
            let lead = rem.pop().unwrap();
            if !lead.is_zero() {
                let shift = rem.len() - deg;
                for (i, m) in modulus.iter().take(deg).enumerate() {
                    let delta = &lead * Rational::from(m.clone());
                    rem[shift + i] -= delta;
                }
            }
        }
        rem.resize(phi, Rational::zero());
        CycloValue { order, coeffs: rem }
    }

    pub fn zero(order: u32) -> CycloValue {
        CycloValue {
            order,
            coeffs: vec![Rational::zero(); euler_phi(order)],
        }
    }

    pub fn one(order: u32) -> CycloValue {
        CycloValue::from_rational(Rational::one(), order)
    }

    pub fn from_rational(q: Rational, order: u32) -> CycloValue {
        let mut coeffs = vec![Rational::zero(); euler_phi(order)];
        coeffs[0] = q;
        CycloValue { order, coeffs }
    }

    pub fn from_int(i: i64, order: u32) -> CycloValue {
        CycloValue::from_rational(Rational::from(big(i)), order)
    }

    /// ζ_N^k.
    pub fn root_of_unity(order: u32, k: u32) -> CycloValue {
        let e = (k % order) as usize;
        let mut raw = vec![Rational::zero(); e + 1];
        raw[e] = Rational::one();
        CycloValue::canonicalize(&raw, order)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Some(q) when the value lies in the rational subfield.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    /// Re-expresses the value in Q(ζ_M); requires order | M.
    pub fn promote(&self, target: u32) -> CycloValue {
        assert!(
            target % self.order == 0,
            "no embedding of Q(ζ_{}) into Q(ζ_{})",
            self.order,
            target
        );
        if target == self.order {
            return self.clone();
        }
        let step = (target / self.order) as usize;
        let mut raw = vec![Rational::zero(); (self.coeffs.len() - 1) * step + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            raw[i * step] = c.clone();
        }
        CycloValue::canonicalize(&raw, target)
    }

    fn promoted_pair(&self, other: &CycloValue) -> (CycloValue, CycloValue) {
        if self.order == other.order {
            (self.clone(), other.clone())
        } else {
            let l = num::integer::lcm(self.order, other.order);
            (self.promote(l), other.promote(l))
        }
    }

    pub fn add(&self, other: &CycloValue) -> CycloValue {
        let (a, b) = self.promoted_pair(other);
        let coeffs = a
            .coeffs
            .iter()
            .zip(b.coeffs.iter())
            .map(|(x, y)| x + y)
            .collect();
        CycloValue {
            order: a.order,
            coeffs,
        }
    }

    pub fn sub(&self, other: &CycloValue) -> CycloValue {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> CycloValue {
        CycloValue {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn mul(&self, other: &CycloValue) -> CycloValue {
        let (a, b) = self.promoted_pair(other);
        let mut raw = vec![Rational::zero(); 2 * a.coeffs.len()];
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if !y.is_zero() {
                    raw[i + j] += x * y;
                }
            }
        }
        CycloValue::canonicalize(&raw, a.order)
    }

    pub fn scale(&self, q: &Rational) -> CycloValue {
        CycloValue {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    pub fn pow(&self, mut e: u64) -> CycloValue {
        let mut base = self.clone();
        let mut acc = CycloValue::one(self.order);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Complex conjugate: ζ ↦ ζ^{N−1}. An involutive field automorphism.
    pub fn conj(&self) -> CycloValue {
        let n = self.order as usize;
        let mut raw = vec![Rational::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                raw[(n - i) % n] += c;
            }
        }
        CycloValue::canonicalize(&raw, self.order)
    }

    /// Multiplicative inverse, solved exactly as a linear system over the
    /// power basis. Errors on zero.
    pub fn inv(&self) -> Result<CycloValue, CycloError> {
        if self.is_zero() {
            return Err(CycloError::ZeroInverse(self.order));
        }
        if let Some(q) = self.as_rational() {
            return Ok(CycloValue::from_rational(q.recip(), self.order));
        }
        let phi = self.coeffs.len();
        // Column j of the matrix is the canonical form of self * ζ^j.
        let mut mat = vec![vec![Rational::zero(); phi]; phi];
        for j in 0..phi {
            let mut raw = vec![Rational::zero(); phi + j];
            for (i, c) in self.coeffs.iter().enumerate() {
                raw[i + j] = c.clone();
            }
            let col = CycloValue::canonicalize(&raw, self.order);
            for (r, row) in mat.iter_mut().enumerate() {
                row[j] = col.coeffs[r].clone();
            }
        }
        let mut rhs = vec![Rational::zero(); phi];
        rhs[0] = Rational::one();
        let sol = solve_linear(&mut mat, &mut rhs)
            .expect("multiplication by a nonzero field element is invertible");
        let out = CycloValue {
            order: self.order,
            coeffs: sol,
        };
        debug_assert_eq!(out.mul(self), CycloValue::one(self.order));
        Ok(out)
    }

    /// a · conj(a): the squared magnitude, a self-conjugate field element.
    pub fn magnitude_sq(&self) -> CycloValue {
        self.mul(&self.conj())
    }

    /// Attempts to write the value as q · ζ_N^k with q a non-negative
    /// rational. The decomposition is unique when it exists.
    pub fn to_pure(&self) -> Option<PureForm> {
        if self.is_zero() {
            return Some(PureForm {
                magnitude: Rational::zero(),
                unit_exponent: 0,
            });
        }
        for k in 0..self.order {
            let unit_inv = CycloValue::root_of_unity(self.order, (self.order - k) % self.order);
            if let Some(q) = self.mul(&unit_inv).as_rational() {
                if q.is_positive() {
                    return Some(PureForm {
                        magnitude: q,
                        unit_exponent: k,
                    });
                }
            }
        }
        None
    }

    /// Parses the textual value syntax: a sum of terms `q` or `q*w^k`,
    /// with `q` an integer or `int/int` and `w` denoting ζ_N.
    pub fn parse(input: &str, order: u32) -> Result<CycloValue, CycloError> {
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(CycloError::Syntax("empty value expression".into()));
        }
        let mut raw = vec![Rational::zero(); order as usize];
        let mut rest = s.as_str();
        let mut first = true;
        while !rest.is_empty() {
            let sign = if let Some(r) = rest.strip_prefix('-') {
                rest = r;
                -1i64
            } else if let Some(r) = rest.strip_prefix('+') {
                if first {
                    return Err(CycloError::Syntax("leading '+' not allowed".into()));
                }
                rest = r;
                1
            } else if first {
                1
            } else {
                return Err(CycloError::Syntax(format!(
                    "expected '+' or '-' before \"{rest}\""
                )));
            };
            first = false;
            let end = rest
                .char_indices()
                .find(|&(_, c)| c == '+' || c == '-')
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            let term = &rest[..end];
            rest = &rest[end..];
            if term.is_empty() {
                return Err(CycloError::Syntax("empty term".into()));
            }
            let (coef, exp) = parse_term(term, order)?;
            raw[exp as usize % order as usize] += coef * Rational::from(big(sign));
        }
        Ok(CycloValue::canonicalize(&raw, order))
    }
}

fn parse_term(term: &str, order: u32) -> Result<(Rational, u32), CycloError> {
    let bad = |m: &str| CycloError::Syntax(format!("bad term \"{term}\": {m}"));
    let (coef_str, unit_str) = match term.split_once('*') {
        Some((c, u)) => (c, Some(u)),
        None if term.starts_with('w') => ("1", Some(term)),
        None => (term, None),
    };
    let coef = parse_rational(coef_str).ok_or_else(|| bad("malformed coefficient"))?;
    let exp = match unit_str {
        None => 0,
        Some("w") => 1,
        Some(u) => {
            let e = u
                .strip_prefix("w^")
                .ok_or_else(|| bad("expected w or w^k"))?;
            e.parse::<u32>().map_err(|_| bad("malformed exponent"))?
        }
    };
    Ok((coef, exp % order))
}

fn parse_rational(s: &str) -> Option<Rational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    if d.is_zero() || den.starts_with('-') || den.starts_with('+') {
        return None;
    }
    Some(Rational::new(n, d))
}

/// Gaussian elimination over the rationals; returns None for singular input.
fn solve_linear(mat: &mut [Vec<Rational>], rhs: &mut [Rational]) -> Option<Vec<Rational>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !mat[r][col].is_zero())?;
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        let p = mat[col][col].clone();
        for c in col..n {
            mat[col][c] = &mat[col][c] / &p;
        }
        rhs[col] = &rhs[col] / &p;
        for r in 0..n {
            if r != col && !mat[r][col].is_zero() {
                let f = mat[r][col].clone();
                for c in col..n {
                    let delta = &f * &mat[col][c];
                    mat[r][c] -= delta;
                }
                let delta = &f * &rhs[col];
                rhs[r] -= delta;
            }
        }
    }
    Some(rhs.to_vec())
}

/// Exact solve of a square system with CycloValue entries; returns None when
/// the matrix is singular.
pub fn solve_cyclo_system(
    mat: &[Vec<CycloValue>],
    rhs: &[CycloValue],
) -> Option<Vec<CycloValue>> {
    let n = rhs.len();
    let order = rhs
        .first()
        .map(|v| v.order())
        .or_else(|| mat.first().and_then(|r| r.first().map(|v| v.order())))?;
    let mut m: Vec<Vec<CycloValue>> = mat.to_vec();
    let mut b: Vec<CycloValue> = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        b.swap(col, pivot);
        let pinv = m[col][col].inv().ok()?;
        for c in col..n {
            m[col][c] = m[col][c].mul(&pinv);
        }
        b[col] = b[col].mul(&pinv);
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..n {
                    let delta = f.mul(&m[col][c]);
                    m[r][c] = m[r][c].sub(&delta);
                }
                let delta = f.mul(&b[col]);
                b[r] = b[r].sub(&delta);
            }
        }
    }
    let _ = order;
    Some(b)
}

/// A value of the shape magnitude · ζ_N^k with non-negative rational
/// magnitude; magnitude 0 forces exponent 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PureForm {
    pub magnitude: Rational,
    pub unit_exponent: u32,
}

impl PureForm {
    /// Multiplicative order of the unit part ζ_N^k.
    pub fn unit_order(&self, root_order: u32) -> u32 {
        if self.unit_exponent == 0 {
            1
        } else {
            root_order / num::integer::gcd(root_order, self.unit_exponent)
        }
    }

    pub fn to_value(&self, root_order: u32) -> CycloValue {
        CycloValue::root_of_unity(root_order, self.unit_exponent).scale(&self.magnitude)
    }
}

fn fmt_rational(q: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if q.denom().is_one() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for CycloValue {
    /// Canonical printing: terms sorted by ascending basis exponent.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            fmt_rational(&mag, f)?;
            match e {
                0 => {}
                1 => write!(f, "*w")?,
                _ => write!(f, "*w^{e}")?,
            }
        }
        Ok(())
    }
}

/// Sum of a sequence of values in a common field.
pub fn sum_values<'a, I: IntoIterator<Item = &'a CycloValue>>(order: u32, iter: I) -> CycloValue {
    let mut acc = CycloValue::zero(order);
    for v in iter {
        acc = acc.add(v);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(big(n), big(d))
    }

    #[test]
    fn cyclotomic_polys() {
        // Φ_4 = x^2 + 1, Φ_3 = x^2 + x + 1, Φ_12 = x^4 - x^2 + 1
        assert_eq!(cyclotomic_poly(4), vec![big(1), big(0), big(1)]);
        assert_eq!(cyclotomic_poly(3), vec![big(1), big(1), big(1)]);
        assert_eq!(
            cyclotomic_poly(12),
            vec![big(1), big(0), big(-1), big(0), big(1)]
        );
    }

    #[test]
    fn canonicalize_reduces_powers() {
        // N=4: ζ^2 = −1
        let v = CycloValue::root_of_unity(4, 2);
        assert_eq!(v, CycloValue::from_int(-1, 4));
        // N=3: ζ^2 = −1 − ζ
        let v = CycloValue::root_of_unity(3, 2);
        let raw = [q(-1, 1), q(-1, 1)];
        assert_eq!(v, CycloValue::canonicalize(&raw, 3));
        // N=1: rationals pass through
        let v = CycloValue::from_rational(q(7, 2), 1);
        assert_eq!(v.as_rational(), Some(q(7, 2)));
    }

    #[test]
    fn add_mul_examples() {
        let one_plus = CycloValue::one(4).add(&CycloValue::root_of_unity(4, 1));
        let one_minus = CycloValue::one(4).sub(&CycloValue::root_of_unity(4, 1));
        assert_eq!(one_plus.add(&one_minus), CycloValue::from_int(2, 4));
        assert_eq!(one_plus.mul(&one_minus), CycloValue::from_int(2, 4));
        let z = CycloValue::root_of_unity(4, 1);
        assert_eq!(z.mul(&z.pow(3)), CycloValue::one(4));
    }

    #[test]
    fn conj_examples() {
        let z = CycloValue::root_of_unity(4, 1);
        assert_eq!(z.conj(), z.neg());
        let r = CycloValue::from_rational(q(5, 3), 4);
        assert_eq!(r.conj(), r);
        let v = CycloValue::one(4).add(&z.scale(&q(2, 1)));
        assert_eq!(v.conj().conj(), v);
    }

    #[test]
    fn inv_examples() {
        // (1+ζ)^{-1} = (1−ζ)/2 in Q(i)
        let z = CycloValue::root_of_unity(4, 1);
        let a = CycloValue::one(4).add(&z);
        let expect = CycloValue::one(4).sub(&z).scale(&q(1, 2));
        assert_eq!(a.inv().unwrap(), expect);
        assert_eq!(
            CycloValue::from_int(2, 4).inv().unwrap(),
            CycloValue::from_rational(q(1, 2), 4)
        );
        assert_eq!(z.inv().unwrap(), z.pow(3));
        assert_eq!(
            CycloValue::zero(4).inv(),
            Err(CycloError::ZeroInverse(4))
        );
    }

    #[test]
    fn magnitude_sq_examples() {
        let z = CycloValue::root_of_unity(4, 1);
        let a = CycloValue::one(4).add(&z);
        assert_eq!(a.magnitude_sq(), CycloValue::from_int(2, 4));
        assert_eq!(
            z.scale(&q(3, 1)).magnitude_sq(),
            CycloValue::from_int(9, 4)
        );
        assert_eq!(CycloValue::zero(4).magnitude_sq(), CycloValue::zero(4));
    }

    #[test]
    fn pure_form_detection() {
        let z = CycloValue::root_of_unity(4, 1);
        let v = z.scale(&q(2, 1));
        let p = v.to_pure().unwrap();
        assert_eq!(p.magnitude, q(2, 1));
        assert_eq!(p.unit_exponent, 1);
        assert_eq!(p.unit_order(4), 4);
        // -2 at N=4 is 2·ζ^2
        let m = CycloValue::from_int(-2, 4).to_pure().unwrap();
        assert_eq!(m.magnitude, q(2, 1));
        assert_eq!(m.unit_exponent, 2);
        assert_eq!(m.unit_order(4), 2);
        // 1+ζ is not pure
        assert!(CycloValue::one(4).add(&z).to_pure().is_none());
        // zero forces exponent 0
        let zp = CycloValue::zero(4).to_pure().unwrap();
        assert_eq!(zp.unit_exponent, 0);
    }

    #[test]
    fn parse_and_print_roundtrip() {
        for s in ["0", "7/2", "-1", "1 + 1*w", "1 - 3*w^2", "-1/2 + 1*w^3", "2*w"] {
            let v = CycloValue::parse(s, 8).unwrap();
            let printed = v.to_string();
            let back = CycloValue::parse(&printed, 8).unwrap();
            assert_eq!(v, back, "roundtrip failed for {s}");
        }
        assert_eq!(
            CycloValue::parse("w^2", 4).unwrap(),
            CycloValue::from_int(-1, 4)
        );
        assert!(CycloValue::parse("10/", 4).is_err());
        assert!(CycloValue::parse("q", 4).is_err());
        assert!(CycloValue::parse("1++2", 4).is_err());
    }

    #[test]
    fn promotion_is_consistent() {
        let z3 = CycloValue::root_of_unity(3, 1);
        let v = z3.promote(12);
        assert_eq!(v, CycloValue::root_of_unity(12, 4));
        let a = CycloValue::from_int(2, 3);
        let b = CycloValue::from_int(3, 4);
        assert_eq!(a.mul(&b), CycloValue::from_int(6, 12));
    }
}
