//! Sparse multivariate polynomials, canonical monomial bases, and the Gram
//! basis matrices that translate SOS membership into linear trace constraints.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Coefficients below this magnitude are dropped on normalization so that
/// sparse term maps stay canonical for equality tests.
pub const COEFF_EPS: f64 = 1e-14;

/// Exponent vector of a monomial, ordered graded-lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    /// The zero multi-index (constant monomial) over `m` variables.
    pub fn zero(m: usize) -> Self {
        MultiIndex(vec![0; m])
    }

    /// The `i`-th unit multi-index over `m` variables.
    pub fn unit(m: usize, i: usize) -> Self {
        let mut e = vec![0; m];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise sum; panics on mismatched variable counts.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.0.len(), other.0.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Evaluates the monomial `v^alpha`.
    pub fn eval(&self, v: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(v)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Graded lex: lower total degree first; within a degree the monomial
        // with the larger leading exponent comes first, matching the
        // canonical basis (1, v1, ..., vm, v1^2, v1 v2, ...).
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "v{}", i + 1)?;
            } else {
                write!(f, "v{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Sparse multivariate polynomial with real coefficients.
///
/// Zero coefficients are never stored; the zero polynomial has an empty term
/// map and degree 0 by convention.
#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial {
    num_vars: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(num_vars: usize) -> Self {
        assert!(num_vars >= 1, "polynomial needs at least one variable");
        Polynomial {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(MultiIndex::zero(num_vars), c);
        p
    }

    /// The coordinate polynomial `v_i`.
    pub fn var(num_vars: usize, i: usize) -> Self {
        assert!(i < num_vars);
        let mut p = Self::zero(num_vars);
        p.add_term(MultiIndex::unit(num_vars, i), 1.0);
        p
    }

    pub fn from_terms(num_vars: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Self {
        let mut p = Self::zero(num_vars);
        for (alpha, c) in terms {
            p.add_term(alpha, c);
        }
        p
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max stored multi-index degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.degree()).max().unwrap_or(0)
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        assert_eq!(alpha.num_vars(), self.num_vars, "multi-index dimension mismatch");
        let entry = self.terms.entry(alpha.clone()).or_insert(0.0);
        *entry += c;
        if entry.abs() < COEFF_EPS {
            self.terms.remove(&alpha);
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        assert_eq!(
            v.len(),
            self.num_vars,
            "point dimension {} does not match polynomial in {} variables",
            v.len(),
            self.num_vars
        );
        self.terms.iter().map(|(a, c)| c * a.eval(v)).sum()
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::from_terms(self.num_vars, self.terms.iter().map(|(a, k)| (a.clone(), c * k)))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.num_vars, other.num_vars);
        let mut p = self.clone();
        for (a, c) in other.terms() {
            p.add_term(a.clone(), c);
        }
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.num_vars, other.num_vars);
        let mut p = Polynomial::zero(self.num_vars);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                p.add_term(a.add(b), ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, n: u32) -> Polynomial {
        let mut p = Polynomial::constant(self.num_vars, 1.0);
        for _ in 0..n {
            p = p.mul(self);
        }
        p
    }

    /// Exact partial derivative with respect to `v_i`.
    pub fn partial(&self, i: usize) -> Polynomial {
        assert!(i < self.num_vars);
        let mut p = Polynomial::zero(self.num_vars);
        for (alpha, c) in self.terms() {
            let e = alpha.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut exps = alpha.exponents().to_vec();
            exps[i] -= 1;
            p.add_term(MultiIndex::new(exps), c * e as f64);
        }
        p
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.num_vars).map(|i| self.partial(i)).collect()
    }

    /// Symmetric matrix of second partials, stored row-major.
    pub fn hessian(&self) -> Vec<Vec<Polynomial>> {
        let grad = self.gradient();
        (0..self.num_vars)
            .map(|i| (0..self.num_vars).map(|j| grad[i].partial(j)).collect())
            .collect()
    }

    /// Rewrites the polynomial over a larger variable set, with variable `i`
    /// of `self` mapped to variable `map[i]` of the target space.
    pub fn embed(&self, num_vars: usize, map: &[usize]) -> Polynomial {
        assert_eq!(map.len(), self.num_vars);
        let mut p = Polynomial::zero(num_vars);
        for (alpha, c) in self.terms() {
            let mut exps = vec![0u32; num_vars];
            for (i, &e) in alpha.exponents().iter().enumerate() {
                exps[map[i]] += e;
            }
            p.add_term(MultiIndex::new(exps), c);
        }
        p
    }

    /// Max absolute coefficient; 0 for the zero polynomial.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (a, c) in self.terms() {
            if first {
                write!(f, "{}", c)?;
                first = false;
            } else if c >= 0.0 {
                write!(f, " + {}", c)?;
            } else {
                write!(f, " - {}", -c)?;
            }
            if !a.is_zero() {
                write!(f, "*{}", a)?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    alpha: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialJson {
    m: usize,
    terms: Vec<TermJson>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolynomialJson {
            m: self.num_vars,
            terms: self
                .terms()
                .map(|(a, c)| TermJson {
                    alpha: a.exponents().to_vec(),
                    c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PolynomialJson::deserialize(d)?;
        if raw.m == 0 {
            return Err(serde::de::Error::custom("polynomial needs m >= 1"));
        }
        let mut p = Polynomial::zero(raw.m);
        for t in raw.terms {
            if t.alpha.len() != raw.m {
                return Err(serde::de::Error::custom("term exponent length != m"));
            }
            p.add_term(MultiIndex::new(t.alpha), t.c);
        }
        Ok(p)
    }
}

/// Number of monomials in `m` variables of degree at most `d`.
pub fn basis_size(m: usize, d: u32) -> usize {
    // binom(m + d, d)
    let mut n = 1usize;
    for i in 1..=m {
        n = n * (d as usize + i) / i;
    }
    n
}

/// Ordered list of all multi-indices of degree at most `half_degree`.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    num_vars: usize,
    half_degree: u32,
    entries: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(num_vars: usize, half_degree: u32) -> Self {
        assert!(num_vars >= 1);
        let mut entries: Vec<MultiIndex> = Vec::with_capacity(basis_size(num_vars, half_degree));
        let mut current = vec![0u32; num_vars];
        collect_indices(&mut current, 0, half_degree, &mut entries);
        entries.sort();
        debug_assert_eq!(entries.len(), basis_size(num_vars, half_degree));
        MonomialBasis {
            num_vars,
            half_degree,
            entries,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn half_degree(&self) -> u32 {
        self.half_degree
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MultiIndex] {
        &self.entries
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.entries.binary_search(alpha).ok()
    }

    /// Evaluates the basis vector y(v).
    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|a| a.eval(v)).collect()
    }
}

fn collect_indices(current: &mut Vec<u32>, pos: usize, budget: u32, out: &mut Vec<MultiIndex>) {
    if pos == current.len() {
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for e in 0..=budget {
        current[pos] = e;
        collect_indices(current, pos + 1, budget - e, out);
    }
    current[pos] = 0;
}

/// The matrices B_alpha with y(v) y(v)^T = sum_alpha B_alpha v^alpha.
///
/// Entry (i, j) of B_alpha is 1 exactly when the i-th and j-th basis
/// monomials multiply to v^alpha, so off-diagonal pairs contribute 2 to the
/// coefficient of v^alpha in y(v)^T Q y(v).
#[derive(Clone, Debug)]
pub struct GramBasis {
    basis: MonomialBasis,
    matrices: BTreeMap<MultiIndex, DMatrix<f64>>,
}

impl GramBasis {
    pub fn new(m: usize, d: u32) -> Result<Self, GramBasisError> {
        if !d.is_multiple_of(2) {
            return Err(GramBasisError::OddDegree(d));
        }
        let basis = MonomialBasis::new(m, d / 2);
        let s = basis.len();
        let mut matrices: BTreeMap<MultiIndex, DMatrix<f64>> = BTreeMap::new();
        for alpha in MonomialBasis::new(m, d).entries() {
            matrices.insert(alpha.clone(), DMatrix::zeros(s, s));
        }
        for i in 0..s {
            for j in 0..s {
                let alpha = basis.entries()[i].add(&basis.entries()[j]);
                matrices.get_mut(&alpha).expect("pair degree within d")[(i, j)] = 1.0;
            }
        }
        Ok(GramBasis { basis, matrices })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn matrix(&self, alpha: &MultiIndex) -> Option<&DMatrix<f64>> {
        self.matrices.get(alpha)
    }

    /// All multi-indices of degree at most d, in canonical order.
    pub fn indices(&self) -> impl Iterator<Item = &MultiIndex> {
        self.matrices.keys()
    }

    pub fn matrices(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<f64>)> {
        self.matrices.iter()
    }

    /// The polynomial represented by a Gram matrix Q, i.e. y(v)^T Q y(v).
    pub fn polynomial_of(&self, q: &DMatrix<f64>) -> Polynomial {
        let mut p = Polynomial::zero(self.basis.num_vars());
        for (alpha, b) in &self.matrices {
            let c = q.dot(b);
            p.add_term(alpha.clone(), c);
        }
        p
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GramBasisError {
    #[error("Gram basis requires an even degree, got {0}")]
    OddDegree(u32),
}
