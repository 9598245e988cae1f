//! Exact scalars and dense linear algebra.
//!
//! Three coefficient fields share one [`Field`] interface: the rationals,
//! the cyclotomic fields `Q(ζ_l)` and the prime fields `F_p`. Matrices and
//! subspaces are generic over the field, so the same elimination code
//! decides rank conditions over `Q(ζ_l)` and counts jets over `F_p`.

use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A field given by a context value plus an element type.
pub trait Field: Clone + Send + Sync {
    type Elem: Clone + PartialEq + Eq + Hash + fmt::Debug + Send + Sync;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn from_i64(&self, v: i64) -> Self::Elem;

    fn div(&self, a: &Self::Elem, b: &Self::Elem) -> Option<Self::Elem> {
        self.inv(b).map(|bi| self.mul(a, &bi))
    }
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// The field `Q`, elements are reduced `BigRational`s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Rationals;

impl Field for Rationals {
    type Elem = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn inv(&self, a: &BigRational) -> Option<BigRational> {
        if a.is_zero() {
            None
        } else {
            Some(a.recip())
        }
    }
    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }
    fn from_i64(&self, v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }
}

/// The prime field `F_p` for a prime `p < 2^31`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(p: u64) -> Option<Self> {
        if is_prime(p) && p < (1 << 31) {
            Some(PrimeField { p })
        } else {
            None
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        let mut b = base % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * b % self.p;
            }
            b = b * b % self.p;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative order of a non-zero element.
    pub fn order_of(&self, a: u64) -> Option<u64> {
        let a = a % self.p;
        if a == 0 {
            return None;
        }
        let mut x = a;
        let mut k = 1;
        while x != 1 {
            x = x * a % self.p;
            k += 1;
        }
        Some(k)
    }

    /// The smallest element of exact multiplicative order `l`, if `l | p - 1`.
    pub fn primitive_root_of_unity(&self, l: u64) -> Option<u64> {
        if l == 0 || (self.p - 1) % l != 0 {
            return None;
        }
        (1..self.p).find(|&a| self.order_of(a) == Some(l))
    }
}

impl Field for PrimeField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.p
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.p
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        (a + self.p - b % self.p) % self.p
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a * b % self.p
    }
    fn neg(&self, a: &u64) -> u64 {
        (self.p - a % self.p) % self.p
    }
    fn inv(&self, a: &u64) -> Option<u64> {
        if a % self.p == 0 {
            None
        } else {
            Some(self.pow(*a, self.p - 2))
        }
    }
    fn is_zero(&self, a: &u64) -> bool {
        a % self.p == 0
    }
    fn from_i64(&self, v: i64) -> u64 {
        v.rem_euclid(self.p as i64) as u64
    }
}

// ---------------------------------------------------------------------------
// Rational polynomials (coefficient vectors, lowest degree first)

type Poly = Vec<BigRational>;

fn poly_trim(p: &mut Poly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_sub(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![BigRational::zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] -= c;
    }
    poly_trim(&mut out);
    out
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    poly_trim(&mut out);
    out
}

/// Quotient and remainder of `a` by non-zero `b`.
fn poly_divmod(a: &Poly, b: &Poly) -> (Poly, Poly) {
    let mut r = a.clone();
    poly_trim(&mut r);
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    while r.len() >= b.len() {
        let k = r.len() - 1 - db;
        let c = &r[r.len() - 1] / &lead;
        for (i, bc) in b.iter().enumerate() {
            r[k + i] -= &c * bc;
        }
        q[k] = c;
        poly_trim(&mut r);
    }
    poly_trim(&mut q);
    (q, r)
}

/// Integer coefficients of the `l`-th cyclotomic polynomial, lowest first.
pub fn cyclotomic_polynomial(l: usize) -> Vec<BigInt> {
    assert!(l >= 1, "conductor must be positive");
    // x^l - 1 divided by Φ_d for every proper divisor d of l.
    let mut num: Poly = vec![BigRational::zero(); l + 1];
    num[0] = -BigRational::one();
    num[l] = BigRational::one();
    for d in 1..l {
        if l % d == 0 {
            let phi_d: Poly = cyclotomic_polynomial(d)
                .into_iter()
                .map(BigRational::from_integer)
                .collect();
            num = poly_divmod(&num, &phi_d).0;
        }
    }
    num.into_iter().map(|c| c.to_integer()).collect()
}

pub fn euler_phi(l: usize) -> usize {
    (1..=l).filter(|k| k.gcd(&l) == 1).count()
}

/// An element of `Q(ζ_l)`, stored as a residue modulo `Φ_l`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CyclotomicNumber {
    pub conductor: usize,
    pub coeffs: Vec<BigRational>,
}

/// The field `Q(ζ_l)` with `ζ_l` a root of `Φ_l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclotomicField {
    l: usize,
    phi: Poly,
}

impl CyclotomicField {
    pub fn new(l: usize) -> Self {
        let phi = cyclotomic_polynomial(l)
            .into_iter()
            .map(BigRational::from_integer)
            .collect();
        CyclotomicField { l, phi }
    }

    pub fn conductor(&self) -> usize {
        self.l
    }

    pub fn degree(&self) -> usize {
        self.phi.len() - 1
    }

    fn reduce(&self, p: &Poly) -> CyclotomicNumber {
        let (_, mut r) = poly_divmod(p, &self.phi);
        r.resize(self.degree(), BigRational::zero());
        CyclotomicNumber {
            conductor: self.l,
            coeffs: r,
        }
    }

    pub fn from_rational(&self, q: BigRational) -> CyclotomicNumber {
        self.reduce(&vec![q])
    }

    /// `ζ_l^j` for any integer `j` (negative exponents allowed).
    pub fn zeta_pow(&self, j: i64) -> CyclotomicNumber {
        let e = j.rem_euclid(self.l as i64) as usize;
        let mut p = vec![BigRational::zero(); e + 1];
        p[e] = BigRational::one();
        self.reduce(&p)
    }

    /// Evaluate an integer polynomial at the given element.
    pub fn eval_int_poly(&self, coeffs: &[BigInt], x: &CyclotomicNumber) -> CyclotomicNumber {
        let mut acc = self.zero();
        for c in coeffs.iter().rev() {
            acc = self.mul(&acc, x);
            acc = self.add(&acc, &self.from_rational(BigRational::from_integer(c.clone())));
        }
        acc
    }
}

impl Field for CyclotomicField {
    type Elem = CyclotomicNumber;

    fn zero(&self) -> CyclotomicNumber {
        CyclotomicNumber {
            conductor: self.l,
            coeffs: vec![BigRational::zero(); self.degree()],
        }
    }
    fn one(&self) -> CyclotomicNumber {
        self.from_rational(BigRational::one())
    }
    fn add(&self, a: &CyclotomicNumber, b: &CyclotomicNumber) -> CyclotomicNumber {
        CyclotomicNumber {
            conductor: self.l,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
        }
    }
    fn sub(&self, a: &CyclotomicNumber, b: &CyclotomicNumber) -> CyclotomicNumber {
        CyclotomicNumber {
            conductor: self.l,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
        }
    }
    fn mul(&self, a: &CyclotomicNumber, b: &CyclotomicNumber) -> CyclotomicNumber {
        if self.is_zero(a) || self.is_zero(b) {
            return self.zero();
        }
        let mut pa = a.coeffs.clone();
        let mut pb = b.coeffs.clone();
        poly_trim(&mut pa);
        poly_trim(&mut pb);
        self.reduce(&poly_mul(&pa, &pb))
    }
    fn neg(&self, a: &CyclotomicNumber) -> CyclotomicNumber {
        CyclotomicNumber {
            conductor: self.l,
            coeffs: a.coeffs.iter().map(|x| -x).collect(),
        }
    }
    fn inv(&self, a: &CyclotomicNumber) -> Option<CyclotomicNumber> {
        if self.is_zero(a) {
            return None;
        }
        // Extended Euclid: find s with s·a ≡ g (mod Φ), g a non-zero constant.
        let mut r0 = self.phi.clone();
        let mut r1 = a.coeffs.clone();
        poly_trim(&mut r1);
        let mut s0: Poly = Vec::new();
        let mut s1: Poly = vec![BigRational::one()];
        while r1.len() > 1 {
            let (q, r) = poly_divmod(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
        }
        // r1 is a non-zero constant because Φ_l is irreducible.
        let c = r1[0].clone();
        let s: Poly = s1.iter().map(|x| x / &c).collect();
        Some(self.reduce(&s))
    }
    fn is_zero(&self, a: &CyclotomicNumber) -> bool {
        a.coeffs.iter().all(|c| c.is_zero())
    }
    fn from_i64(&self, v: i64) -> CyclotomicNumber {
        self.from_rational(BigRational::from_integer(BigInt::from(v)))
    }
}

// ---------------------------------------------------------------------------
// Matrices and subspaces

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Matrix<E> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<E>,
}

impl<E: Clone> Matrix<E> {
    pub fn from_rows(cols: usize, rows: Vec<Vec<E>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            data.extend(r);
        }
        Matrix {
            rows: n,
            cols,
            data,
        }
    }

    pub fn filled(rows: usize, cols: usize, v: E) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &E {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: E) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<E>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Stack `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }
}

impl<E: Clone> Matrix<E> {
    pub fn identity<F: Field<Elem = E>>(f: &F, n: usize) -> Self {
        let mut m = Matrix::filled(n, n, f.zero());
        for i in 0..n {
            m.set(i, i, f.one());
        }
        m
    }

    pub fn from_i64<F: Field<Elem = E>>(f: &F, rows: &[Vec<i64>], cols: usize) -> Self {
        Matrix::from_rows(
            cols,
            rows.iter()
                .map(|r| r.iter().map(|&v| f.from_i64(v)).collect())
                .collect(),
        )
    }
}

pub fn mat_mul<F: Field>(f: &F, a: &Matrix<F::Elem>, b: &Matrix<F::Elem>) -> Matrix<F::Elem> {
    assert_eq!(a.cols, b.rows);
    let mut out = Matrix::filled(a.rows, b.cols, f.zero());
    for i in 0..a.rows {
        for k in 0..a.cols {
            let x = a.get(i, k);
            if f.is_zero(x) {
                continue;
            }
            for j in 0..b.cols {
                let v = f.add(out.get(i, j), &f.mul(x, b.get(k, j)));
                out.set(i, j, v);
            }
        }
    }
    out
}

pub fn mat_vec<F: Field>(f: &F, a: &Matrix<F::Elem>, v: &[F::Elem]) -> Vec<F::Elem> {
    assert_eq!(a.cols, v.len());
    (0..a.rows)
        .map(|i| dot(f, a.row(i), v))
        .collect()
}

pub fn dot<F: Field>(f: &F, a: &[F::Elem], b: &[F::Elem]) -> F::Elem {
    let mut acc = f.zero();
    for (x, y) in a.iter().zip(b) {
        if !f.is_zero(x) && !f.is_zero(y) {
            acc = f.add(&acc, &f.mul(x, y));
        }
    }
    acc
}

/// Reduced row echelon form with first-non-zero pivoting.
/// Returns the reduced matrix (zero rows removed) and the pivot columns.
pub fn rref<F: Field>(f: &F, m: &Matrix<F::Elem>) -> (Matrix<F::Elem>, Vec<usize>) {
    let mut rows = m.row_vecs();
    let cols = m.cols;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !f.is_zero(&rows[i][c])) else {
            continue;
        };
        rows.swap(r, p);
        let inv = f.inv(&rows[r][c]).expect("pivot is non-zero");
        for x in rows[r].iter_mut() {
            *x = f.mul(x, &inv);
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || f.is_zero(&row[c]) {
                continue;
            }
            let factor = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !f.is_zero(y) {
                    *x = f.sub(x, &f.mul(&factor, y));
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    (Matrix::from_rows(cols, rows), pivots)
}

pub fn rank<F: Field>(f: &F, m: &Matrix<F::Elem>) -> usize {
    rref(f, m).1.len()
}

/// A linear subspace of `K^ambient`, held as the unique reduced echelon
/// basis. Equal subspaces have equal representations.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Subspace<E> {
    pub ambient: usize,
    pub basis: Matrix<E>,
}

impl<E: Clone> Subspace<E> {
    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn vectors(&self) -> Vec<Vec<E>> {
        self.basis.row_vecs()
    }
}

impl<E: Clone + PartialEq> Subspace<E> {
    pub fn zero<F: Field<Elem = E>>(_f: &F, ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Matrix {
                rows: 0,
                cols: ambient,
                data: Vec::new(),
            },
        }
    }

    pub fn full<F: Field<Elem = E>>(f: &F, ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: Matrix::identity(f, ambient),
        }
    }

    pub fn span<F: Field<Elem = E>>(f: &F, ambient: usize, vectors: &[Vec<E>]) -> Self {
        if vectors.is_empty() {
            return Self::zero(f, ambient);
        }
        let m = Matrix::from_rows(ambient, vectors.to_vec());
        Subspace {
            ambient,
            basis: rref(f, &m).0,
        }
    }

    pub fn contains<F: Field<Elem = E>>(&self, f: &F, v: &[E]) -> bool {
        let mut rows = self.vectors();
        rows.push(v.to_vec());
        rank(f, &Matrix::from_rows(self.ambient, rows)) == self.dim()
    }

    /// Vectors annihilated by every basis vector under the standard pairing.
    pub fn annihilator<F: Field<Elem = E>>(&self, f: &F) -> Self {
        kernel(f, &self.basis)
    }

    pub fn intersect<F: Field<Elem = E>>(&self, f: &F, other: &Self) -> Self {
        let a = self.annihilator(f).basis;
        let b = other.annihilator(f).basis;
        kernel(f, &a.vstack(&b))
    }
}

/// Basis of the null space `{v : M v = 0}`.
pub fn kernel<F: Field>(f: &F, m: &Matrix<F::Elem>) -> Subspace<F::Elem> {
    let n = m.cols;
    if m.rows == 0 {
        return Subspace::full(f, n);
    }
    let (r, pivots) = rref(f, m);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut vecs = Vec::with_capacity(free.len());
    for &fc in &free {
        let mut v = vec![f.zero(); n];
        v[fc] = f.one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = f.neg(r.get(i, fc));
        }
        vecs.push(v);
    }
    Subspace::span(f, n, &vecs)
}

/// One solution of `M x = b`, if any.
pub fn solve<F: Field>(f: &F, m: &Matrix<F::Elem>, b: &[F::Elem]) -> Option<Vec<F::Elem>> {
    assert_eq!(m.rows, b.len());
    let aug_rows: Vec<Vec<F::Elem>> = (0..m.rows)
        .map(|i| {
            let mut r = m.row(i).to_vec();
            r.push(b[i].clone());
            r
        })
        .collect();
    let aug = Matrix::from_rows(m.cols + 1, aug_rows);
    let (r, pivots) = rref(f, &aug);
    if pivots.last() == Some(&m.cols) {
        return None;
    }
    let mut x = vec![f.zero(); m.cols];
    for (i, &pc) in pivots.iter().enumerate() {
        x[pc] = r.get(i, m.cols).clone();
    }
    Some(x)
}

/// `kernel(M − λI)` for a square matrix.
pub fn eigenspace<F: Field>(f: &F, m: &Matrix<F::Elem>, lambda: &F::Elem) -> Subspace<F::Elem> {
    assert_eq!(m.rows, m.cols, "eigenspace needs a square matrix");
    let mut shifted = m.clone();
    for i in 0..m.rows {
        let v = f.sub(m.get(i, i), lambda);
        shifted.set(i, i, v);
    }
    kernel(f, &shifted)
}

/// True iff the covector `alpha` is zero on every basis vector of `v`.
pub fn functional_vanishes_on<F: Field>(f: &F, alpha: &[F::Elem], v: &Subspace<F::Elem>) -> bool {
    assert_eq!(alpha.len(), v.ambient);
    (0..v.dim()).all(|i| f.is_zero(&dot(f, alpha, v.basis.row(i))))
}

/// Formats a rational as `a` or `a/b`.
pub fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `a` or `a/b` into a reduced rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (s.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if d.is_zero() {
        return None;
    }
    let q = BigRational::new(n, d);
    debug_assert!(q.denom().is_positive());
    Some(q)
}

/// Serde adapter writing a rational as the string `a` or `a/b`.
pub mod serde_rational {
    use super::{fmt_rational, parse_rational};
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| D::Error::custom(format!("bad rational {s:?}")))
    }
}

/// Serde adapter for a list of rationals written as strings.
pub mod serde_rational_vec {
    use super::{fmt_rational, parse_rational};
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).ok_or_else(|| D::Error::custom(format!("bad rational {s:?}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        rat(n, 1)
    }

    #[test]
    fn kernel_of_identity_and_zero() {
        let f = Rationals;
        let id = Matrix::<BigRational>::identity(&f, 2);
        assert_eq!(kernel(&f, &id).dim(), 0);
        let z = Matrix::filled(2, 2, q(0));
        assert_eq!(kernel(&f, &z).dim(), 2);
    }

    #[test]
    fn kernel_of_rank_one() {
        let f = Rationals;
        let m = Matrix::from_i64(&f, &[vec![1, 1], vec![2, 2]], 2);
        let k = kernel(&f, &m);
        assert_eq!(k.dim(), 1);
        assert!(k.contains(&f, &[q(1), q(-1)]));
        assert_eq!(k.dim() + rank(&f, &m), 2);
    }

    #[test]
    fn cyclotomic_polynomials_small() {
        let ints = |v: &[i64]| v.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>();
        assert_eq!(cyclotomic_polynomial(1), ints(&[-1, 1]));
        assert_eq!(cyclotomic_polynomial(2), ints(&[1, 1]));
        assert_eq!(cyclotomic_polynomial(3), ints(&[1, 1, 1]));
        assert_eq!(cyclotomic_polynomial(4), ints(&[1, 0, 1]));
        assert_eq!(cyclotomic_polynomial(6), ints(&[1, -1, 1]));
        assert_eq!(cyclotomic_polynomial(12), ints(&[1, 0, -1, 0, 1]));
    }

    #[test]
    fn zeta_is_primitive_root_up_to_30() {
        for l in 1..=30 {
            let k = CyclotomicField::new(l);
            assert_eq!(k.degree(), euler_phi(l));
            let z = k.zeta_pow(1);
            let phi = cyclotomic_polynomial(l);
            assert!(k.is_zero(&k.eval_int_poly(&phi, &z)), "Φ_{l}(ζ) != 0");
            let mut p = k.one();
            for j in 1..=l {
                p = k.mul(&p, &z);
                assert_eq!(k.is_zero(&k.sub(&p, &k.one())), j == l, "l={l} j={j}");
            }
        }
    }

    #[test]
    fn cyclotomic_inverse() {
        let k = CyclotomicField::new(5);
        let a = k.add(&k.zeta_pow(1), &k.from_i64(3));
        let ai = k.inv(&a).unwrap();
        assert_eq!(k.mul(&a, &ai), k.one());
    }

    #[test]
    fn eigenspaces_a1_reflection() {
        // w = s acts as -1 on the one-dimensional t of A1.
        let k = CyclotomicField::new(2);
        let m = Matrix::from_i64(&k, &[vec![-1]], 1);
        assert_eq!(eigenspace(&k, &m, &k.from_i64(-1)).dim(), 1);
        assert_eq!(eigenspace(&k, &m, &k.one()).dim(), 0);
    }

    #[test]
    fn eigenspace_a2_rotation() {
        // Coxeter element s1 s2 of A2 in simple-coroot coordinates.
        let k = CyclotomicField::new(3);
        let s1 = Matrix::from_i64(&k, &[vec![-1, 1], vec![0, 1]], 2);
        let s2 = Matrix::from_i64(&k, &[vec![1, 0], vec![1, -1]], 2);
        let c = mat_mul(&k, &s1, &s2);
        let v = eigenspace(&k, &c, &k.zeta_pow(-1));
        assert_eq!(v.dim(), 1);
        // The roots of A2 as functionals in these coordinates.
        for alpha in [[2, -1], [-1, 2], [1, 1]] {
            let a: Vec<_> = alpha.iter().map(|&x| k.from_i64(x)).collect();
            assert!(!functional_vanishes_on(&k, &a, &v));
        }
    }

    #[test]
    fn functional_on_zero_space() {
        let f = Rationals;
        let z = Subspace::zero(&f, 3);
        assert!(functional_vanishes_on(&f, &[q(1), q(2), q(3)], &z));
    }

    #[test]
    fn functional_on_a1_t() {
        // t = {(x,-x)}, α = x1 - x2 gives 2x.
        let f = Rationals;
        let t = Subspace::span(&f, 2, &[vec![q(1), q(-1)]]);
        assert!(!functional_vanishes_on(&f, &[q(1), q(-1)], &t));
    }

    #[test]
    fn echelon_form_is_canonical() {
        let f = Rationals;
        let a = Subspace::span(&f, 3, &[vec![q(1), q(1), q(0)], vec![q(0), q(1), q(1)]]);
        let b = Subspace::span(&f, 3, &[vec![q(1), q(2), q(1)], vec![q(1), q(0), q(-1)]]);
        assert_eq!(a, b);
    }

    #[test]
    fn intersection_dims() {
        let f = Rationals;
        let a = Subspace::span(&f, 3, &[vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)]]);
        let b = Subspace::span(&f, 3, &[vec![q(0), q(1), q(0)], vec![q(0), q(0), q(1)]]);
        let c = a.intersect(&f, &b);
        assert_eq!(c, Subspace::span(&f, 3, &[vec![q(0), q(1), q(0)]]));
    }

    #[test]
    fn solve_consistent_and_not() {
        let f = Rationals;
        let m = Matrix::from_i64(&f, &[vec![1, 2], vec![2, 4]], 2);
        let x = solve(&f, &m, &[q(3), q(6)]).unwrap();
        assert_eq!(mat_vec(&f, &m, &x), vec![q(3), q(6)]);
        assert!(solve(&f, &m, &[q(3), q(7)]).is_none());
    }

    #[test]
    fn prime_field_roots_of_unity() {
        let f = PrimeField::new(13).unwrap();
        let z = f.primitive_root_of_unity(4).unwrap();
        assert_eq!(f.pow(z, 4), 1);
        assert_ne!(f.pow(z, 2), 1);
        assert!(f.primitive_root_of_unity(5).is_none());
        assert!(PrimeField::new(12).is_none());
    }

    #[test]
    fn rational_parse_round_trip() {
        for s in ["0", "3/2", "-7/4", "5"] {
            assert_eq!(fmt_rational(&parse_rational(s).unwrap()), s);
        }
        assert_eq!(fmt_rational(&parse_rational("6/4").unwrap()), "3/2");
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("x").is_none());
    }
}
