//! Truncated jets of the twisted Cartan `t_w(O/ε^N O)` over prime fields,
//! the invariant map to the adjoint quotient for classical types, Jacobian
//! valuations, and the successive-approximation solver.
//!
//! Exponents are counted in units of `ε_E = ε^{1/l}`: a jet is a list of
//! coefficient vectors `u_j ∈ t(w, j)` for `0 ≤ j < N l`. Images in the
//! adjoint quotient only involve integral powers of `ε` and are re-indexed.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactfield::{is_prime, kernel, Field, Matrix, PrimeField};
use crate::rootsys::{IntMatrix, RootSystem, RootType};
use crate::strata::{level_chain, ValuationFunction};

/// A prime field together with a primitive `l`-th root of unity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetField {
    pub p: u64,
    pub l: u64,
    pub zeta: u64,
}

impl JetField {
    /// Requires `p` prime, `p ∤ |W|` and `l | p − 1`.
    pub fn new(p: u64, l: u64, weyl_order: u64) -> Result<Self> {
        if !is_prime(p) || p >= 1 << 31 {
            return Err(Error::FieldInvalid(format!("{p} is not a supported prime")));
        }
        if weyl_order % p == 0 {
            return Err(Error::FieldInvalid(format!("{p} divides |W| = {weyl_order}")));
        }
        let f = PrimeField::new(p).unwrap();
        let zeta = f
            .primitive_root_of_unity(l)
            .ok_or_else(|| Error::FieldInvalid(format!("F_{p} has no primitive {l}-th root of unity")))?;
        Ok(JetField { p, l, zeta })
    }

    /// Smallest admissible prime that also exceeds `|R|`, which guarantees
    /// that hyperplane complements have rational points.
    pub fn default_for(l: u64, weyl_order: u64, num_roots: usize) -> Self {
        let mut p = (num_roots as u64 + 1).max(3);
        loop {
            if let Ok(f) = JetField::new(p, l, weyl_order) {
                return f;
            }
            p += 1;
        }
    }

    pub fn prime_field(&self) -> PrimeField {
        PrimeField::new(self.p).unwrap()
    }

    pub fn exceeds_root_count(&self, num_roots: usize) -> bool {
        self.p > num_roots as u64
    }
}

/// A power series over `F_p` truncated at `ε_E^{len}`; `l = 1` for series in
/// integral powers of `ε`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncatedSeries {
    pub p: u64,
    pub l: u64,
    pub coeffs: Vec<u64>,
}

impl TruncatedSeries {
    pub fn zero(p: u64, l: u64, len: usize) -> Self {
        TruncatedSeries {
            p,
            l,
            coeffs: vec![0; len],
        }
    }

    /// Index of the first non-zero coefficient, `None` if zero at this
    /// truncation.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|&c| c != 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().min(other.coeffs.len());
        TruncatedSeries {
            p: self.p,
            l: self.l,
            coeffs: (0..len).map(|i| (self.coeffs[i] + other.coeffs[i]) % self.p).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let len = self.coeffs.len().min(other.coeffs.len());
        TruncatedSeries {
            p: self.p,
            l: self.l,
            coeffs: s_mul(self.p, &self.coeffs, &other.coeffs, len),
        }
    }
}

// ---------------------------------------------------------------------------
// Raw series helpers: coefficient vectors over F_p.

pub(crate) fn s_mul(p: u64, a: &[u64], b: &[u64], len: usize) -> Vec<u64> {
    let mut out = vec![0u64; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

fn s_add_assign(p: u64, a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x = (*x + y) % p;
    }
}

fn s_sub(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| (x + p - y) % p).collect()
}

fn s_scale(p: u64, c: u64, a: &[u64]) -> Vec<u64> {
    a.iter().map(|x| x * c % p).collect()
}

fn s_one(len: usize) -> Vec<u64> {
    let mut v = vec![0; len];
    if len > 0 {
        v[0] = 1;
    }
    v
}

fn s_val(a: &[u64]) -> Option<usize> {
    a.iter().position(|&c| c != 0)
}

fn s_resize(a: &[u64], len: usize) -> Vec<u64> {
    let mut v = a.to_vec();
    v.resize(len, 0);
    v
}

/// Inverse of a series with non-zero constant term.
fn s_inv_unit(p: u64, a: &[u64], len: usize) -> Vec<u64> {
    let f = PrimeField::new(p).unwrap();
    let a0 = f.inv(&a[0]).expect("unit series");
    let mut out = vec![0u64; len];
    for k in 0..len {
        let mut acc = if k == 0 { 1 } else { 0 };
        for i in 1..=k.min(a.len().saturating_sub(1)) {
            acc = (acc + p - a[i] * out[k - i] % p) % p;
        }
        out[k] = acc * a0 % p;
    }
    out
}

/// Elementary symmetric polynomials `e_0 … e_k` of the given series.
fn elementary(p: u64, vars: &[&[u64]], k: usize, len: usize) -> Vec<Vec<u64>> {
    let mut e = vec![vec![0u64; len]; k + 1];
    e[0] = s_one(len);
    for x in vars {
        for d in (1..=k).rev() {
            let t = s_mul(p, x, &e[d - 1], len);
            s_add_assign(p, &mut e[d], &t);
        }
    }
    e
}

type SeriesMatrix = Vec<Vec<Vec<u64>>>;

fn s_det(p: u64, m: &SeriesMatrix, len: usize) -> Vec<u64> {
    let n = m.len();
    if n == 0 {
        return s_one(len);
    }
    if n == 1 {
        return s_resize(&m[0][0], len);
    }
    let mut acc = vec![0u64; len];
    for c in 0..n {
        if s_val(&m[0][c]).is_none() {
            continue;
        }
        let minor: SeriesMatrix = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, s)| s.clone()).collect())
            .collect();
        let term = s_mul(p, &m[0][c], &s_det(p, &minor, len), len);
        if c % 2 == 0 {
            s_add_assign(p, &mut acc, &term);
        } else {
            acc = s_sub(p, &acc, &term);
        }
    }
    acc
}

/// `adj(M) · b`.
fn s_adj_apply(p: u64, m: &SeriesMatrix, b: &[Vec<u64>], len: usize) -> Vec<Vec<u64>> {
    let n = m.len();
    let mut out = vec![vec![0u64; len]; n];
    for i in 0..n {
        for j in 0..n {
            // adj[i][j] = (−1)^{i+j} det(M with row j and column i removed).
            let minor: SeriesMatrix = m
                .iter()
                .enumerate()
                .filter(|&(r, _)| r != j)
                .map(|(_, row)| row.iter().enumerate().filter(|&(c, _)| c != i).map(|(_, s)| s.clone()).collect())
                .collect();
            let cof = s_det(p, &minor, len);
            let term = s_mul(p, &cof, &b[j], len);
            if (i + j) % 2 == 0 {
                s_add_assign(p, &mut out[i], &term);
            } else {
                out[i] = s_sub(p, &out[i], &term);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Basic invariants

/// Basic invariants of a classical type, evaluated on ambient coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantMap {
    pub type_label: RootType,
    pub rank: usize,
}

impl InvariantMap {
    pub fn new(type_label: RootType, rank: usize) -> Result<Self> {
        match type_label {
            RootType::A | RootType::B | RootType::C | RootType::D => Ok(InvariantMap { type_label, rank }),
            _ => Err(Error::Precondition(format!(
                "basic invariants are only available for classical types, not {type_label}"
            ))),
        }
    }

    /// Degrees of the evaluators in output order.
    pub fn degrees(&self) -> Vec<u64> {
        let n = self.rank as u64;
        match self.type_label {
            RootType::A => (2..=n + 1).collect(),
            RootType::B | RootType::C => (1..=n).map(|k| 2 * k).collect(),
            _ => {
                let mut d: Vec<u64> = (1..n).map(|k| 2 * k).collect();
                d.push(n);
                d
            }
        }
    }

    /// Invariants of the ambient series `x`.
    pub fn eval(&self, p: u64, x: &[Vec<u64>], len: usize) -> Vec<Vec<u64>> {
        let n = self.rank;
        match self.type_label {
            RootType::A => {
                let vars: Vec<&[u64]> = x.iter().map(|v| v.as_slice()).collect();
                elementary(p, &vars, n + 1, len)[2..=n + 1].to_vec()
            }
            RootType::B | RootType::C => {
                let sq: Vec<Vec<u64>> = x.iter().map(|v| s_mul(p, v, v, len)).collect();
                let vars: Vec<&[u64]> = sq.iter().map(|v| v.as_slice()).collect();
                elementary(p, &vars, n, len)[1..=n].to_vec()
            }
            _ => {
                let sq: Vec<Vec<u64>> = x.iter().map(|v| s_mul(p, v, v, len)).collect();
                let vars: Vec<&[u64]> = sq.iter().map(|v| v.as_slice()).collect();
                let mut out = elementary(p, &vars, n - 1, len)[1..n].to_vec();
                let mut prod = s_one(len);
                for v in x {
                    prod = s_mul(p, &prod, v, len);
                }
                out.push(prod);
                out
            }
        }
    }

    /// `grad[m][i] = ∂f_m/∂x_i` evaluated at the ambient series `x`.
    pub fn gradient(&self, p: u64, x: &[Vec<u64>], len: usize) -> SeriesMatrix {
        let n = self.rank;
        let dim = x.len();
        let mut grad = vec![vec![vec![0u64; len]; dim]; n];
        for i in 0..dim {
            let others: Vec<&Vec<u64>> = x.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| v).collect();
            match self.type_label {
                RootType::A => {
                    // ∂e_k/∂x_i = e_{k−1}(x without x_i).
                    let vars: Vec<&[u64]> = others.iter().map(|v| v.as_slice()).collect();
                    let e = elementary(p, &vars, n, len);
                    for (m, k) in (2..=n + 1).enumerate() {
                        grad[m][i] = e[k - 1].clone();
                    }
                }
                RootType::B | RootType::C | RootType::D => {
                    // ∂e_k(x²)/∂x_i = 2 x_i e_{k−1}(x² without x_i²).
                    let sq: Vec<Vec<u64>> = others.iter().map(|v| s_mul(p, v, v, len)).collect();
                    let vars: Vec<&[u64]> = sq.iter().map(|v| v.as_slice()).collect();
                    let top = if self.type_label == RootType::D { n - 1 } else { n };
                    let e = elementary(p, &vars, top, len);
                    let two_x = s_scale(p, 2, &x[i]);
                    for k in 1..=top {
                        grad[k - 1][i] = s_mul(p, &two_x, &e[k - 1], len);
                    }
                    if self.type_label == RootType::D {
                        let mut prod = s_one(len);
                        for v in &others {
                            prod = s_mul(p, &prod, v, len);
                        }
                        grad[n - 1][i] = prod;
                    }
                }
                _ => unreachable!("exceptional types are rejected in InvariantMap::new"),
            }
        }
        grad
    }
}

// ---------------------------------------------------------------------------
// Twisted jets

/// A jet `u = Σ_j u_j ε_E^j` in `t_w(O/ε^N O)`; `u[j]` holds `t`-coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JetPoint {
    pub truncation: usize,
    pub l: u64,
    pub u: Vec<Vec<u64>>,
}

/// Lattice coordinates of a jet: one `ε`-series per `O`-basis vector of
/// `t_w(O)`.
pub type LatticeJet = Vec<Vec<u64>>;

/// The twisted Cartan `t_w` over `F_p` with its eigenspace decomposition,
/// root covectors and invariant map.
#[derive(Clone, Debug)]
pub struct TwistedJets {
    pub rank: usize,
    pub field: JetField,
    pub w: IntMatrix,
    /// Basic invariants; `None` for exceptional types, where only root
    /// valuations are available.
    pub invariants: Option<InvariantMap>,
    /// `t(w, j)` over `F_p` for `j = 0..l`, as basis vectors.
    pub eigen: Vec<Vec<Vec<u64>>>,
    /// `O`-basis of `t_w(O)`: vectors `v_k ∈ t(w, j_k)` paired with `j_k`.
    pub basis: Vec<(u64, Vec<u64>)>,
    basis_inv: Vec<Vec<u64>>,
    functionals: Vec<Vec<u64>>,
    t_basis: Vec<Vec<u64>>,
    num_positive: usize,
}

impl TwistedJets {
    pub fn new(rs: &RootSystem, w: &IntMatrix, l: u64, field: JetField) -> Result<Self> {
        let invariants = InvariantMap::new(rs.type_label, rs.rank).ok();
        if field.l != l {
            return Err(Error::FieldInvalid(format!("field carries ζ of order {}, w has order {l}", field.l)));
        }
        let f = field.prime_field();
        let p = field.p;
        let n = rs.rank;
        let m = Matrix::from_i64(&f, w, n);
        let mut eigen = Vec::new();
        let mut basis = Vec::new();
        for j in 0..l {
            let lambda = f.pow(field.zeta, (l - j % l) % l);
            let mut shifted = m.clone();
            for i in 0..n {
                let v = f.sub(shifted.get(i, i), &lambda);
                shifted.set(i, i, v);
            }
            let vecs = kernel(&f, &shifted).vectors();
            for v in &vecs {
                basis.push((j, v.clone()));
            }
            eigen.push(vecs);
        }
        if basis.len() != n {
            return Err(Error::Internal(format!(
                "eigenspaces of w over F_{p} have total dimension {} instead of {n}",
                basis.len()
            )));
        }
        let cols = Matrix::from_rows(n, (0..n).map(|i| basis.iter().map(|(_, v)| v[i]).collect()).collect());
        let basis_inv = invert(&f, &cols)?;
        let to_fp = |v: &Vec<i64>| v.iter().map(|&x| f.from_i64(x)).collect::<Vec<u64>>();
        Ok(TwistedJets {
            rank: n,
            field,
            w: w.clone(),
            invariants,
            eigen,
            basis,
            basis_inv,
            functionals: rs.functionals.iter().map(to_fp).collect(),
            t_basis: rs.t_basis.iter().map(to_fp).collect(),
            num_positive: rs.num_positive(),
        })
    }

    pub fn l(&self) -> u64 {
        self.field.l
    }

    pub fn p(&self) -> u64 {
        self.field.p
    }

    pub fn num_roots(&self) -> usize {
        self.functionals.len()
    }

    /// Every coefficient lies in the right eigenspace.
    pub fn is_member(&self, u: &JetPoint) -> bool {
        let f = self.field.prime_field();
        let l = self.l() as usize;
        u.u.iter().enumerate().all(|(j, v)| {
            let wv: Vec<u64> = self.w.iter().map(|row| row.iter().zip(v).map(|(&a, &b)| f.mul(&f.from_i64(a), &b)).fold(0, |s, x| f.add(&s, &x))).collect();
            let lambda = f.pow(self.field.zeta, ((l - j % l) % l) as u64);
            wv.iter().zip(v).all(|(a, b)| *a == f.mul(&lambda, b))
        })
    }

    pub fn zero_jet(&self, n_trunc: usize) -> JetPoint {
        JetPoint {
            truncation: n_trunc,
            l: self.l(),
            u: vec![vec![0; self.rank]; n_trunc * self.l() as usize],
        }
    }

    /// Jet from lattice coordinates (each series of length `N`).
    pub fn from_lattice(&self, x: &LatticeJet, n_trunc: usize) -> JetPoint {
        let p = self.p();
        let l = self.l() as usize;
        let mut jet = self.zero_jet(n_trunc);
        for (k, (jk, v)) in self.basis.iter().enumerate() {
            for (i, &c) in x[k].iter().enumerate().take(n_trunc) {
                if c == 0 {
                    continue;
                }
                let slot = &mut jet.u[*jk as usize + l * i];
                for (s, &vi) in slot.iter_mut().zip(v) {
                    *s = (*s + c * vi) % p;
                }
            }
        }
        jet
    }

    /// Lattice coordinates of a member jet.
    pub fn to_lattice(&self, u: &JetPoint) -> LatticeJet {
        let p = self.p();
        let l = self.l() as usize;
        let mut x = vec![vec![0u64; u.truncation]; self.rank];
        for (j, v) in u.u.iter().enumerate() {
            let coords: Vec<u64> = self
                .basis_inv
                .iter()
                .map(|row| row.iter().zip(v).fold(0, |s, (a, b)| (s + a * b) % p))
                .collect();
            for (k, (jk, _)) in self.basis.iter().enumerate() {
                if *jk as usize == j % l {
                    x[k][j / l] = coords[k];
                }
            }
        }
        x
    }

    /// `α(u)` as a series in `ε_E`.
    pub fn root_series(&self, u: &JetPoint, a: usize) -> Vec<u64> {
        let p = self.p();
        let f = &self.functionals[a];
        u.u.iter().map(|v| f.iter().zip(v).fold(0, |s, (x, y)| (s + x * y) % p)).collect()
    }

    /// Valuations of all roots in units of `ε_E`; `None` means zero at this
    /// truncation.
    pub fn root_valuations(&self, u: &JetPoint) -> Vec<Option<usize>> {
        (0..self.num_roots()).map(|a| s_val(&self.root_series(u, a))).collect()
    }

    /// `val α(u) = r(α)` for every root. Requires `r(α) < N`.
    pub fn stratum_membership(&self, u: &JetPoint, r: &ValuationFunction) -> Result<bool> {
        let n_big = BigRational::from_integer(BigInt::from(u.truncation as u64));
        if r.values.iter().any(|v| *v >= n_big) {
            return Err(Error::Truncation(format!(
                "r reaches {} but jets are truncated at N = {}",
                crate::exactfield::fmt_rational(&r.max()),
                u.truncation
            )));
        }
        let Some(levels) = r.scaled_levels(self.l()) else {
            return Ok(false);
        };
        let vals = self.root_valuations(u);
        Ok(vals.iter().zip(&levels).all(|(v, &lv)| *v == Some(lv as usize)))
    }

    /// Per `j`, the allowed coefficient vectors of a stratum jet:
    /// `t(w, j) ∩ a_{j+1}` minus the hyperplanes of `R_j \ R_{j+1}`; with
    /// `sharp = false` the hyperplanes are kept (the linear closure).
    pub fn coefficient_choices(&self, r: &ValuationFunction, n_trunc: usize, sharp: bool) -> Vec<Vec<Vec<u64>>> {
        let f = self.field.prime_field();
        let p = self.p();
        let l = self.l();
        let chain = level_chain(r, l);
        let n = self.rank;
        (0..n_trunc * l as usize)
            .map(|j| {
                let eig = &self.eigen[j % l as usize];
                let rj1 = chain.get(j + 1);
                // Coordinates c with Σ c_i e_i ∈ a_{j+1}: α(E c) = 0.
                let rows: Vec<Vec<u64>> = rj1
                    .iter()
                    .map(|a| eig.iter().map(|e| dot_p(p, &self.functionals[a], e)).collect())
                    .collect();
                let sub = if rows.is_empty() || eig.is_empty() {
                    crate::exactfield::Subspace::full(&f, eig.len())
                } else {
                    kernel(&f, &Matrix::from_rows(eig.len(), rows))
                };
                let gens: Vec<Vec<u64>> = sub
                    .vectors()
                    .iter()
                    .map(|c| {
                        let mut v = vec![0u64; n];
                        for (ci, e) in c.iter().zip(eig) {
                            for (s, x) in v.iter_mut().zip(e) {
                                *s = (*s + ci * x) % p;
                            }
                        }
                        v
                    })
                    .collect();
                let diff: Vec<usize> = chain.get(j).difference(&rj1).iter().collect();
                all_combinations(p, &gens, n)
                    .into_iter()
                    .filter(|v| !sharp || diff.iter().all(|&a| dot_p(p, &self.functionals[a], v) != 0))
                    .collect()
            })
            .collect()
    }

    /// All `F_p`-points of the stratum at level `N`.
    pub fn enumerate_stratum_jets(&self, r: &ValuationFunction, n_trunc: usize, cap: usize) -> Result<Vec<JetPoint>> {
        let n_big = BigRational::from_integer(BigInt::from(n_trunc as u64));
        if r.values.iter().any(|v| *v >= n_big) {
            return Err(Error::Truncation("stratum enumeration needs r(α) < N".into()));
        }
        if r.scaled_levels(self.l()).is_none() {
            return Ok(Vec::new());
        }
        let choices = self.coefficient_choices(r, n_trunc, true);
        let mut total: u128 = 1;
        for c in &choices {
            total *= c.len() as u128;
        }
        if total > cap as u128 {
            return Err(Error::CapExceeded(format!("{total} stratum jets exceed the cap {cap}")));
        }
        if total == 0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; choices.len()];
        loop {
            out.push(JetPoint {
                truncation: n_trunc,
                l: self.l(),
                u: idx.iter().zip(&choices).map(|(&i, c)| c[i].clone()).collect(),
            });
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn ambient_series(&self, u: &[Vec<u64>], len: usize) -> Vec<Vec<u64>> {
        let p = self.p();
        let dim = self.t_basis[0].len();
        (0..dim)
            .map(|i| {
                (0..len)
                    .map(|j| {
                        u.get(j)
                            .map(|v| v.iter().zip(&self.t_basis).fold(0, |s, (c, b)| (s + c * b[i]) % p))
                            .unwrap_or(0)
                    })
                    .collect()
            })
            .collect()
    }

    /// Drops fractional exponents (which must vanish) and re-indexes to
    /// integral powers of `ε`.
    fn integral_part(&self, s: &[u64], len: usize) -> Result<Vec<u64>> {
        let l = self.l() as usize;
        for (j, &c) in s.iter().enumerate() {
            if j % l != 0 && c != 0 {
                return Err(Error::FractionalResidue(j));
            }
        }
        Ok((0..len).map(|i| s.get(i * l).copied().unwrap_or(0)).collect())
    }

    /// Image of the jet in the adjoint quotient, as series in `ε` truncated
    /// at `ε^N`.
    pub fn apply_invariants(&self, u: &JetPoint) -> Result<Vec<TruncatedSeries>> {
        let len = u.truncation * self.l() as usize;
        let x = self.ambient_series(&u.u, len);
        self.invariant_map()?
            .eval(self.p(), &x, len)
            .iter()
            .map(|s| {
                Ok(TruncatedSeries {
                    p: self.p(),
                    l: 1,
                    coeffs: self.integral_part(s, u.truncation)?,
                })
            })
            .collect()
    }

    fn invariant_map(&self) -> Result<&InvariantMap> {
        self.invariants
            .as_ref()
            .ok_or_else(|| Error::Precondition("basic invariants are only available for classical types".into()))
    }

    /// Flat image vector (all invariants concatenated), used as a hash key.
    pub fn image_key(&self, u: &JetPoint) -> Result<Vec<u64>> {
        Ok(self.apply_invariants(u)?.into_iter().flat_map(|s| s.coeffs).collect())
    }

    /// Differential of `f_w` at `u` in the lattice basis, in `ε_E` units
    /// (rows = invariants, columns = basis vectors).
    fn differential_e(&self, u: &[Vec<u64>], len: usize) -> Result<SeriesMatrix> {
        let p = self.p();
        let x = self.ambient_series(u, len);
        let grad = self.invariant_map()?.gradient(p, &x, len);
        let n = self.rank;
        let mut d = vec![vec![vec![0u64; len]; n]; n];
        for (k, (jk, v)) in self.basis.iter().enumerate() {
            let bv: Vec<u64> = (0..x.len())
                .map(|i| v.iter().zip(&self.t_basis).fold(0, |s, (c, b)| (s + c * b[i]) % p))
                .collect();
            for (m, row) in d.iter_mut().enumerate() {
                let mut col = vec![0u64; len];
                for (i, &c) in bv.iter().enumerate() {
                    if c != 0 {
                        s_add_assign(p, &mut col, &s_scale(p, c, &grad[m][i]));
                    }
                }
                // Multiply by ε_E^{j_k}.
                let shift = *jk as usize;
                let mut shifted = vec![0u64; len];
                shifted[shift.min(len)..].copy_from_slice(&col[..len - shift.min(len)]);
                row[k] = shifted;
            }
        }
        Ok(d)
    }

    /// Valuation (in units of `ε`) of the Jacobian determinant of `f_w` at
    /// `u`, with respect to an `O`-basis of `t_w(O)`.
    pub fn jacobian_valuation(&self, u: &JetPoint) -> Result<BigRational> {
        let len = u.truncation * self.l() as usize;
        let d = self.differential_e(&u.u, len)?;
        let det = s_det(self.p(), &d, len);
        match s_val(&det) {
            Some(v) => Ok(BigRational::new(BigInt::from(v as u64), BigInt::from(self.l()))),
            None => Err(Error::Truncation(format!(
                "Jacobian determinant vanishes modulo ε^{}",
                u.truncation
            ))),
        }
    }

    /// Whether some non-identity element among `others` fixes `u`.
    pub fn fixed_by_any(&self, u: &JetPoint, others: &[IntMatrix]) -> bool {
        let f = self.field.prime_field();
        others.iter().any(|x| {
            u.u.iter().all(|v| {
                let xv: Vec<u64> = x
                    .iter()
                    .map(|row| row.iter().zip(v).fold(0, |s, (&a, &b)| f.add(&s, &f.mul(&f.from_i64(a), &b))))
                    .collect();
                xv == *v
            })
        })
    }

    pub fn num_positive(&self) -> usize {
        self.num_positive
    }
}

fn dot_p(p: u64, a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).fold(0, |s, (x, y)| (s + x * y) % p)
}

fn all_combinations(p: u64, gens: &[Vec<u64>], n: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; n]];
    for g in gens {
        let mut next = Vec::with_capacity(out.len() * p as usize);
        for v in &out {
            for c in 0..p {
                next.push(v.iter().zip(g).map(|(a, b)| (a + c * b) % p).collect());
            }
        }
        out = next;
    }
    out
}

fn invert(f: &PrimeField, m: &Matrix<u64>) -> Result<Vec<Vec<u64>>> {
    let n = m.rows;
    let mut cols = Vec::new();
    for i in 0..n {
        let mut e = vec![0u64; n];
        e[i] = 1;
        let x = crate::exactfield::solve(f, m, &e)
            .ok_or_else(|| Error::Internal("eigenbasis is singular over F_p".into()))?;
        cols.push(x);
    }
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

// ---------------------------------------------------------------------------
// Successive approximation

/// A polynomial map `O^n → O^n` given on truncated series.
pub trait SeriesMap: Sync {
    fn dim(&self) -> usize;
    fn prime(&self) -> u64;
    fn eval(&self, x: &[Vec<u64>], len: usize) -> Result<Vec<Vec<u64>>>;
    /// `D[m][k] = ∂f_m/∂x_k` at `x`.
    fn differential(&self, x: &[Vec<u64>], len: usize) -> Result<SeriesMatrix>;
}

/// `x ↦ x^k` on `O`.
#[derive(Clone, Copy, Debug)]
pub struct PowerMap {
    pub p: u64,
    pub k: u32,
}

impl SeriesMap for PowerMap {
    fn dim(&self) -> usize {
        1
    }
    fn prime(&self) -> u64 {
        self.p
    }
    fn eval(&self, x: &[Vec<u64>], len: usize) -> Result<Vec<Vec<u64>>> {
        let mut acc = s_one(len);
        let xs = s_resize(&x[0], len);
        for _ in 0..self.k {
            acc = s_mul(self.p, &acc, &xs, len);
        }
        Ok(vec![acc])
    }
    fn differential(&self, x: &[Vec<u64>], len: usize) -> Result<SeriesMatrix> {
        let mut acc = s_one(len);
        let xs = s_resize(&x[0], len);
        for _ in 1..self.k {
            acc = s_mul(self.p, &acc, &xs, len);
        }
        Ok(vec![vec![s_scale(self.p, self.k as u64 % self.p, &acc)]])
    }
}

/// The identity of `O^n`.
#[derive(Clone, Copy, Debug)]
pub struct IdentityMap {
    pub p: u64,
    pub n: usize,
}

impl SeriesMap for IdentityMap {
    fn dim(&self) -> usize {
        self.n
    }
    fn prime(&self) -> u64 {
        self.p
    }
    fn eval(&self, x: &[Vec<u64>], len: usize) -> Result<Vec<Vec<u64>>> {
        Ok(x.iter().map(|s| s_resize(s, len)).collect())
    }
    fn differential(&self, _x: &[Vec<u64>], len: usize) -> Result<SeriesMatrix> {
        Ok((0..self.n)
            .map(|i| (0..self.n).map(|j| if i == j { s_one(len) } else { vec![0; len] }).collect())
            .collect())
    }
}

/// `f_w` in lattice coordinates of `t_w(O)`.
impl SeriesMap for TwistedJets {
    fn dim(&self) -> usize {
        self.rank
    }
    fn prime(&self) -> u64 {
        self.p()
    }
    fn eval(&self, x: &[Vec<u64>], len: usize) -> Result<Vec<Vec<u64>>> {
        let padded: LatticeJet = x.iter().map(|s| s_resize(s, len)).collect();
        let u = self.from_lattice(&padded, len);
        Ok(self.apply_invariants(&u)?.into_iter().map(|s| s.coeffs).collect())
    }
    fn differential(&self, x: &[Vec<u64>], len: usize) -> Result<SeriesMatrix> {
        let padded: LatticeJet = x.iter().map(|s| s_resize(s, len)).collect();
        let u = self.from_lattice(&padded, len);
        let le = len * self.l() as usize;
        let d = self.differential_e(&u.u, le)?;
        d.iter()
            .map(|row| row.iter().map(|s| self.integral_part(s, len)).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HenselSolution {
    pub x: LatticeJet,
    /// `val det D_{x0}`.
    pub d: usize,
    pub iterations: usize,
}

/// Solves `f(x') ≡ y (mod ε^N)` with `x' ≡ x0 (mod ε^M)` by the iteration
/// `x_i = x_{i−1} + h_i`, `D_{x_{i−1}} h_i = y − f(x_{i−1})`.
///
/// Requires `d(x0) < M` and `M + d(x0) ≤ N`; `y` must lie in
/// `f(x0) + D_{x0} ε^M L`, which is tested exactly before iterating.
pub fn hensel_solve(f: &dyn SeriesMap, x0: &[Vec<u64>], y: &[Vec<u64>], m: usize, n_trunc: usize) -> Result<HenselSolution> {
    let p = f.prime();
    let n = f.dim();
    if x0.len() != n || y.len() != n {
        return Err(Error::Precondition("dimension mismatch".into()));
    }
    let x0: LatticeJet = x0.iter().map(|s| s_resize(s, n_trunc)).collect();
    let y: Vec<Vec<u64>> = y.iter().map(|s| s_resize(s, n_trunc)).collect();
    let wide = 2 * n_trunc + 1;
    let d0 = f.differential(&x0, wide)?;
    let d = s_val(&s_det(p, &d0, wide))
        .ok_or_else(|| Error::Precondition("Jacobian determinant vanishes at x0".into()))?;
    if m <= d {
        return Err(Error::Precondition(format!("M = {m} must exceed d(x0) = {d}")));
    }
    if m + d > n_trunc {
        return Err(Error::Precondition(format!("M + d(x0) = {} exceeds N = {n_trunc}", m + d)));
    }
    let prec = n_trunc + d;

    // Reachability: adj(D) (y − f(x0)) ∈ det · ε^M L.
    let fx0 = f.eval(&x0, n_trunc)?;
    let b: Vec<Vec<u64>> = y.iter().zip(&fx0).map(|(a, c)| s_resize(&s_sub(p, a, c), prec)).collect();
    let dp = f.differential(&x0, prec)?;
    let adj_b = s_adj_apply(p, &dp, &b, prec);
    if adj_b.iter().any(|s| s[..d + m].iter().any(|&c| c != 0)) {
        return Err(Error::NoSolution(format!(
            "y − f(x0) is not in D·ε^{m}L (valuation below {})",
            d + m
        )));
    }

    let mut x = x0.clone();
    for iter in 0..=n_trunc {
        let fx = f.eval(&x, n_trunc)?;
        let b: Vec<Vec<u64>> = y.iter().zip(&fx).map(|(a, c)| s_sub(p, a, c)).collect();
        if b.iter().all(|s| s.iter().all(|&c| c == 0)) {
            return Ok(HenselSolution { x, d, iterations: iter });
        }
        let dx = f.differential(&x, prec)?;
        let det = s_det(p, &dx, prec);
        let dv = s_val(&det).ok_or_else(|| Error::Internal("Jacobian vanished during iteration".into()))?;
        if dv != d {
            return Err(Error::Internal(format!("d(x_i) = {dv} drifted from d(x0) = {d}")));
        }
        let unit_inv = s_inv_unit(p, &det[d..], n_trunc);
        let bw: Vec<Vec<u64>> = b.iter().map(|s| s_resize(s, prec)).collect();
        let num = s_adj_apply(p, &dx, &bw, prec);
        for (k, s) in num.iter().enumerate() {
            if s[..d].iter().any(|&c| c != 0) {
                return Err(Error::Internal("adj(D)·b not divisible by det".into()));
            }
            let h = s_mul(p, &s[d..d + n_trunc], &unit_inv, n_trunc);
            if s_val(&h).is_some_and(|v| v < m + iter) {
                return Err(Error::Internal(format!("correction of valuation below M + i − 1 = {}", m + iter)));
            }
            s_add_assign(p, &mut x[k], &h);
        }
    }
    Err(Error::Internal("successive approximation did not converge".into()))
}

/// The affine piece `π_N(x) + ε^M V_x` of a jet fiber.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberPiece {
    pub base: LatticeJet,
    /// Basis of `ε^M V_x`, each vector in lattice coordinates mod `ε^N`.
    pub directions: Vec<LatticeJet>,
    pub size: u64,
}

/// `ker D_{x,e}` on `L/ε^e L`, as lattice jets of length `e`.
pub fn kernel_mod(f: &dyn SeriesMap, x: &[Vec<u64>], e: usize) -> Result<Vec<LatticeJet>> {
    let p = f.prime();
    let n = f.dim();
    if e == 0 {
        return Ok(Vec::new());
    }
    let d = f.differential(x, e)?;
    let fp = PrimeField::new(p).unwrap();
    // Unknown (k, i) ↦ column k*e + i; equation (m, s) ↦ row m*e + s.
    let mut rows = vec![vec![0u64; n * e]; n * e];
    for mi in 0..n {
        for s in 0..e {
            for k in 0..n {
                for i in 0..=s {
                    rows[mi * e + s][k * e + i] = d[mi][k][s - i];
                }
            }
        }
    }
    let ker = kernel(&fp, &Matrix::from_rows(n * e, rows));
    Ok(ker
        .vectors()
        .iter()
        .map(|v| (0..n).map(|k| v[k * e..(k + 1) * e].to_vec()).collect())
        .collect())
}

/// Decomposes the full jet fiber of `f_N` over `y_bar` inside `t_w` into
/// the affine pieces `A_x`, one per solution class modulo `ε^M`, `M = N − e`.
pub fn fiber_pieces(tj: &TwistedJets, y_bar: &[TruncatedSeries], e: usize, n_trunc: usize, cap: usize) -> Result<Vec<FiberPiece>> {
    if n_trunc <= 2 * e {
        return Err(Error::Precondition(format!("fiber description needs N > 2e, got N = {n_trunc}, e = {e}")));
    }
    let m = n_trunc - e;
    let p = tj.p();
    let target: Vec<u64> = y_bar.iter().flat_map(|s| s_resize(&s.coeffs, n_trunc)).collect();
    let mut fiber: Vec<LatticeJet> = Vec::new();
    for_each_lattice_jet(tj.rank, p, n_trunc, cap, |x| {
        let u = tj.from_lattice(x, n_trunc);
        if tj.image_key(&u)? == target {
            fiber.push(x.clone());
        }
        Ok(())
    })?;
    let y: Vec<Vec<u64>> = y_bar.iter().map(|s| s_resize(&s.coeffs, n_trunc)).collect();
    let mut groups: std::collections::BTreeMap<Vec<Vec<u64>>, Vec<LatticeJet>> = Default::default();
    for x in fiber {
        let key: Vec<Vec<u64>> = x.iter().map(|s| s[..m].to_vec()).collect();
        groups.entry(key).or_default().push(x);
    }
    let mut pieces = Vec::new();
    for (_, members) in groups {
        let rep = &members[0];
        let sol = hensel_solve(tj, rep, &y, m, n_trunc)?;
        let v = kernel_mod(tj, &sol.x, e)?;
        let directions: Vec<LatticeJet> = v
            .iter()
            .map(|h| {
                h.iter()
                    .map(|s| {
                        let mut full = vec![0u64; n_trunc];
                        full[m..m + e].copy_from_slice(s);
                        full
                    })
                    .collect()
            })
            .collect();
        let size = p.pow(directions.len() as u32);
        if size != members.len() as u64 {
            return Err(Error::Internal(format!(
                "fiber class modulo ε^{m} has {} jets, the affine piece has {size}",
                members.len()
            )));
        }
        pieces.push(FiberPiece {
            base: sol.x,
            directions,
            size,
        });
    }
    Ok(pieces)
}

/// Calls `visit` on every lattice jet in `F_p^{n N}` (odometer order).
pub fn for_each_lattice_jet(
    n: usize,
    p: u64,
    n_trunc: usize,
    cap: usize,
    mut visit: impl FnMut(&LatticeJet) -> Result<()>,
) -> Result<()> {
    let slots = n * n_trunc;
    let total = (p as u128).checked_pow(slots as u32).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::CapExceeded(format!("{p}^{slots} jets exceed the cap {cap}")));
    }
    let mut x: LatticeJet = vec![vec![0u64; n_trunc]; n];
    loop {
        visit(&x)?;
        let mut k = 0;
        loop {
            if k == slots {
                return Ok(());
            }
            let (a, b) = (k / n_trunc, k % n_trunc);
            x[a][b] += 1;
            if x[a][b] < p {
                break;
            }
            x[a][b] = 0;
            k += 1;
        }
    }
}

/// Lattice jet with index `idx` in base-`p` digits.
pub fn lattice_jet_from_index(n: usize, p: u64, n_trunc: usize, mut idx: u64) -> LatticeJet {
    let mut x = vec![vec![0u64; n_trunc]; n];
    for k in 0..n * n_trunc {
        x[k / n_trunc][k % n_trunc] = idx % p;
        idx /= p;
    }
    x
}
