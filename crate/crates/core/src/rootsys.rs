//! Root systems of types A–G with exact integer data, Weyl group
//! enumeration, invariant degrees and conjugacy classes.
//!
//! Vectors of `t` are written in the basis of simple coroots for every type
//! except B, C and D, where the standard orthonormal coordinates are used.
//! Roots are stored twice: as covectors on those `t`-coordinates
//! (`functionals`) and in the realization coordinates (`roots`): trace-zero
//! ambient coordinates for A, standard coordinates for B/C/D, and
//! fundamental-weight coordinates for E/F/G.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactfield::{solve, Field, Matrix, Rationals};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_WEYL_CAP: usize = 1_000_000;
/// Root subsets are bitsets of this many bits.
pub const MAX_ROOTS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RootType {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl fmt::Display for RootType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RootType::A => "A",
            RootType::B => "B",
            RootType::C => "C",
            RootType::D => "D",
            RootType::E => "E",
            RootType::F => "F",
            RootType::G => "G",
        };
        f.write_str(s)
    }
}

impl FromStr for RootType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(RootType::A),
            "B" => Ok(RootType::B),
            "C" => Ok(RootType::C),
            "D" => Ok(RootType::D),
            "E" => Ok(RootType::E),
            "F" => Ok(RootType::F),
            "G" => Ok(RootType::G),
            other => Err(Error::InvalidType(format!("unknown type label {other:?}"))),
        }
    }
}

pub type IntMatrix = Vec<Vec<i64>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSystem {
    pub type_label: RootType,
    pub rank: usize,
    pub ambient_dim: usize,
    /// Roots in realization coordinates. Positive roots come first, ordered
    /// by height; root `i + |R+|` is the negative of root `i`.
    pub roots: IntMatrix,
    /// Roots as covectors on `t`-coordinates.
    pub functionals: IntMatrix,
    /// Coroots as vectors in `t`-coordinates.
    pub coroots: IntMatrix,
    /// Coefficients of each root in the simple roots.
    pub simple_coeffs: IntMatrix,
    pub positive_roots: Vec<usize>,
    /// `cartan[i][j] = α_j(α_i^∨)`.
    pub cartan: IntMatrix,
    pub simple_reflections: Vec<IntMatrix>,
    /// `t`-basis vectors written in realization coordinates.
    pub t_basis: IntMatrix,
}

fn cartan_for(t: RootType, n: usize) -> Result<IntMatrix> {
    let bad = || Err(Error::InvalidType(format!("{t}{n} is not a valid type/rank pair")));
    let valid = match t {
        RootType::A => n >= 1,
        RootType::B | RootType::C => n >= 2,
        RootType::D => n >= 3,
        RootType::E => (6..=8).contains(&n),
        RootType::F => n == 4,
        RootType::G => n == 2,
    };
    if !valid {
        return bad();
    }
    let mut c = vec![vec![0i64; n]; n];
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 2;
    }
    let link = |c: &mut IntMatrix, i: usize, j: usize| {
        c[i][j] = -1;
        c[j][i] = -1;
    };
    match t {
        RootType::A | RootType::B | RootType::C => {
            for i in 0..n - 1 {
                link(&mut c, i, i + 1);
            }
            // B: α_n short, ⟨α_n, α_{n-1}^∨⟩ = -1, ⟨α_{n-1}, α_n^∨⟩ = -2.
            if t == RootType::B {
                c[n - 1][n - 2] = -2;
            }
            if t == RootType::C {
                c[n - 2][n - 1] = -2;
            }
        }
        RootType::D => {
            for i in 0..n - 2 {
                link(&mut c, i, i + 1);
            }
            link(&mut c, n - 3, n - 1);
        }
        RootType::E => {
            link(&mut c, 0, 2);
            link(&mut c, 1, 3);
            for i in 2..n - 1 {
                link(&mut c, i, i + 1);
            }
        }
        RootType::F => {
            c = vec![
                vec![2, -1, 0, 0],
                vec![-1, 2, -1, 0],
                vec![0, -2, 2, -1],
                vec![0, 0, -1, 2],
            ];
        }
        RootType::G => {
            c = vec![vec![2, -1], vec![-3, 2]];
        }
    }
    Ok(c)
}

/// Simple roots (as covectors), simple coroots, realization of simple roots,
/// and the `t`-basis in realization coordinates.
struct SimpleData {
    functionals: IntMatrix,
    coroots: IntMatrix,
    realized: IntMatrix,
    t_basis: IntMatrix,
    ambient_dim: usize,
}

fn unit(n: usize, i: usize) -> Vec<i64> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

fn simple_data(t: RootType, n: usize, cartan: &IntMatrix) -> SimpleData {
    match t {
        RootType::B | RootType::C | RootType::D => {
            let mut functionals = Vec::new();
            let mut coroots = Vec::new();
            for i in 0..n - 1 {
                let mut a = vec![0; n];
                a[i] = 1;
                a[i + 1] = -1;
                functionals.push(a.clone());
                coroots.push(a);
            }
            match t {
                RootType::B => {
                    functionals.push(unit(n, n - 1));
                    coroots.push(unit(n, n - 1).iter().map(|x| 2 * x).collect());
                }
                RootType::C => {
                    functionals.push(unit(n, n - 1).iter().map(|x| 2 * x).collect());
                    coroots.push(unit(n, n - 1));
                }
                _ => {
                    let mut a = vec![0; n];
                    a[n - 2] = 1;
                    a[n - 1] = 1;
                    functionals.push(a.clone());
                    coroots.push(a);
                }
            }
            SimpleData {
                realized: functionals.clone(),
                functionals,
                coroots,
                t_basis: (0..n).map(|i| unit(n, i)).collect(),
                ambient_dim: n,
            }
        }
        _ => {
            // Simple-coroot coordinates: α_j has coordinates (α_j(α_i^∨))_i.
            let functionals: IntMatrix = (0..n).map(|j| (0..n).map(|i| cartan[i][j]).collect()).collect();
            let coroots: IntMatrix = (0..n).map(|i| unit(n, i)).collect();
            if t == RootType::A {
                let realized = (0..n)
                    .map(|i| {
                        let mut v = vec![0; n + 1];
                        v[i] = 1;
                        v[i + 1] = -1;
                        v
                    })
                    .collect::<IntMatrix>();
                SimpleData {
                    t_basis: realized.clone(),
                    realized,
                    functionals,
                    coroots,
                    ambient_dim: n + 1,
                }
            } else {
                SimpleData {
                    realized: functionals.clone(),
                    functionals,
                    coroots,
                    t_basis: (0..n).map(|i| unit(n, i)).collect(),
                    ambient_dim: n,
                }
            }
        }
    }
}

fn dot_i(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lin_comb(coeffs: &[i64], vecs: &IntMatrix, dim: usize) -> Vec<i64> {
    let mut out = vec![0; dim];
    for (c, v) in coeffs.iter().zip(vecs) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

pub fn mat_mul_i(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            if x == 0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += x * b[l][j];
            }
        }
    }
    out
}

pub fn mat_vec_i(a: &IntMatrix, v: &[i64]) -> Vec<i64> {
    a.iter().map(|row| dot_i(row, v)).collect()
}

pub fn identity_i(n: usize) -> IntMatrix {
    (0..n).map(|i| unit(n, i)).collect()
}

/// Builds the root system of the given type and rank.
pub fn build_root_system(type_label: RootType, rank: usize) -> Result<RootSystem> {
    let n = rank;
    let cartan_in = cartan_for(type_label, n)?;
    let sd = simple_data(type_label, n, &cartan_in);

    // Simple reflections on t: S_k = I - α_k^∨ ⊗ α_k.
    let refl: Vec<IntMatrix> = (0..n)
        .map(|k| {
            let mut m = identity_i(n);
            for i in 0..n {
                for j in 0..n {
                    m[i][j] -= sd.coroots[k][i] * sd.functionals[k][j];
                }
            }
            m
        })
        .collect();

    // Reflection closure on simple-root coefficient vectors, carrying coroots.
    let mut seen: HashMap<Vec<i64>, Vec<i64>> = HashMap::new();
    let mut queue = VecDeque::new();
    for k in 0..n {
        let c = unit(n, k);
        seen.insert(c.clone(), sd.coroots[k].clone());
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        let f = lin_comb(&c, &sd.functionals, n);
        let corr = seen[&c].clone();
        for k in 0..n {
            let pairing = dot_i(&f, &sd.coroots[k]);
            let mut c2 = c.clone();
            c2[k] -= pairing;
            if !seen.contains_key(&c2) {
                let co2 = mat_vec_i(&refl[k], &corr);
                seen.insert(c2.clone(), co2);
                queue.push_back(c2);
            }
        }
    }
    let mut positive: Vec<Vec<i64>> = seen.keys().filter(|c| c.iter().all(|&x| x >= 0)).cloned().collect();
    if seen.len() != 2 * positive.len() {
        return Err(Error::Internal("root closure is not symmetric".into()));
    }
    if seen.len() > MAX_ROOTS {
        return Err(Error::InvalidType(format!(
            "{type_label}{n} has {} roots; at most {MAX_ROOTS} are supported",
            seen.len()
        )));
    }
    positive.sort_by(|a, b| {
        let ha: i64 = a.iter().sum();
        let hb: i64 = b.iter().sum();
        ha.cmp(&hb).then_with(|| b.cmp(a))
    });
    let np = positive.len();
    let mut simple_coeffs = positive.clone();
    simple_coeffs.extend(positive.iter().map(|c| c.iter().map(|x| -x).collect::<Vec<_>>()));
    let functionals: IntMatrix = simple_coeffs.iter().map(|c| lin_comb(c, &sd.functionals, n)).collect();
    let roots: IntMatrix = simple_coeffs.iter().map(|c| lin_comb(c, &sd.realized, sd.ambient_dim)).collect();
    let coroots: IntMatrix = simple_coeffs.iter().map(|c| seen[c].clone()).collect();
    let cartan: IntMatrix = (0..n)
        .map(|i| (0..n).map(|j| dot_i(&sd.functionals[j], &sd.coroots[i])).collect())
        .collect();
    debug_assert_eq!(cartan, cartan_in);

    Ok(RootSystem {
        type_label,
        rank: n,
        ambient_dim: sd.ambient_dim,
        roots,
        functionals,
        coroots,
        simple_coeffs,
        positive_roots: (0..np).collect(),
        cartan,
        simple_reflections: refl,
        t_basis: sd.t_basis,
    })
}

impl RootSystem {
    pub fn num_roots(&self) -> usize {
        self.functionals.len()
    }

    pub fn num_positive(&self) -> usize {
        self.positive_roots.len()
    }

    pub fn negative_of(&self, a: usize) -> usize {
        let np = self.num_positive();
        if a < np {
            a + np
        } else {
            a - np
        }
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.type_label, self.rank)
    }

    /// Lookup table from covector to root index.
    pub fn functional_index(&self) -> HashMap<Vec<i64>, usize> {
        self.functionals.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect()
    }

    /// Root permutation induced by a matrix on `t`: `perm[a] = b` when
    /// `α_a ∘ X⁻¹ = α_b`, i.e. `α_b ∘ X = α_a`.
    pub fn root_perm_of(&self, x: &IntMatrix, index: &HashMap<Vec<i64>, usize>) -> Option<Vec<u16>> {
        let n = self.rank;
        let mut perm = vec![u16::MAX; self.num_roots()];
        for (b, fb) in self.functionals.iter().enumerate() {
            let fa: Vec<i64> = (0..n).map(|j| (0..n).map(|i| fb[i] * x[i][j]).sum()).collect();
            let a = *index.get(&fa)?;
            perm[a] = b as u16;
        }
        Some(perm)
    }

    /// The ambient realization of a `t`-coordinate vector.
    pub fn to_ambient(&self, v: &[i64]) -> Vec<i64> {
        lin_comb(v, &self.t_basis, self.ambient_dim)
    }

    /// Versioned JSON document with the root data.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "type": self.type_label,
            "rank": self.rank,
            "ambient_dim": self.ambient_dim,
            "roots": self.roots,
            "positive_roots": self.positive_roots,
            "cartan": self.cartan,
            "functionals": self.functionals,
            "simple_reflections": self.simple_reflections,
        })
    }
}

/// A Weyl group element: its matrix on `t`, the root permutation it induces
/// and a reduced word (1-based generator labels).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeylElement {
    pub matrix: IntMatrix,
    pub root_perm: Vec<u16>,
    pub word: Vec<usize>,
}

impl WeylElement {
    pub fn word_string(&self) -> String {
        if self.word.is_empty() {
            "id".to_string()
        } else {
            self.word.iter().map(|k| format!("s{k}")).collect::<Vec<_>>().join(" ")
        }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == identity_i(self.matrix.len())
    }
}

/// Builds a Weyl element from a word of 1-based generator labels.
pub fn element_from_word(rs: &RootSystem, word: &[usize]) -> Result<WeylElement> {
    let n = rs.rank;
    let mut m = identity_i(n);
    for &k in word {
        if k == 0 || k > n {
            return Err(Error::Parse(format!("generator s{k} out of range 1..={n}")));
        }
        m = mat_mul_i(&m, &rs.simple_reflections[k - 1]);
    }
    let index = rs.functional_index();
    let perm = rs
        .root_perm_of(&m, &index)
        .ok_or_else(|| Error::Internal("word does not permute roots".into()))?;
    Ok(WeylElement {
        matrix: m,
        root_perm: perm,
        word: word.to_vec(),
    })
}

/// The Coxeter element `s1 s2 ⋯ sn`.
pub fn coxeter_element(rs: &RootSystem) -> WeylElement {
    let word: Vec<usize> = (1..=rs.rank).collect();
    element_from_word(rs, &word).expect("generators are in range")
}

/// All elements of `W`, identity first, in breadth-first order of reduced
/// words.
#[derive(Clone, Debug)]
pub struct WeylGroup {
    pub rank: usize,
    pub elements: Vec<WeylElement>,
    index: HashMap<IntMatrix, usize>,
    inverses: Vec<usize>,
}

/// `|W| = n! · ∏ m_i · det(C)`, with `m_i` the coefficients of the highest
/// root and `C` the Cartan matrix.
pub fn weyl_order_formula(rs: &RootSystem) -> u128 {
    let n = rs.rank;
    let highest = &rs.simple_coeffs[rs.num_positive() - 1];
    let fact: u128 = (1..=n as u128).product();
    let coeffs: u128 = highest.iter().map(|&c| c as u128).product();
    fact * coeffs * int_det(&rs.cartan) as u128
}

/// Determinant of a small integer matrix by fraction-free elimination.
fn int_det(m: &IntMatrix) -> i128 {
    let n = m.len();
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        let Some(piv) = (k..n).find(|&i| a[i][k] != 0) else {
            return 0;
        };
        if piv != k {
            a.swap(piv, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Enumerates `W` by right multiplication with simple reflections. Groups
/// larger than `cap` are refused up front using the order formula.
pub fn enumerate_weyl(rs: &RootSystem, cap: usize) -> Result<WeylGroup> {
    let n = rs.rank;
    let expected = weyl_order_formula(rs);
    if expected > cap as u128 {
        return Err(Error::CapExceeded(format!(
            "Weyl group of {} has {expected} elements, more than {cap}",
            rs.label()
        )));
    }
    let froot = rs.functional_index();
    let id = identity_i(n);
    let mut elements = vec![WeylElement {
        matrix: id.clone(),
        root_perm: (0..rs.num_roots() as u16).collect(),
        word: Vec::new(),
    }];
    let mut index = HashMap::new();
    index.insert(id, 0usize);
    let mut head = 0;
    while head < elements.len() {
        for k in 0..n {
            let m = mat_mul_i(&elements[head].matrix, &rs.simple_reflections[k]);
            if index.contains_key(&m) {
                continue;
            }
            if elements.len() >= cap {
                return Err(Error::CapExceeded(format!(
                    "Weyl group of {} has more than {cap} elements",
                    rs.label()
                )));
            }
            let mut word = elements[head].word.clone();
            word.push(k + 1);
            let perm = rs
                .root_perm_of(&m, &froot)
                .ok_or_else(|| Error::Internal("Weyl element does not permute roots".into()))?;
            index.insert(m.clone(), elements.len());
            elements.push(WeylElement {
                matrix: m,
                root_perm: perm,
                word,
            });
        }
        head += 1;
    }
    if elements.len() as u128 != expected {
        return Err(Error::Internal(format!(
            "enumerated {} elements of W({}), expected {expected}",
            elements.len(),
            rs.label()
        )));
    }
    // The inverse of a word is the reversed word.
    let inverses = elements
        .iter()
        .map(|e| {
            let mut m = identity_i(n);
            for &k in e.word.iter().rev() {
                m = mat_mul_i(&m, &rs.simple_reflections[k - 1]);
            }
            index[&m]
        })
        .collect();
    Ok(WeylGroup {
        rank: n,
        elements,
        index,
        inverses,
    })
}

impl WeylGroup {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn find(&self, m: &IntMatrix) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn element(&self, i: usize) -> &WeylElement {
        &self.elements[i]
    }

    pub fn compose(&self, a: usize, b: usize) -> usize {
        let m = mat_mul_i(&self.elements[a].matrix, &self.elements[b].matrix);
        self.index[&m]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverses[a]
    }

    /// `x w x⁻¹`.
    pub fn conjugate(&self, x: usize, w: usize) -> usize {
        let xi = self.inverse(x);
        self.compose(self.compose(x, w), xi)
    }

    pub fn order_of(&self, a: usize) -> usize {
        let mut k = 1;
        let mut cur = a;
        while cur != 0 {
            cur = self.compose(cur, a);
            k += 1;
        }
        k
    }

    pub fn power(&self, a: usize, k: usize) -> usize {
        let mut cur = 0;
        for _ in 0..k {
            cur = self.compose(cur, a);
        }
        cur
    }

    pub fn length(&self, a: usize) -> usize {
        self.elements[a].word.len()
    }
}

/// Canonical representative (lexicographically least matrix) of the
/// conjugacy class of `w`, together with the class size.
pub fn conjugacy_class_of(group: &WeylGroup, w: usize) -> (usize, usize) {
    let members = class_members(group, w);
    let rep = *members
        .iter()
        .min_by(|&&a, &&b| group.elements[a].matrix.cmp(&group.elements[b].matrix))
        .expect("class contains w");
    (rep, members.len())
}

fn class_members(group: &WeylGroup, w: usize) -> Vec<usize> {
    let mut set: HashSet<usize> = HashSet::new();
    for x in 0..group.len() {
        set.insert(group.conjugate(x, w));
    }
    let mut v: Vec<usize> = set.into_iter().collect();
    v.sort_unstable();
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugacyClass {
    pub representative: usize,
    pub size: usize,
    pub order: usize,
    pub members: Vec<usize>,
}

/// All conjugacy classes, ordered by representative matrix.
pub fn conjugacy_classes(group: &WeylGroup) -> Vec<ConjugacyClass> {
    let mut assigned = vec![false; group.len()];
    let mut out = Vec::new();
    for w in 0..group.len() {
        if assigned[w] {
            continue;
        }
        let members = class_members(group, w);
        for &m in &members {
            assigned[m] = true;
        }
        let rep = *members
            .iter()
            .min_by(|&&a, &&b| group.elements[a].matrix.cmp(&group.elements[b].matrix))
            .unwrap();
        out.push(ConjugacyClass {
            representative: rep,
            size: members.len(),
            order: group.order_of(rep),
            members,
        });
    }
    out.sort_by(|a, b| group.elements[a.representative].matrix.cmp(&group.elements[b.representative].matrix));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSet {
    pub degrees: Vec<u64>,
}

impl DegreeSet {
    pub fn sum_minus_one(&self) -> u64 {
        self.degrees.iter().map(|d| d - 1).sum()
    }

    pub fn product(&self) -> u128 {
        self.degrees.iter().map(|&d| d as u128).product()
    }

    pub fn sum(&self) -> u64 {
        self.degrees.iter().sum()
    }
}

/// Length generating function `Σ_w t^{ℓ(w)}`, computed level by level on the
/// orbit of a regular vector so only two length levels are held in memory.
pub fn poincare_polynomial(rs: &RootSystem, cap: usize) -> Result<Vec<u128>> {
    let n = rs.rank;
    if weyl_order_formula(rs) > cap as u128 {
        return Err(Error::CapExceeded(format!("Weyl group of {} has more than {cap} elements", rs.label())));
    }
    // Regular vector: α_i(v) = D > 0 for every simple root.
    let q = Rationals;
    let simple_rows: Vec<Vec<i64>> = (0..n).map(|i| rs.functionals[i].clone()).collect();
    let a = Matrix::from_i64(&q, &simple_rows, n);
    let ones: Vec<BigRational> = (0..n).map(|_| q.one()).collect();
    let sol = solve(&q, &a, &ones).ok_or_else(|| Error::Internal("simple roots are dependent".into()))?;
    let mut den = num_bigint::BigInt::one();
    for s in &sol {
        den = num_integer::Integer::lcm(&den, s.denom());
    }
    let v: Vec<i64> = sol
        .iter()
        .map(|s| (s * BigRational::from_integer(den.clone())).to_integer().to_i64().unwrap())
        .collect();

    let mut counts = Vec::new();
    let mut level: HashSet<Vec<i64>> = HashSet::new();
    level.insert(v);
    let mut total: usize = 0;
    while !level.is_empty() {
        total += level.len();
        if total > cap {
            return Err(Error::CapExceeded(format!(
                "Weyl group of {} has more than {cap} elements",
                rs.label()
            )));
        }
        counts.push(level.len() as u128);
        let mut next = HashSet::new();
        for u in &level {
            for k in 0..n {
                let p = dot_i(&rs.functionals[k], u);
                if p > 0 {
                    let w: Vec<i64> = u.iter().zip(&rs.coroots[k]).map(|(x, c)| x - p * c).collect();
                    next.insert(w);
                }
            }
        }
        level = next;
    }
    Ok(counts)
}

/// Invariant degrees from the factorization
/// `Σ_w t^{ℓ(w)} = ∏_i (1 + t + ⋯ + t^{d_i − 1})`.
pub fn invariant_degrees(rs: &RootSystem, cap: usize) -> Result<DegreeSet> {
    let p = poincare_polynomial(rs, cap)?;
    degrees_from_poincare(&p, rs.rank)
}

pub fn degrees_from_poincare(p: &[u128], n: usize) -> Result<DegreeSet> {
    // Q(t) = P(t)(1 − t)^n = ∏ (1 − t^{d_i}); peel factors from the bottom.
    let mut qpoly: Vec<i128> = p.iter().map(|&c| c as i128).collect();
    for _ in 0..n {
        let mut next = vec![0i128; qpoly.len() + 1];
        for (i, &c) in qpoly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        qpoly = next;
    }
    let fail = || Error::Internal("Poincaré polynomial does not factor into degrees".into());
    let mut degrees = Vec::new();
    for _ in 0..n {
        let k = (1..qpoly.len()).find(|&i| qpoly[i] != 0).ok_or_else(fail)?;
        if qpoly[k] >= 0 {
            return Err(fail());
        }
        // Divide by (1 − t^k): c_i ← c_i + c_{i−k}.
        for i in k..qpoly.len() {
            qpoly[i] += qpoly[i - k];
        }
        degrees.push(k as u64);
    }
    if qpoly[0] != 1 || qpoly[1..].iter().any(|&c| c != 0) {
        return Err(fail());
    }
    degrees.sort_unstable();
    Ok(DegreeSet { degrees })
}

/// Every implemented (type, rank) pair up to the given ranks.
pub fn shipped_types() -> Vec<(RootType, usize)> {
    let mut v = Vec::new();
    for n in 1..=7 {
        v.push((RootType::A, n));
    }
    for n in 2..=6 {
        v.push((RootType::B, n));
        v.push((RootType::C, n));
    }
    for n in 3..=6 {
        v.push((RootType::D, n));
    }
    for n in 6..=8 {
        v.push((RootType::E, n));
    }
    v.push((RootType::F, 4));
    v.push((RootType::G, 2));
    v
}
