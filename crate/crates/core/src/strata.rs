//! Valuation functions on roots, their level chains, and the decision
//! procedures for strata `(w, r)`: non-emptiness, `δ_r`, `c_w`, `e(w,r)`,
//! `d(w,r)`, codimension, and enumeration of all strata up to a bound.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactfield::{
    fmt_rational, functional_vanishes_on, kernel, rank, serde_rational, serde_rational_vec, CyclotomicField, Field,
    Matrix, Rationals, Subspace,
};
use crate::rootsys::{
    enumerate_weyl, invariant_degrees, RootSystem, WeylElement, WeylGroup, DEFAULT_WEYL_CAP,
};

/// A subset of root indices, stored as a 256-bit set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RootSet(pub [u64; 4]);

impl RootSet {
    pub fn empty() -> Self {
        RootSet([0; 4])
    }

    pub fn full(n: usize) -> Self {
        let mut s = RootSet::empty();
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(ix: impl IntoIterator<Item = usize>) -> Self {
        let mut s = RootSet::empty();
        for i in ix {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn is_subset(&self, other: &RootSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    pub fn difference(&self, other: &RootSet) -> RootSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a &= !b;
        }
        out
    }

    pub fn union(&self, other: &RootSet) -> RootSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..256).filter(move |&i| self.contains(i))
    }
}

impl fmt::Debug for RootSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for RootSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for RootSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Ok(RootSet::from_indices(v))
    }
}

/// `r : R → Q≥0`, one value per root index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValuationFunction {
    #[serde(with = "serde_rational_vec")]
    pub values: Vec<BigRational>,
}

impl ValuationFunction {
    pub fn new(values: Vec<BigRational>) -> Result<Self> {
        if values.iter().any(|v| v.is_negative()) {
            return Err(Error::Precondition("valuation functions take non-negative values".into()));
        }
        Ok(ValuationFunction { values })
    }

    pub fn constant(rs: &RootSystem, q: BigRational) -> Result<Self> {
        Self::new(vec![q; rs.num_roots()])
    }

    pub fn zero(rs: &RootSystem) -> Self {
        ValuationFunction {
            values: vec![BigRational::zero(); rs.num_roots()],
        }
    }

    /// Values given on positive roots, mirrored onto their negatives.
    pub fn from_positive(rs: &RootSystem, pos: &[BigRational]) -> Result<Self> {
        if pos.len() != rs.num_positive() {
            return Err(Error::Precondition(format!(
                "expected {} positive-root values, got {}",
                rs.num_positive(),
                pos.len()
            )));
        }
        let mut v = pos.to_vec();
        v.extend(pos.iter().cloned());
        Self::new(v)
    }

    /// Least common denominator of all values.
    pub fn lcd(&self) -> u64 {
        let mut d = BigInt::one();
        for v in &self.values {
            d = d.lcm(v.denom());
        }
        d.to_u64().expect("denominator fits in u64")
    }

    pub fn max(&self) -> BigRational {
        self.values.iter().cloned().max().unwrap_or_else(BigRational::zero)
    }

    pub fn delta(&self) -> BigRational {
        self.values.iter().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn is_symmetric(&self, rs: &RootSystem) -> bool {
        (0..self.values.len()).all(|a| self.values[a] == self.values[rs.negative_of(a)])
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.is_integer())
    }

    /// `(x r)(α) = r(x⁻¹ α)`.
    pub fn act(&self, x: &WeylElement) -> Self {
        let mut out = self.values.clone();
        for (a, v) in self.values.iter().enumerate() {
            out[x.root_perm[a] as usize] = v.clone();
        }
        ValuationFunction { values: out }
    }

    /// `r + m` for a non-negative integer shift.
    pub fn shifted(&self, m: u64) -> Self {
        let s = BigRational::from_integer(BigInt::from(m));
        ValuationFunction {
            values: self.values.iter().map(|v| v + &s).collect(),
        }
    }

    /// `l · r(α)` as integers, or `None` if some value is not in `(1/l)Z`.
    pub fn scaled_levels(&self, l: u64) -> Option<Vec<u64>> {
        let lq = BigRational::from_integer(BigInt::from(l));
        self.values
            .iter()
            .map(|v| {
                let s = v * &lq;
                if s.is_integer() {
                    s.to_integer().to_u64()
                } else {
                    None
                }
            })
            .collect()
    }

    /// `⌊l · r(α)⌋` per root.
    fn floor_levels(&self, l: u64) -> Vec<u64> {
        let lq = BigRational::from_integer(BigInt::from(l));
        self.values
            .iter()
            .map(|v| (v * &lq).floor().to_integer().to_u64().expect("level fits"))
            .collect()
    }

    pub fn display(&self) -> String {
        self.values.iter().map(fmt_rational).collect::<Vec<_>>().join(",")
    }
}

/// `R_0 ⊇ R_1 ⊇ ⋯` with `R_m = {α : r(α) ≥ m/l}`; the last set is empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelChain {
    pub l: u64,
    pub sets: Vec<RootSet>,
}

impl LevelChain {
    /// Smallest `m` with `R_m` empty.
    pub fn cutoff(&self) -> usize {
        self.sets.len() - 1
    }

    /// `R_m`, empty beyond the cutoff.
    pub fn get(&self, m: usize) -> RootSet {
        self.sets.get(m).copied().unwrap_or_default()
    }
}

pub fn level_chain(r: &ValuationFunction, l: u64) -> LevelChain {
    assert!(l >= 1, "level chains need l >= 1");
    let floors = r.floor_levels(l);
    let top = floors.iter().copied().max().unwrap_or(0) as usize;
    let sets = (0..=top + 1)
        .map(|m| RootSet::from_indices((0..floors.len()).filter(|&a| floors[a] as usize >= m)))
        .collect();
    LevelChain { l, sets }
}

fn functional_matrix<F: Field>(f: &F, rs: &RootSystem, s: &RootSet) -> Matrix<F::Elem> {
    let rows: Vec<Vec<i64>> = s.iter().map(|a| rs.functionals[a].clone()).collect();
    Matrix::from_i64(f, &rows, rs.rank)
}

/// `a(S) = {u ∈ t : α(u) = 0 for all α ∈ S}` over `Q`.
pub fn annihilated_subspace(rs: &RootSystem, s: &RootSet) -> Subspace<BigRational> {
    kernel(&Rationals, &functional_matrix(&Rationals, rs, s))
}

/// `R ∩ Q-span(S)`: the roots vanishing on `a(S)`.
pub fn q_closure(rs: &RootSystem, s: &RootSet) -> RootSet {
    let q = Rationals;
    let a = annihilated_subspace(rs, s);
    RootSet::from_indices((0..rs.num_roots()).filter(|&b| {
        let f: Vec<BigRational> = rs.functionals[b].iter().map(|&x| q.from_i64(x)).collect();
        functional_vanishes_on(&q, &f, &a)
    }))
}

pub fn is_q_closed(rs: &RootSystem, s: &RootSet) -> bool {
    q_closure(rs, s) == *s
}

/// All Q-closed subsets, grown from the empty set by adjoining one root
/// pair at a time and closing.
pub fn closed_subsets(rs: &RootSystem) -> Vec<RootSet> {
    let mut seen: HashSet<RootSet> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(RootSet::empty());
    queue.push_back(RootSet::empty());
    while let Some(c) = queue.pop_front() {
        for a in 0..rs.num_positive() {
            if c.contains(a) {
                continue;
            }
            let mut s = c;
            s.insert(a);
            s.insert(rs.negative_of(a));
            let d = q_closure(rs, &s);
            if seen.insert(d) {
                queue.push_back(d);
            }
        }
    }
    let mut v: Vec<RootSet> = seen.into_iter().collect();
    v.sort_by_key(|s| (s.len(), *s));
    v
}

/// `a_0 ⊆ a_1 ⊆ ⋯`, one subspace per set of the chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceChain {
    pub spaces: Vec<Subspace<BigRational>>,
}

pub fn subspace_chain(rs: &RootSystem, chain: &LevelChain) -> SubspaceChain {
    SubspaceChain {
        spaces: chain.sets.iter().map(|s| annihilated_subspace(rs, s)).collect(),
    }
}

/// Everything known about one pair `(w, r)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumReport {
    pub w: WeylElement,
    pub r: ValuationFunction,
    pub l: u64,
    pub condition_flags: [bool; 4],
    pub nonempty: bool,
    #[serde(with = "serde_rational")]
    pub delta_r: BigRational,
    pub c_w: u64,
    #[serde(with = "serde_rational")]
    pub e_wr: BigRational,
    pub d_wr: Option<u64>,
    pub codim: Option<u64>,
    pub stabilizer_order: u64,
    /// `dim t(w, j)` for `j = 0, …, l − 1`.
    pub eigenspace_dims: Vec<usize>,
}

/// Data about `V = t(w, j) ∩ a(S)` over `Q(ζ_l)`.
#[derive(Clone, Debug)]
struct EigenData {
    dim_eigen: usize,
    dim_cap: usize,
    /// Roots vanishing identically on `V`.
    vanishing: RootSet,
}

/// A root system with its enumerated Weyl group and memoized eigenspace
/// computations. Shared read-only between worker threads.
pub struct StrataContext {
    pub rs: RootSystem,
    pub group: WeylGroup,
    orders: Vec<u64>,
    fixed_dims: Vec<usize>,
    fields: RwLock<HashMap<u64, Arc<CyclotomicField>>>,
    eigen: RwLock<HashMap<(usize, u64, RootSet), Arc<EigenData>>>,
    closed: RwLock<HashMap<RootSet, bool>>,
}

impl StrataContext {
    pub fn new(rs: RootSystem) -> Result<Self> {
        Self::with_cap(rs, DEFAULT_WEYL_CAP)
    }

    pub fn with_cap(rs: RootSystem, cap: usize) -> Result<Self> {
        let group = enumerate_weyl(&rs, cap)?;
        let orders = (0..group.len()).map(|i| group.order_of(i) as u64).collect();
        let q = Rationals;
        let n = rs.rank;
        let fixed_dims = group
            .elements
            .iter()
            .map(|e| {
                let mut m = Matrix::from_i64(&q, &e.matrix, n);
                for i in 0..n {
                    let v = q.sub(m.get(i, i), &q.one());
                    m.set(i, i, v);
                }
                n - rank(&q, &m)
            })
            .collect();
        Ok(StrataContext {
            rs,
            group,
            orders,
            fixed_dims,
            fields: RwLock::new(HashMap::new()),
            eigen: RwLock::new(HashMap::new()),
            closed: RwLock::new(HashMap::new()),
        })
    }

    pub fn order(&self, w: usize) -> u64 {
        self.orders[w]
    }

    /// Index of a Weyl element of this root system.
    pub fn index_of(&self, w: &WeylElement) -> Result<usize> {
        self.group.find(&w.matrix).ok_or(Error::MismatchedRootSystems)
    }

    fn check_r(&self, r: &ValuationFunction) -> Result<()> {
        if r.values.len() != self.rs.num_roots() {
            return Err(Error::MismatchedRootSystems);
        }
        Ok(())
    }

    fn field(&self, l: u64) -> Arc<CyclotomicField> {
        if let Some(k) = self.fields.read().unwrap().get(&l) {
            return k.clone();
        }
        let k = Arc::new(CyclotomicField::new(l as usize));
        self.fields.write().unwrap().entry(l).or_insert(k).clone()
    }

    /// Eigenspace `t(w, j)` intersected with `a(S)`, for eigenvalue `ζ_l^{-j}`.
    fn eigen_data(&self, w: usize, j: u64, s: RootSet) -> Arc<EigenData> {
        let l = self.orders[w];
        let key = (w, j % l, s);
        if let Some(d) = self.eigen.read().unwrap().get(&key) {
            return d.clone();
        }
        let k = self.field(l);
        let n = self.rs.rank;
        let lambda = k.zeta_pow(-((j % l) as i64));
        let mut shifted = Matrix::from_i64(&*k, &self.group.elements[w].matrix, n);
        for i in 0..n {
            let v = k.sub(shifted.get(i, i), &lambda);
            shifted.set(i, i, v);
        }
        let dim_eigen = kernel(&*k, &shifted).dim();
        let cap = kernel(&*k, &shifted.vstack(&functional_matrix(&*k, &self.rs, &s)));
        let vanishing = RootSet::from_indices((0..self.rs.num_roots()).filter(|&a| {
            let f: Vec<_> = self.rs.functionals[a].iter().map(|&x| k.from_i64(x)).collect();
            functional_vanishes_on(&*k, &f, &cap)
        }));
        let data = Arc::new(EigenData {
            dim_eigen,
            dim_cap: cap.dim(),
            vanishing,
        });
        self.eigen.write().unwrap().entry(key).or_insert(data).clone()
    }

    /// `dim t(w, j)` for `j = 0..l`.
    pub fn eigenspace_dims(&self, w: usize) -> Vec<usize> {
        let l = self.orders[w];
        (0..l).map(|j| self.eigen_data(w, j, RootSet::empty()).dim_eigen).collect()
    }

    fn is_closed_cached(&self, s: &RootSet) -> bool {
        if let Some(&b) = self.closed.read().unwrap().get(s) {
            return b;
        }
        let b = is_q_closed(&self.rs, s);
        self.closed.write().unwrap().insert(*s, b);
        b
    }

    pub fn commutes(&self, x: usize, w: usize) -> bool {
        self.group.compose(x, w) == self.group.compose(w, x)
    }

    /// `|W_{w,r}| = |{x : xw = wx, xr = r}|`.
    pub fn stabilizer_order(&self, w: usize, r: &ValuationFunction) -> u64 {
        (0..self.group.len())
            .filter(|&x| self.commutes(x, w) && fixes(&self.group.elements[x], &r.values))
            .count() as u64
    }

    /// Full report for `(w, r)` with the four non-emptiness conditions.
    pub fn evaluate(&self, w: usize, r: &ValuationFunction) -> Result<StratumReport> {
        self.check_r(r)?;
        let welt = &self.group.elements[w];
        let l = self.orders[w];

        let levels = r.scaled_levels(l);
        let c1 = levels.is_some();

        let mut distinct: Vec<&BigRational> = r.values.iter().collect();
        distinct.sort();
        distinct.dedup();
        let c2 = distinct.iter().all(|&v| {
            let s = RootSet::from_indices((0..r.values.len()).filter(|&a| &r.values[a] >= v));
            self.is_closed_cached(&s)
        });

        let c3 = fixes(welt, &r.values);

        let chain = level_chain(r, l);
        let mut c4 = c1 && c2 && c3;
        if c4 {
            for j in 0..chain.cutoff() {
                let rj = chain.get(j);
                let rj1 = chain.get(j + 1);
                let diff = rj.difference(&rj1);
                if diff.is_empty() {
                    continue;
                }
                let data = self.eigen_data(w, j as u64, rj1);
                if diff.iter().any(|a| data.vanishing.contains(a)) {
                    c4 = false;
                    break;
                }
            }
        }
        let nonempty = c1 && c2 && c3 && c4;

        let (delta_r, c_w, e_wr) = self.delta_c_e(w, r);
        let (d_wr, codim) = if nonempty {
            if !delta_r.is_integer() || !e_wr.is_integer() || e_wr.is_negative() {
                return Err(Error::Internal(format!(
                    "non-integral invariants δ={} e={} on a non-empty stratum",
                    fmt_rational(&delta_r),
                    fmt_rational(&e_wr)
                )));
            }
            let d = self.d_from_chain(w, &chain);
            let e = e_wr.to_integer().to_u64().unwrap();
            (Some(d), Some(d + e))
        } else {
            (None, None)
        };

        Ok(StratumReport {
            w: welt.clone(),
            r: r.clone(),
            l,
            condition_flags: [c1, c2, c3, c4],
            nonempty,
            delta_r,
            c_w,
            e_wr,
            d_wr,
            codim,
            stabilizer_order: self.stabilizer_order(w, r),
            eigenspace_dims: self.eigenspace_dims(w),
        })
    }

    fn d_from_chain(&self, w: usize, chain: &LevelChain) -> u64 {
        (0..chain.cutoff())
            .map(|j| {
                let data = self.eigen_data(w, j as u64, chain.get(j + 1));
                (data.dim_eigen - data.dim_cap) as u64
            })
            .sum()
    }

    /// `(δ_r, c_w, (δ_r + c_w)/2)`.
    pub fn delta_c_e(&self, w: usize, r: &ValuationFunction) -> (BigRational, u64, BigRational) {
        let delta = r.delta();
        let c = (self.rs.rank - self.fixed_dims[w]) as u64;
        let e = (&delta + BigRational::from_integer(BigInt::from(c))) / BigRational::from_integer(BigInt::from(2));
        (delta, c, e)
    }

    pub fn is_nonempty(&self, w: &WeylElement, r: &ValuationFunction) -> Result<StratumReport> {
        self.evaluate(self.index_of(w)?, r)
    }

    pub fn codim_stratum(&self, w: &WeylElement, r: &ValuationFunction) -> Result<StratumReport> {
        self.evaluate(self.index_of(w)?, r)
    }

    /// `d(w, r)`; fails on an empty stratum.
    pub fn d_wr(&self, w: &WeylElement, r: &ValuationFunction) -> Result<u64> {
        let rep = self.is_nonempty(w, r)?;
        rep.d_wr
            .ok_or_else(|| Error::EmptyStratum(format!("w = {}, r = [{}]", w.word_string(), r.display())))
    }

    /// `codim(r + m) = codim(r) + m Σ d_i` for `w = 1`.
    pub fn scaling_shift_check(&self, w: &WeylElement, r: &ValuationFunction, m: u64) -> Result<bool> {
        if !w.is_identity() {
            return Err(Error::Precondition("the shift identity is stated for w = 1".into()));
        }
        let base = self.is_nonempty(w, r)?;
        let shifted = self.is_nonempty(w, &r.shifted(m))?;
        let (Some(c0), Some(c1)) = (base.codim, shifted.codim) else {
            return Err(Error::Precondition("both strata must be non-empty".into()));
        };
        let degrees = invariant_degrees(&self.rs, DEFAULT_WEYL_CAP)?;
        Ok(c1 == c0 + m * degrees.sum())
    }

    /// `w^m = 1` with `m` the least common denominator of `r`.
    pub fn order_divisibility_check(&self, w: &WeylElement, r: &ValuationFunction) -> Result<bool> {
        let wi = self.index_of(w)?;
        let m = r.lcd() as usize;
        Ok(self.group.power(wi, m) == 0)
    }

    /// Some `t(w, j)` with `gcd(j, l) = 1` contains a vector on which no root
    /// vanishes.
    pub fn is_regular_index(&self, w: usize) -> bool {
        let l = self.orders[w];
        (0..l).filter(|&j| j.gcd(&l) == 1).any(|j| {
            let data = self.eigen_data(w, j, RootSet::empty());
            data.dim_eigen > 0 && data.vanishing.is_empty()
        })
    }

    pub fn is_regular_element(&self, w: &WeylElement) -> Result<bool> {
        Ok(self.is_regular_index(self.index_of(w)?))
    }

    /// Equivalued stratum `r ≡ a/b` is non-empty for `w` iff `w` is regular of
    /// order exactly `b`.
    pub fn equivalued_nonempty(&self, w: &WeylElement, value: &BigRational) -> Result<bool> {
        let wi = self.index_of(w)?;
        if value.is_negative() {
            return Err(Error::Precondition("equivalued value must be non-negative".into()));
        }
        let b = value.denom().to_u64().unwrap();
        Ok(self.orders[wi] == b && self.is_regular_index(wi))
    }

    /// One canonical representative per `W`-orbit of non-empty strata with
    /// `δ_r ≤ max_delta` and value denominators `≤ max_denominator`.
    pub fn enumerate_strata(&self, max_delta: u64, max_denominator: u64, cap: usize) -> Result<Vec<StratumReport>> {
        if max_denominator == 0 {
            return Err(Error::Precondition("max_denominator must be positive".into()));
        }
        let rs = &self.rs;
        let nr = rs.num_roots();
        let big_l: u64 = (1..=max_denominator).fold(1, |a, b| a.lcm(&b));
        let allowed: Vec<u64> = (1..=max_delta * big_l)
            .filter(|&k| big_l / k.gcd(&big_l) <= max_denominator)
            .collect();
        let closed: Vec<RootSet> = closed_subsets(rs).into_iter().filter(|s| !s.is_empty()).collect();

        // Candidate numerator vectors (values times big_l) from chains of
        // closed subsets with increasing jump values.
        let mut candidates: Vec<Vec<u64>> = vec![vec![0; nr]];
        let mut levels = vec![0u64; nr];
        let full = RootSet::full(nr);
        let mut stack_err = None;
        chain_candidates(
            &closed,
            &allowed,
            full,
            true,
            0,
            max_delta * big_l,
            &mut levels,
            &mut candidates,
            cap,
            &mut stack_err,
        );
        if let Some(e) = stack_err {
            return Err(e);
        }

        let element_orders: HashSet<u64> = self.orders.iter().copied().collect();
        let group = &self.group;
        let results: Vec<Result<Vec<StratumReport>>> = candidates
            .par_iter()
            .filter(|cand| {
                let g = cand.iter().fold(0u64, |a, &b| a.gcd(&b));
                let lcd = big_l / g.gcd(&big_l);
                element_orders.iter().any(|&o| o % lcd == 0)
            })
            .filter(|cand| is_orbit_minimum(group, cand))
            .map(|cand| self.strata_for_candidate(cand, big_l))
            .collect();
        let mut out = Vec::new();
        for r in results {
            out.extend(r?);
        }
        out.sort_by(|a, b| report_sort_key(a).cmp(&report_sort_key(b)));
        Ok(out)
    }

    fn strata_for_candidate(&self, cand: &[u64], big_l: u64) -> Result<Vec<StratumReport>> {
        let group = &self.group;
        let bl = BigInt::from(big_l);
        let r = ValuationFunction {
            values: cand.iter().map(|&k| BigRational::new(BigInt::from(k), bl.clone())).collect(),
        };
        let lcd = r.lcd();
        let mut good = Vec::new();
        for w in 0..group.len() {
            if self.orders[w] % lcd != 0 || !fixes(&group.elements[w], cand) {
                continue;
            }
            let rep = self.evaluate(w, &r)?;
            if rep.nonempty {
                good.push(w);
            }
        }
        if good.is_empty() {
            return Ok(Vec::new());
        }
        let stab: Vec<usize> = (0..group.len()).filter(|&x| fixes(&group.elements[x], cand)).collect();
        let mut seen: HashSet<usize> = HashSet::new();
        let mut out = Vec::new();
        for &w in &good {
            if seen.contains(&w) {
                continue;
            }
            for &x in &stab {
                seen.insert(group.conjugate(x, w));
            }
            let (cw, cr) = self.canonical_pair(w, cand);
            let rc = ValuationFunction {
                values: cr.iter().map(|&k| BigRational::new(BigInt::from(k), bl.clone())).collect(),
            };
            out.push(self.evaluate(cw, &rc)?);
        }
        Ok(out)
    }

    /// Least `(matrix of x w x⁻¹, x r)` over `x ∈ W`.
    fn canonical_pair(&self, w: usize, r: &[u64]) -> (usize, Vec<u64>) {
        let group = &self.group;
        let mut best: Option<(usize, Vec<u64>)> = None;
        for x in 0..group.len() {
            let cw = group.conjugate(x, w);
            let xr = act_vec(&group.elements[x], r);
            let better = match &best {
                None => true,
                Some((bw, br)) => {
                    let o = group.elements[cw].matrix.cmp(&group.elements[*bw].matrix);
                    o.is_lt() || (o.is_eq() && xr < *br)
                }
            };
            if better {
                best = Some((cw, xr));
            }
        }
        best.expect("W is non-empty")
    }

    /// Canonical `W`-orbit representative of an arbitrary pair.
    pub fn canonicalize(&self, w: &WeylElement, r: &ValuationFunction) -> Result<(WeylElement, ValuationFunction)> {
        let wi = self.index_of(w)?;
        self.check_r(r)?;
        let mut best: Option<(usize, ValuationFunction)> = None;
        for x in 0..self.group.len() {
            let cw = self.group.conjugate(x, wi);
            let xr = r.act(&self.group.elements[x]);
            let better = match &best {
                None => true,
                Some((bw, br)) => {
                    let o = self.group.elements[cw].matrix.cmp(&self.group.elements[*bw].matrix);
                    o.is_lt() || (o.is_eq() && xr.values < br.values)
                }
            };
            if better {
                best = Some((cw, xr));
            }
        }
        let (cw, cr) = best.unwrap();
        Ok((self.group.elements[cw].clone(), cr))
    }
}

fn report_sort_key(r: &StratumReport) -> (BigRational, Option<u64>, u64, Vec<BigRational>, Vec<Vec<i64>>) {
    (r.delta_r.clone(), r.codim, r.l, r.r.values.clone(), r.w.matrix.clone())
}

fn act_vec<T: Clone>(x: &WeylElement, v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    for (a, val) in v.iter().enumerate() {
        out[x.root_perm[a] as usize] = val.clone();
    }
    out
}

fn fixes<T: PartialEq>(x: &WeylElement, v: &[T]) -> bool {
    v.iter().enumerate().all(|(a, val)| v[x.root_perm[a] as usize] == *val)
}

/// True iff `v` is lexicographically least among its `W`-translates.
fn is_orbit_minimum(group: &WeylGroup, v: &[u64]) -> bool {
    let mut buf = vec![0u64; v.len()];
    for x in &group.elements {
        for (a, &val) in v.iter().enumerate() {
            buf[x.root_perm[a] as usize] = val;
        }
        if buf.as_slice() < v {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn chain_candidates(
    closed: &[RootSet],
    allowed: &[u64],
    prev: RootSet,
    first: bool,
    prev_v: u64,
    budget: u64,
    levels: &mut Vec<u64>,
    out: &mut Vec<Vec<u64>>,
    cap: usize,
    err: &mut Option<Error>,
) {
    for t in closed {
        if err.is_some() {
            return;
        }
        if !t.is_subset(&prev) || (!first && *t == prev) {
            continue;
        }
        let size = t.len() as u64;
        for &v in allowed.iter().filter(|&&v| v > prev_v) {
            let cost = (v - prev_v) * size;
            if cost > budget {
                break;
            }
            for a in t.iter() {
                levels[a] = v;
            }
            if out.len() >= cap {
                *err = Some(Error::CapExceeded(format!("more than {cap} candidate valuation functions")));
                return;
            }
            out.push(levels.clone());
            chain_candidates(closed, allowed, *t, false, v, budget - cost, levels, out, cap, err);
            for a in t.iter() {
                levels[a] = prev_v;
            }
        }
    }
}

/// Valuation functions in the enumeration that admit more than one
/// `W_r`-conjugacy class of `w`. The question whether `w` is determined by
/// `r` is open; this only reports what the enumeration finds.
pub fn multiple_w_for_r(reports: &[StratumReport]) -> Vec<(ValuationFunction, usize)> {
    let mut by_r: HashMap<&ValuationFunction, usize> = HashMap::new();
    for rep in reports {
        *by_r.entry(&rep.r).or_default() += 1;
    }
    let mut v: Vec<(ValuationFunction, usize)> =
        by_r.into_iter().filter(|(_, c)| *c > 1).map(|(r, c)| (r.clone(), c)).collect();
    v.sort_by(|a, b| a.0.values.cmp(&b.0.values));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::rat;
    use crate::rootsys::{build_root_system, coxeter_element, element_from_word, RootType};

    fn ctx(t: RootType, n: usize) -> StrataContext {
        StrataContext::new(build_root_system(t, n).unwrap()).unwrap()
    }

    fn konst(c: &StrataContext, n: i64, d: i64) -> ValuationFunction {
        ValuationFunction::constant(&c.rs, rat(n, d)).unwrap()
    }

    #[test]
    fn level_chains() {
        let c = ctx(RootType::A, 1);
        let z = level_chain(&ValuationFunction::zero(&c.rs), 1);
        assert_eq!(z.sets, vec![RootSet::full(2), RootSet::empty()]);
        let ch = level_chain(&konst(&c, 3, 2), 2);
        assert_eq!(ch.cutoff(), 4);
        for m in 0..4 {
            assert_eq!(ch.get(m), RootSet::full(2));
        }
        assert!(ch.get(4).is_empty());

        let c2 = ctx(RootType::A, 2);
        let r = ValuationFunction::from_positive(&c2.rs, &[rat(1, 1), rat(0, 1), rat(0, 1)]).unwrap();
        let ch = level_chain(&r, 1);
        assert_eq!(ch.get(1), RootSet::from_indices([0, 3]));
        assert!(ch.get(2).is_empty());
    }

    #[test]
    fn q_closedness_a2() {
        let c = ctx(RootType::A, 2);
        assert!(is_q_closed(&c.rs, &RootSet::empty()));
        assert!(is_q_closed(&c.rs, &RootSet::full(6)));
        // Roots 0, 1 are the simple roots; 2 is their sum.
        let s = RootSet::from_indices([0, 1, 3, 4]);
        assert!(!is_q_closed(&c.rs, &s));
        assert_eq!(q_closure(&c.rs, &s), RootSet::full(6));
        assert_eq!(closed_subsets(&c.rs).len(), 5);
    }

    #[test]
    fn subspace_chain_dims() {
        let c = ctx(RootType::A, 2);
        assert_eq!(annihilated_subspace(&c.rs, &RootSet::full(6)).dim(), 0);
        assert_eq!(annihilated_subspace(&c.rs, &RootSet::empty()).dim(), 2);
        let a = annihilated_subspace(&c.rs, &RootSet::from_indices([0, 3]));
        assert_eq!(a.dim(), 1);
        // In ambient coordinates the line is spanned by (1, 1, -2).
        let v: Vec<i64> = a.basis.row(0).iter().map(|x| x.to_integer().to_i64().unwrap()).collect();
        let amb = c.rs.to_ambient(&v);
        assert_eq!(amb[0], amb[1]);
        assert_eq!(amb[2], -2 * amb[0]);
    }

    #[test]
    fn sl2_nonempty_examples() {
        let c = ctx(RootType::A, 1);
        let id = &c.group.elements[0];
        let s = &c.group.elements[1];
        assert!(c.is_nonempty(id, &konst(&c, 3, 1)).unwrap().nonempty);
        assert!(c.is_nonempty(s, &konst(&c, 3, 2)).unwrap().nonempty);
        let rep = c.is_nonempty(s, &konst(&c, 1, 1)).unwrap();
        assert!(!rep.nonempty);
        assert_eq!(rep.condition_flags, [true, true, true, false]);
        let rep = c.is_nonempty(id, &konst(&c, 1, 2)).unwrap();
        assert!(!rep.condition_flags[0]);
    }

    #[test]
    fn coxeter_a2_equivalued() {
        let c = ctx(RootType::A, 2);
        let cox = coxeter_element(&c.rs);
        let rep = c.is_nonempty(&cox, &konst(&c, 1, 3)).unwrap();
        assert!(rep.nonempty);
        assert!(c.is_regular_element(&cox).unwrap());
        assert!(c.order_divisibility_check(&cox, &konst(&c, 1, 3)).unwrap());
        assert!(c.equivalued_nonempty(&cox, &rat(1, 3)).unwrap());
        assert!(!c.equivalued_nonempty(&cox, &rat(1, 2)).unwrap());
    }

    #[test]
    fn delta_c_e_examples() {
        let c = ctx(RootType::A, 1);
        for k in 0..5 {
            let (d, cw, e) = c.delta_c_e(0, &konst(&c, k, 1));
            assert_eq!((d, cw, e), (rat(2 * k, 1), 0, rat(k, 1)));
        }
        for m in [1, 3, 5, 7] {
            let (d, cw, e) = c.delta_c_e(1, &konst(&c, m, 2));
            assert_eq!((d, cw, e), (rat(m, 1), 1, rat(m + 1, 2)));
        }
        let (d, cw, e) = c.delta_c_e(1, &ValuationFunction::zero(&c.rs));
        assert_eq!((d, cw, e), (rat(0, 1), 1, rat(1, 2)));
        assert!(!c.evaluate(1, &ValuationFunction::zero(&c.rs)).unwrap().nonempty);
    }

    #[test]
    fn d_wr_examples() {
        let c = ctx(RootType::A, 1);
        for k in 0..6 {
            assert_eq!(c.d_wr(&c.group.elements[0], &konst(&c, k, 1)).unwrap(), k as u64);
        }
        for m in [1i64, 3, 5, 7] {
            assert_eq!(c.d_wr(&c.group.elements[1], &konst(&c, m, 2)).unwrap(), ((m - 1) / 2) as u64);
        }
        assert!(matches!(
            c.d_wr(&c.group.elements[1], &konst(&c, 1, 1)),
            Err(Error::EmptyStratum(_))
        ));
        let c2 = ctx(RootType::A, 2);
        assert_eq!(c2.d_wr(&c2.group.elements[0], &konst(&c2, 1, 1)).unwrap(), 2);
    }

    #[test]
    fn d_wr_identity_formula() {
        // For w = 1 the sum collapses to Σ_j j · dim(a_{j+1}/a_j).
        let c = ctx(RootType::B, 2);
        for pos in [[2, 1, 1, 0], [3, 1, 2, 0], [1, 1, 1, 1], [0, 0, 0, 2]] {
            let vals: Vec<BigRational> = pos.iter().map(|&v| rat(v, 1)).collect();
            let r = ValuationFunction::from_positive(&c.rs, &vals).unwrap();
            let rep = c.evaluate(0, &r).unwrap();
            let chain = level_chain(&r, 1);
            let sc = subspace_chain(&c.rs, &chain);
            let mut expect = 0;
            for j in 0..chain.cutoff() {
                expect += j * (sc.spaces[j + 1].dim() - sc.spaces[j].dim());
            }
            if rep.nonempty {
                assert_eq!(rep.d_wr, Some(expect as u64), "{pos:?}");
            }
        }
    }

    #[test]
    fn codim_examples() {
        let c = ctx(RootType::A, 1);
        let rep = c.codim_stratum(&c.group.elements[1], &konst(&c, 5, 2)).unwrap();
        assert_eq!(rep.codim, Some(5));
        let rep = c.codim_stratum(&c.group.elements[0], &ValuationFunction::zero(&c.rs)).unwrap();
        assert_eq!(rep.codim, Some(0));
        let c2 = ctx(RootType::A, 2);
        let rep = c2.codim_stratum(&c2.group.elements[0], &konst(&c2, 1, 1)).unwrap();
        assert_eq!((rep.d_wr, rep.e_wr.clone(), rep.codim), (Some(2), rat(3, 1), Some(5)));
    }

    #[test]
    fn scaling_shift_examples() {
        let c = ctx(RootType::A, 1);
        let z = ValuationFunction::zero(&c.rs);
        assert!(c.scaling_shift_check(&c.group.elements[0], &z, 1).unwrap());
        assert!(c.scaling_shift_check(&c.group.elements[0], &z, 0).unwrap());
        let c2 = ctx(RootType::A, 2);
        let z2 = ValuationFunction::zero(&c2.rs);
        assert!(c2.scaling_shift_check(&c2.group.elements[0], &z2, 2).unwrap());
        assert_eq!(c2.codim_stratum(&c2.group.elements[0], &z2.shifted(2)).unwrap().codim, Some(10));
        assert!(matches!(
            c2.scaling_shift_check(&coxeter_element(&c2.rs), &konst(&c2, 1, 3), 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn asymmetric_r_fails_closedness() {
        let c = ctx(RootType::A, 1);
        let r = ValuationFunction::new(vec![rat(1, 1), rat(0, 1)]).unwrap();
        assert!(!r.is_symmetric(&c.rs));
        let rep = c.evaluate(0, &r).unwrap();
        assert!(!rep.condition_flags[1]);
        assert!(!rep.nonempty);
    }

    #[test]
    fn mismatched_systems() {
        let c = ctx(RootType::A, 1);
        let other = build_root_system(RootType::A, 2).unwrap();
        let w = element_from_word(&other, &[1]).unwrap();
        assert!(matches!(
            c.is_nonempty(&w, &ValuationFunction::zero(&c.rs)),
            Err(Error::MismatchedRootSystems)
        ));
    }

    #[test]
    fn enumerate_sl2() {
        let c = ctx(RootType::A, 1);
        let reps = c.enumerate_strata(4, 2, 1_000_000).unwrap();
        let codims: Vec<u64> = reps.iter().map(|r| r.codim.unwrap()).collect();
        assert_eq!(codims, vec![0, 1, 2, 3, 4]);
        for (m, rep) in reps.iter().enumerate() {
            assert_eq!(rep.r, konst(&c, m as i64, 2));
            assert_eq!(rep.w.is_identity(), m % 2 == 0);
        }
    }

    #[test]
    fn enumerate_a2_small() {
        let c = ctx(RootType::A, 2);
        let reps = c.enumerate_strata(0, 1, 1_000_000).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].codim, Some(0));
        let reps = c.enumerate_strata(2, 3, 1_000_000).unwrap();
        let third: Vec<_> = reps.iter().filter(|r| r.r == konst(&c, 1, 3)).collect();
        assert_eq!(third.len(), 1);
        assert_eq!(third[0].l, 3);
    }

    #[test]
    fn canonical_pairs_are_orbit_invariant() {
        let c = ctx(RootType::B, 2);
        let reps = c.enumerate_strata(4, 4, 1_000_000).unwrap();
        for rep in &reps {
            let wi = c.index_of(&rep.w).unwrap();
            for (xi, x) in c.group.elements.iter().enumerate() {
                let xw = c.group.conjugate(xi, wi);
                let xr = rep.r.act(x);
                let (cw, cr) = c.canonicalize(&c.group.elements[xw], &xr).unwrap();
                assert_eq!((cw, cr), (rep.w.clone(), rep.r.clone()));
            }
        }
    }
}
