//! Brute-force oracle harness over finite fields: exhaustive jet censuses,
//! closure counts, partition and fiber-size checks, sampled Jacobian and
//! freeness checks, separation certificates and Hensel trials.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactfield::fmt_rational;
use crate::jets::{
    hensel_solve, lattice_jet_from_index, s_mul, InvariantMap, JetField, JetPoint, LatticeJet, SeriesMap, TwistedJets,
};
use crate::rootsys::{build_root_system, RootType, WeylElement, DEFAULT_WEYL_CAP, SCHEMA_VERSION};
use crate::strata::{StrataContext, StratumReport, ValuationFunction};

/// Default limit on the number of jets enumerated by one census.
pub const DEFAULT_JET_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Partition,
    FiberSize,
    ClosureCount,
    Jacobian,
    Freeness,
    Separation,
    Hensel,
}

impl std::fmt::Display for CheckKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CheckKind::Partition => "partition",
            CheckKind::FiberSize => "fiber_size",
            CheckKind::ClosureCount => "closure_count",
            CheckKind::Jacobian => "jacobian",
            CheckKind::Freeness => "freeness",
            CheckKind::Separation => "separation",
            CheckKind::Hensel => "hensel",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "partition" => CheckKind::Partition,
            "fiber_size" | "fiber" => CheckKind::FiberSize,
            "closure_count" | "closure" => CheckKind::ClosureCount,
            "jacobian" => CheckKind::Jacobian,
            "freeness" => CheckKind::Freeness,
            "separation" => CheckKind::Separation,
            "hensel" => CheckKind::Hensel,
            other => return Err(Error::Parse(format!("unknown check '{other}'"))),
        })
    }
}

/// Result of one check on one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: CheckKind,
    pub instance: String,
    pub passed: bool,
    /// Reason the instance was not run; skipped outcomes count as passed.
    pub skipped: Option<String>,
    pub counted: BTreeMap<String, String>,
    pub expected: BTreeMap<String, String>,
    pub witness: Option<JetPoint>,
    pub note: Option<String>,
}

impl CheckOutcome {
    fn new(check: CheckKind, instance: impl Into<String>) -> Self {
        CheckOutcome {
            check,
            instance: instance.into(),
            passed: true,
            skipped: None,
            counted: BTreeMap::new(),
            expected: BTreeMap::new(),
            witness: None,
            note: None,
        }
    }

    fn skip(check: CheckKind, instance: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut o = Self::new(check, instance);
        o.skipped = Some(reason.into());
        o
    }

    fn count(&mut self, key: &str, v: impl ToString) {
        self.counted.insert(key.into(), v.to_string());
    }

    fn expect(&mut self, key: &str, v: impl ToString) {
        self.expected.insert(key.into(), v.to_string());
    }

    fn fail(&mut self, witness: Option<JetPoint>, note: impl Into<String>) {
        self.passed = false;
        if self.witness.is_none() {
            self.witness = witness;
        }
        if self.note.is_none() {
            self.note = Some(note.into());
        }
    }
}

fn instance_label(w: &WeylElement, r: &ValuationFunction) -> String {
    format!("w = {}, r = [{}]", w.word_string(), r.display())
}

fn max_r_below(r: &ValuationFunction, n: usize) -> bool {
    r.max() < BigRational::from_integer(BigInt::from(n as u64))
}

fn e_integer(report: &StratumReport) -> Result<usize> {
    if !report.e_wr.is_integer() {
        return Err(Error::Internal(format!("e = {} is not integral", fmt_rational(&report.e_wr))));
    }
    Ok(report.e_wr.to_integer().to_usize().unwrap())
}

/// Jet field for `w` at prime `p`, or the reason it does not exist.
pub fn field_for(ctx: &StrataContext, w: usize, p: u64) -> Result<JetField> {
    JetField::new(p, ctx.order(w), ctx.group.len() as u64)
}

// ---------------------------------------------------------------------------
// Census

#[derive(Clone, Debug)]
struct CensusEntry {
    valuations: Vec<u16>,
    image: Vec<u64>,
}

/// Every jet of `t_w(O/ε^N O)` over `F_p`, with its root valuations (in
/// units of `ε_E`, `N l` meaning "zero at this truncation") and its image.
pub struct JetCensus {
    pub w: usize,
    pub truncation: usize,
    pub jets: TwistedJets,
    entries: Vec<CensusEntry>,
}

impl JetCensus {
    pub fn build(ctx: &StrataContext, w: usize, n_trunc: usize, field: JetField, cap: usize) -> Result<Self> {
        let tj = TwistedJets::new(&ctx.rs, &ctx.group.elements[w].matrix, ctx.order(w), field)?;
        let n = ctx.rs.rank;
        let p = field.p;
        let slots = (n * n_trunc) as u32;
        let total = (p as u128).checked_pow(slots).unwrap_or(u128::MAX);
        if total > cap as u128 {
            return Err(Error::CapExceeded(format!("census of {p}^{slots} jets exceeds the cap {cap}")));
        }
        let top = (n_trunc as u64 * field.l) as u16;
        let entries = (0..total as u64)
            .into_par_iter()
            .map(|i| {
                let x = lattice_jet_from_index(n, p, n_trunc, i);
                let u = tj.from_lattice(&x, n_trunc);
                let valuations = tj
                    .root_valuations(&u)
                    .into_iter()
                    .map(|v| v.map_or(top, |v| v as u16))
                    .collect();
                Ok(CensusEntry {
                    valuations,
                    image: if tj.invariants.is_some() { tj.image_key(&u)? } else { Vec::new() },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(JetCensus {
            w,
            truncation: n_trunc,
            jets: tj,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn jet(&self, i: usize) -> JetPoint {
        let x = lattice_jet_from_index(self.jets.rank, self.jets.p(), self.truncation, i as u64);
        self.jets.from_lattice(&x, self.truncation)
    }

    /// Indices of the jets lying in the stratum `r`.
    pub fn stratum_indices(&self, r: &ValuationFunction) -> Vec<usize> {
        let Some(levels) = r.scaled_levels(self.jets.l()) else {
            return Vec::new();
        };
        (0..self.entries.len())
            .filter(|&i| self.entries[i].valuations.iter().zip(&levels).all(|(&v, &lv)| v as u64 == lv))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Exhaustive checks

const NO_INVARIANTS: &str = "basic invariants are only available for classical types";

/// `#{u : val α(u) ≥ r(α) ∀α} = q^{nN − d(w, r)}`.
pub fn check_closure_count(ctx: &StrataContext, census: &JetCensus, r: &ValuationFunction) -> Result<CheckOutcome> {
    let w = &ctx.group.elements[census.w];
    let n_trunc = census.truncation;
    if !max_r_below(r, n_trunc) {
        return Err(Error::Truncation(format!("closure count needs r(α) < N = {n_trunc}")));
    }
    let report = ctx.evaluate(census.w, r)?;
    let d = report
        .d_wr
        .ok_or_else(|| Error::EmptyStratum(instance_label(w, r)))?;
    let l = census.jets.l();
    let lq = BigRational::from_integer(BigInt::from(l));
    let ceil_levels: Vec<u16> = r
        .values
        .iter()
        .map(|v| (v * &lq).ceil().to_integer().to_u16().unwrap())
        .collect();
    let hits: Vec<usize> = (0..census.len())
        .filter(|&i| census.entries[i].valuations.iter().zip(&ceil_levels).all(|(v, lv)| v >= lv))
        .collect();
    let q = census.jets.p();
    let exponent = ctx.rs.rank * n_trunc - d as usize;
    let expected = (q as u128).pow(exponent as u32);
    let mut out = CheckOutcome::new(
        CheckKind::ClosureCount,
        format!("{}, N = {n_trunc}, q = {q}", instance_label(w, r)),
    );
    out.count("points", hits.len());
    out.expect("points", expected);
    out.expect("d", d);
    if hits.len() as u128 != expected {
        let witness = hits.first().map(|&i| census.jet(i));
        out.fail(witness, "closure count differs from q^(nN - d)");
    }
    Ok(out)
}

/// Every image point hit by the stratum has exactly `|W_{w,r}| q^e`
/// preimages in the stratum.
pub fn check_fiber_sizes(ctx: &StrataContext, census: &JetCensus, r: &ValuationFunction) -> Result<CheckOutcome> {
    let w = &ctx.group.elements[census.w];
    let n_trunc = census.truncation;
    let report = ctx.evaluate(census.w, r)?;
    if !report.nonempty {
        return Err(Error::EmptyStratum(instance_label(w, r)));
    }
    let e = e_integer(&report)?;
    if n_trunc <= 2 * e {
        return Err(Error::Precondition(format!("fiber sizes need N > 2e, got N = {n_trunc}, e = {e}")));
    }
    if !max_r_below(r, n_trunc - e) {
        return Err(Error::Precondition(format!("fiber sizes need r(α) < N − e = {}", n_trunc - e)));
    }
    if census.jets.invariants.is_none() {
        return Err(Error::Precondition(NO_INVARIANTS.into()));
    }
    let q = census.jets.p();
    let stab = report.stabilizer_order;
    let expected = stab as u128 * (q as u128).pow(e as u32);
    let members = census.stratum_indices(r);
    let mut fibers: BTreeMap<&[u64], Vec<usize>> = BTreeMap::new();
    for &i in &members {
        fibers.entry(census.entries[i].image.as_slice()).or_default().push(i);
    }
    let mut out = CheckOutcome::new(
        CheckKind::FiberSize,
        format!("{}, N = {n_trunc}, q = {q}", instance_label(w, r)),
    );
    out.count("stratum_points", members.len());
    out.count("image_points", fibers.len());
    out.expect("fiber_size", expected);
    out.expect("stabilizer_order", stab);
    out.expect("e", e);
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for idx in fibers.values() {
        *sizes.entry(idx.len()).or_default() += 1;
        if idx.len() as u128 != expected {
            out.fail(Some(census.jet(idx[0])), format!("a fiber has {} points", idx.len()));
        }
    }
    out.count(
        "fiber_sizes",
        sizes.iter().map(|(s, c)| format!("{s}x{c}")).collect::<Vec<_>>().join(" "),
    );
    out.note.get_or_insert_with(|| {
        "fibers counted over image points with a rational preimage in the stratum"
            .into()
    });
    Ok(out)
}

/// Images of distinct orbit strata are pairwise disjoint. `strata` pairs
/// each report with the census of its `w`.
pub fn check_partition(strata: &[(&StratumReport, &JetCensus)], label: &str) -> CheckOutcome {
    let mut out = CheckOutcome::new(CheckKind::Partition, label);
    let mut owner: HashMap<&[u64], usize> = HashMap::new();
    let mut images = Vec::new();
    for (k, (rep, census)) in strata.iter().enumerate() {
        let members = census.stratum_indices(&rep.r);
        let mut mine: HashMap<&[u64], usize> = HashMap::new();
        for &i in &members {
            mine.entry(census.entries[i].image.as_slice()).or_insert(i);
        }
        images.push(mine.len());
        for (img, &i) in &mine {
            if let Some(&other) = owner.get(img) {
                out.fail(
                    Some(census.jet(i)),
                    format!(
                        "stratum {} meets stratum {}",
                        instance_label(&rep.w, &rep.r),
                        instance_label(&strata[other].0.w, &strata[other].0.r)
                    ),
                );
            } else {
                owner.insert(img, k);
            }
        }
    }
    out.count("strata", strata.len());
    out.count("image_points", owner.len());
    out.count(
        "image_points_per_stratum",
        images.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
    );
    out.expect("image_points", images.iter().sum::<usize>());
    out
}

// ---------------------------------------------------------------------------
// Sampled checks

fn sample_from(choices: &[Vec<Vec<u64>>], rng: &mut ChaCha8Rng) -> Option<Vec<Vec<u64>>> {
    choices
        .iter()
        .map(|c| (!c.is_empty()).then(|| c[rng.gen_range(0..c.len())].clone()))
        .collect()
}

/// Samples stratum jets; `None` if the stratum has no `F_p`-points.
pub fn sample_stratum_jets(
    tj: &TwistedJets,
    r: &ValuationFunction,
    n_trunc: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<JetPoint>> {
    if r.scaled_levels(tj.l()).is_none() {
        return None;
    }
    let choices = tj.coefficient_choices(r, n_trunc, true);
    (0..samples)
        .map(|_| {
            sample_from(&choices, rng).map(|u| JetPoint {
                truncation: n_trunc,
                l: tj.l(),
                u,
            })
        })
        .collect()
}

/// Jacobian valuation equals `e(w, r)` and no non-identity element of the
/// centralizer fixes the jet, on seeded samples.
pub fn check_jacobian_and_freeness(
    ctx: &StrataContext,
    w: usize,
    r: &ValuationFunction,
    n_trunc: usize,
    field: JetField,
    samples: usize,
    seed: u64,
) -> Result<(CheckOutcome, CheckOutcome)> {
    let welt = &ctx.group.elements[w];
    let report = ctx.evaluate(w, r)?;
    if !report.nonempty {
        return Err(Error::EmptyStratum(instance_label(welt, r)));
    }
    if !max_r_below(r, n_trunc) || report.e_wr >= BigRational::from_integer(BigInt::from(n_trunc as u64)) {
        return Err(Error::Precondition(format!("sampling needs r(α) < N and e < N, got N = {n_trunc}")));
    }
    let tj = TwistedJets::new(&ctx.rs, &welt.matrix, ctx.order(w), field)?;
    let label = format!("{}, N = {n_trunc}, q = {}", instance_label(welt, r), field.p);
    let mut jac = CheckOutcome::new(CheckKind::Jacobian, label.clone());
    let mut free = CheckOutcome::new(CheckKind::Freeness, label);
    let has_invariants = tj.invariants.is_some();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some(jets) = sample_stratum_jets(&tj, r, n_trunc, samples, &mut rng) else {
        let reason = format!("stratum has no F_{}-points", field.p);
        return Ok((
            CheckOutcome::skip(CheckKind::Jacobian, jac.instance, reason.clone()),
            CheckOutcome::skip(CheckKind::Freeness, free.instance, reason),
        ));
    };
    let centralizer: Vec<_> = (1..ctx.group.len())
        .filter(|&x| ctx.commutes(x, w))
        .map(|x| ctx.group.elements[x].matrix.clone())
        .collect();
    let results: Vec<(Result<BigRational>, bool)> = jets
        .par_iter()
        .map(|u| {
            let v = if has_invariants { tj.jacobian_valuation(u) } else { Err(Error::Precondition(NO_INVARIANTS.into())) };
            (v, tj.fixed_by_any(u, &centralizer))
        })
        .collect();
    let mut jac_ok = 0;
    let mut free_ok = 0;
    for (u, (v, fixed)) in jets.iter().zip(results) {
        match v {
            Ok(v) if v == report.e_wr => jac_ok += 1,
            Ok(v) => jac.fail(Some(u.clone()), format!("valuation {}", fmt_rational(&v))),
            Err(err) => jac.fail(Some(u.clone()), err.to_string()),
        }
        if fixed {
            free.fail(Some(u.clone()), "fixed by a non-identity element of W_w");
        } else {
            free_ok += 1;
        }
    }
    jac.count("samples", jets.len());
    jac.count("matching", jac_ok);
    jac.expect("valuation", fmt_rational(&report.e_wr));
    free.count("samples", jets.len());
    free.count("free", free_ok);
    free.expect("centralizer_order", centralizer.len() + 1);
    if !has_invariants {
        jac = CheckOutcome::skip(CheckKind::Jacobian, jac.instance, NO_INVARIANTS);
    }
    Ok((jac, free))
}

/// `Σ_{r'' ∈ W r} ∏_α α(u)^{N − r''(α)}` truncated at `len`.
fn separating_polynomial(tj: &TwistedJets, u: &JetPoint, orbit: &[Vec<u64>], n_trunc: u64, len: usize) -> Vec<u64> {
    let p = tj.p();
    let series: Vec<Vec<u64>> = (0..tj.num_roots())
        .map(|a| {
            let mut s = tj.root_series(u, a);
            s.resize(len, 0);
            s
        })
        .collect();
    let mut total = vec![0u64; len];
    for rr in orbit {
        let mut prod = vec![0u64; len];
        prod[0] = 1;
        for (a, s) in series.iter().enumerate() {
            for _ in 0..n_trunc - rr[a] {
                prod = s_mul(p, &prod, s, len);
            }
        }
        for (t, x) in total.iter_mut().zip(prod) {
            *t = (*t + x) % p;
        }
    }
    total
}

/// Certificate that stratum `r2` does not meet the closure of stratum `r`
/// (both for `w = 1`): the separating polynomial has valuation exactly
/// `N δ_r − (r, r)` on stratum `r` and strictly more on stratum `r2`.
pub fn separation_certificate(
    ctx: &StrataContext,
    r: &ValuationFunction,
    r2: &ValuationFunction,
    n_trunc: usize,
    field: JetField,
    samples: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    if !r.is_integral() || !r2.is_integral() {
        return Err(Error::Precondition("separation needs integral r and r′".into()));
    }
    let to_int = |v: &ValuationFunction| -> Vec<u64> { v.values.iter().map(|x| x.to_integer().to_u64().unwrap()).collect() };
    let (ri, r2i) = (to_int(r), to_int(r2));
    let (mut s1, mut s2) = (ri.clone(), r2i.clone());
    s1.sort_unstable();
    s2.sort_unstable();
    if s1 != s2 {
        return Err(Error::Precondition("r and r′ must have the same level multiset".into()));
    }
    let mut orbit: Vec<Vec<u64>> = ctx.group.elements.iter().map(|x| to_int(&r.act(x))).collect();
    orbit.sort();
    orbit.dedup();
    if orbit.contains(&r2i) {
        return Err(Error::Precondition("r′ lies in the W-orbit of r".into()));
    }
    let max_r = *ri.iter().max().unwrap_or(&0) as usize;
    if n_trunc < max_r {
        return Err(Error::Precondition(format!("separation needs N ≥ max r = {max_r}")));
    }
    for v in [r, r2] {
        if !ctx.evaluate(0, v)?.nonempty {
            return Err(Error::Precondition(format!("stratum [{}] is empty", v.display())));
        }
    }
    let delta: u64 = ri.iter().sum();
    let norm: u64 = ri.iter().map(|x| x * x).sum();
    let target = (n_trunc as u64 * delta - norm) as usize;
    let len = target + 2;
    let tj = TwistedJets::new(&ctx.rs, &ctx.group.elements[0].matrix, 1, field)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CheckOutcome::new(
        CheckKind::Separation,
        format!("r = [{}], r′ = [{}], N = {n_trunc}, q = {}", r.display(), r2.display(), field.p),
    );
    out.expect("valuation_on_r", target);
    out.expect("valuation_on_r′", format!("> {target}"));
    let jets_r = sample_stratum_jets(&tj, r, max_r + 1, samples, &mut rng);
    let jets_r2 = sample_stratum_jets(&tj, r2, max_r + 1, samples, &mut rng);
    let (Some(jets_r), Some(jets_r2)) = (jets_r, jets_r2) else {
        return Ok(CheckOutcome::skip(CheckKind::Separation, out.instance, format!("no F_{}-points", field.p)));
    };
    let val = |u: &JetPoint| separating_polynomial(&tj, u, &orbit, n_trunc as u64, len).iter().position(|&c| c != 0);
    let mut min_gap = usize::MAX;
    for u in &jets_r {
        if val(u) != Some(target) {
            out.fail(Some(u.clone()), "valuation on stratum r differs from N δ − (r, r)");
        }
    }
    for u in &jets_r2 {
        match val(u) {
            Some(v) if v <= target => out.fail(Some(u.clone()), "valuation on stratum r′ is not larger"),
            Some(v) => min_gap = min_gap.min(v - target),
            None => min_gap = min_gap.min(len - target),
        }
    }
    out.count("samples_r", jets_r.len());
    out.count("samples_r′", jets_r2.len());
    if min_gap != usize::MAX {
        out.count("min_gap_at_least", min_gap);
    }
    Ok(out)
}

/// Pairs of integral strata for `w = 1` with equal level multisets in
/// distinct `W`-orbits, with `δ ≤ max_delta`.
pub fn separation_pairs(ctx: &StrataContext, max_delta: u64, cap: usize) -> Result<Vec<(ValuationFunction, ValuationFunction)>> {
    let reps = ctx.enumerate_strata(max_delta, 1, cap)?;
    let mut groups: BTreeMap<Vec<BigRational>, Vec<ValuationFunction>> = BTreeMap::new();
    for rep in reps.into_iter().filter(|rep| rep.w.is_identity() && !rep.r.values.iter().all(|v| v.is_zero())) {
        let mut key = rep.r.values.clone();
        key.sort();
        groups.entry(key).or_default().push(rep.r);
    }
    let mut pairs = Vec::new();
    for members in groups.values() {
        for i in 0..members.len() {
            for j in 0..members.len() {
                if i != j {
                    pairs.push((members[i].clone(), members[j].clone()));
                }
            }
        }
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Hensel trials

/// Random solvable instances of `f_w(x′) = y`: `x0` a stratum jet,
/// `M = N − e`, `y = f(x0 + h)` with `h ∈ ε^M L`. Each solution is checked
/// exactly and, when `q^{nNl} ≤ exhaustive_limit`, against an exhaustive
/// root search over `x0 + ε^M L`.
pub fn hensel_trials(instances: usize, seed: u64, exhaustive_limit: u64) -> Result<CheckOutcome> {
    struct Pool {
        ctx: StrataContext,
        strata: Vec<(usize, ValuationFunction, usize)>,
    }
    let mut pools = Vec::new();
    for (t, n) in [(RootType::A, 1), (RootType::A, 2), (RootType::B, 2)] {
        let ctx = StrataContext::new(build_root_system(t, n)?)?;
        let max_order = (0..ctx.group.len()).map(|w| ctx.order(w)).max().unwrap_or(1);
        let strata = ctx
            .enumerate_strata(4, max_order, DEFAULT_JET_CAP)?
            .into_iter()
            .filter_map(|rep| {
                let e = e_integer(&rep).ok()?;
                (e <= 2).then(|| (ctx.index_of(&rep.w).unwrap(), rep.r, e))
            })
            .collect();
        pools.push(Pool { ctx, strata });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CheckOutcome::new(CheckKind::Hensel, format!("{instances} instances, seed {seed}"));
    let mut solved = 0usize;
    let mut cross_checked = 0usize;
    for _ in 0..instances {
        let pool = &pools[rng.gen_range(0..pools.len())];
        let (w, r, e) = &pool.strata[rng.gen_range(0..pool.strata.len())];
        let ctx = &pool.ctx;
        let l = ctx.order(*w);
        let field = JetField::default_for(l, ctx.group.len() as u64, ctx.rs.num_roots());
        let tj = TwistedJets::new(&ctx.rs, &ctx.group.elements[*w].matrix, l, field)?;
        let n_trunc = 2 * e + 1 + rng.gen_range(0..2);
        let m = n_trunc - e;
        let Some(x0_jet) = sample_stratum_jets(&tj, r, n_trunc, 1, &mut rng).map(|mut v| v.remove(0)) else {
            continue;
        };
        let x0 = tj.to_lattice(&x0_jet);
        let p = field.p;
        let mut shifted = x0.clone();
        for s in shifted.iter_mut() {
            for c in s[m..].iter_mut() {
                *c = (*c + rng.gen_range(0..p)) % p;
            }
        }
        let y = tj.eval(&shifted, n_trunc)?;
        let label = || format!("{} w = {}, r = [{}], N = {n_trunc}, M = {m}, q = {p}", ctx.rs.label(), ctx.group.elements[*w].word_string(), r.display());
        let sol = match hensel_solve(&tj, &x0, &y, m, n_trunc) {
            Ok(s) => s,
            Err(err) => {
                out.fail(Some(x0_jet.clone()), format!("{}: {err}", label()));
                continue;
            }
        };
        let ok = tj.eval(&sol.x, n_trunc)? == y && sol.x.iter().zip(&x0).all(|(a, b)| a[..m] == b[..m]);
        if !ok {
            out.fail(Some(tj.from_lattice(&sol.x, n_trunc)), format!("{}: solution check failed", label()));
            continue;
        }
        solved += 1;
        let size = (p as u128).checked_pow((ctx.rs.rank * n_trunc) as u32 * l as u32);
        if size.is_some_and(|s| s <= exhaustive_limit as u128) {
            let roots = coset_roots(&tj, &x0, &y, m, n_trunc);
            if !roots.contains(&sol.x) {
                out.fail(Some(tj.from_lattice(&sol.x, n_trunc)), format!("{}: not among exhaustive roots", label()));
            }
            cross_checked += 1;
        }
    }
    out.count("solved", solved);
    out.count("cross_checked", cross_checked);
    out.expect("solved", instances);
    if solved != instances && out.passed {
        out.fail(None, "some instances had no stratum points to seed from");
    }
    Ok(out)
}

/// All `x ∈ x0 + ε^M L` modulo `ε^N` with `f(x) ≡ y`.
fn coset_roots(tj: &TwistedJets, x0: &LatticeJet, y: &[Vec<u64>], m: usize, n_trunc: usize) -> Vec<LatticeJet> {
    let n = tj.rank;
    let p = tj.p();
    let free = n_trunc - m;
    let total = p.pow((n * free) as u32);
    (0..total)
        .into_par_iter()
        .filter_map(|i| {
            let tail = lattice_jet_from_index(n, p, free, i);
            let mut x = x0.clone();
            for (s, t) in x.iter_mut().zip(&tail) {
                s[m..].copy_from_slice(t);
            }
            (tj.eval(&x, n_trunc).ok()? == y).then_some(x)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Plans

/// A batch of checks on one root system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationPlan {
    pub type_label: RootType,
    pub rank: usize,
    /// Explicit strata; empty means every orbit with `δ_r ≤ max_delta`.
    pub strata: Vec<(WeylElement, ValuationFunction)>,
    pub truncation: usize,
    /// `None` selects the smallest admissible prime for all strata.
    pub prime: Option<u64>,
    pub checks: Vec<CheckKind>,
    pub max_delta: u64,
    pub samples: usize,
    pub cap: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub plan: VerificationPlan,
    pub prime: u64,
    pub outcomes: Vec<CheckOutcome>,
    pub passed: bool,
}

/// Smallest prime `p > |R|` with `p ∤ |W|` and `l | p − 1` for every `l`.
pub fn default_plan_prime(ctx: &StrataContext, orders: impl IntoIterator<Item = u64>) -> u64 {
    let l = orders.into_iter().fold(1u64, |a, b| a.lcm(&b));
    JetField::default_for(l, ctx.group.len() as u64, ctx.rs.num_roots()).p
}

pub fn run_plan(plan: &VerificationPlan) -> Result<VerificationReport> {
    let ctx = StrataContext::with_cap(build_root_system(plan.type_label, plan.rank)?, DEFAULT_WEYL_CAP)?;
    let n_trunc = plan.truncation;
    if n_trunc == 0 {
        return Err(Error::Precondition("truncation N must be positive".into()));
    }
    let reports: Vec<StratumReport> = if plan.strata.is_empty() {
        let max_order = (0..ctx.group.len()).map(|w| ctx.order(w)).max().unwrap_or(1);
        ctx.enumerate_strata(plan.max_delta, max_order, plan.cap)?
    } else {
        plan.strata
            .iter()
            .map(|(w, r)| ctx.is_nonempty(w, r))
            .collect::<Result<Vec<_>>>()?
    };
    let p = match plan.prime {
        Some(p) => p,
        None => default_plan_prime(&ctx, reports.iter().map(|r| r.l)),
    };
    let mut outcomes = Vec::new();
    let mut censuses: BTreeMap<usize, JetCensus> = BTreeMap::new();
    let needs_census = plan
        .checks
        .iter()
        .any(|c| matches!(c, CheckKind::Partition | CheckKind::FiberSize | CheckKind::ClosureCount));

    // Strata runnable at this prime, with their reasons otherwise.
    let mut runnable = Vec::new();
    for rep in &reports {
        let label = format!("{}, N = {n_trunc}, q = {p}", instance_label(&rep.w, &rep.r));
        if !rep.nonempty {
            outcomes.push(CheckOutcome::skip(CheckKind::ClosureCount, label, "stratum is empty"));
            continue;
        }
        let w = ctx.index_of(&rep.w)?;
        match field_for(&ctx, w, p) {
            Ok(field) => {
                if needs_census && !censuses.contains_key(&w) {
                    censuses.insert(w, JetCensus::build(&ctx, w, n_trunc, field, plan.cap)?);
                }
                runnable.push((rep, w, field));
            }
            Err(err) => {
                for &c in &plan.checks {
                    if c != CheckKind::Separation {
                        outcomes.push(CheckOutcome::skip(c, label.clone(), err.to_string()));
                    }
                }
            }
        }
    }

    for (k, &check) in plan.checks.iter().enumerate() {
        match check {
            CheckKind::ClosureCount => {
                for &(rep, w, _) in &runnable {
                    if max_r_below(&rep.r, n_trunc) {
                        outcomes.push(check_closure_count(&ctx, &censuses[&w], &rep.r)?);
                    } else {
                        outcomes.push(CheckOutcome::skip(check, instance_label(&rep.w, &rep.r), "needs r(α) < N"));
                    }
                }
            }
            CheckKind::FiberSize => {
                for &(rep, w, _) in &runnable {
                    if censuses[&w].jets.invariants.is_none() {
                        outcomes.push(CheckOutcome::skip(check, instance_label(&rep.w, &rep.r), NO_INVARIANTS));
                        continue;
                    }
                    let e = e_integer(rep)?;
                    if n_trunc > 2 * e && max_r_below(&rep.r, n_trunc - e) {
                        outcomes.push(check_fiber_sizes(&ctx, &censuses[&w], &rep.r)?);
                    } else {
                        outcomes.push(CheckOutcome::skip(check, instance_label(&rep.w, &rep.r), "needs N > 2e and r(α) < N − e"));
                    }
                }
            }
            CheckKind::Partition => {
                let label = format!("{}, N = {n_trunc}, q = {p}, δ ≤ {}", ctx.rs.label(), plan.max_delta);
                if InvariantMap::new(ctx.rs.type_label, ctx.rs.rank).is_err() {
                    outcomes.push(CheckOutcome::skip(check, label, NO_INVARIANTS));
                    continue;
                }
                let mut eligible = Vec::new();
                for &(rep, w, _) in &runnable {
                    let e = e_integer(rep)?;
                    if n_trunc > 2 * e && max_r_below(&rep.r, n_trunc) {
                        eligible.push((rep, &censuses[&w]));
                    }
                }
                outcomes.push(check_partition(&eligible, &label));
            }
            CheckKind::Jacobian | CheckKind::Freeness => {
                if plan.checks[..k].iter().any(|c| matches!(c, CheckKind::Jacobian | CheckKind::Freeness)) {
                    continue;
                }
                for (i, &(rep, w, field)) in runnable.iter().enumerate() {
                    let e_ok = rep.e_wr < BigRational::from_integer(BigInt::from(n_trunc as u64));
                    if !(max_r_below(&rep.r, n_trunc) && e_ok) {
                        outcomes.push(CheckOutcome::skip(check, instance_label(&rep.w, &rep.r), "needs r(α) < N and e < N"));
                        continue;
                    }
                    let (jac, free) = check_jacobian_and_freeness(&ctx, w, &rep.r, n_trunc, field, plan.samples, plan.seed.wrapping_add(i as u64))?;
                    if plan.checks.contains(&CheckKind::Jacobian) {
                        outcomes.push(jac);
                    }
                    if plan.checks.contains(&CheckKind::Freeness) {
                        outcomes.push(free);
                    }
                }
            }
            CheckKind::Separation => {
                let pairs = separation_pairs(&ctx, plan.max_delta, plan.cap)?;
                let label = format!("{}, δ ≤ {}", ctx.rs.label(), plan.max_delta);
                let Ok(field) = JetField::new(p, 1, ctx.group.len() as u64) else {
                    outcomes.push(CheckOutcome::skip(check, label, format!("{p} is not admissible")));
                    continue;
                };
                if pairs.is_empty() {
                    let mut o = CheckOutcome::new(check, label);
                    o.note = Some("no eligible pair".into());
                    outcomes.push(o);
                }
                for (i, (r, r2)) in pairs.iter().enumerate() {
                    let n_sep = n_trunc.max(r.max().to_integer().to_usize().unwrap());
                    outcomes.push(separation_certificate(&ctx, r, r2, n_sep, field, plan.samples, plan.seed.wrapping_add(i as u64))?);
                }
            }
            CheckKind::Hensel => {
                outcomes.push(hensel_trials(plan.samples, plan.seed, 1_000_000)?);
            }
        }
    }
    let passed = outcomes.iter().all(|o| o.passed);
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        prime: p,
        outcomes,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactfield::rat;
    use crate::rootsys::element_from_word;

    fn a1() -> StrataContext {
        StrataContext::new(build_root_system(RootType::A, 1).unwrap()).unwrap()
    }

    fn census(ctx: &StrataContext, word: &[usize], n: usize, p: u64) -> JetCensus {
        let w = ctx.index_of(&element_from_word(&ctx.rs, word).unwrap()).unwrap();
        JetCensus::build(ctx, w, n, field_for(ctx, w, p).unwrap(), 1_000_000).unwrap()
    }

    fn constant(ctx: &StrataContext, a: i64, b: i64) -> ValuationFunction {
        ValuationFunction::constant(&ctx.rs, rat(a, b)).unwrap()
    }

    #[test]
    fn closure_count_examples() {
        let ctx = a1();
        let c = census(&ctx, &[], 2, 3);
        let o = check_closure_count(&ctx, &c, &constant(&ctx, 1, 1)).unwrap();
        assert!(o.passed);
        assert_eq!(o.counted["points"], "3");
        let c1 = census(&ctx, &[], 1, 3);
        let o = check_closure_count(&ctx, &c1, &constant(&ctx, 0, 1)).unwrap();
        assert_eq!(o.counted["points"], "3");
        let cs = census(&ctx, &[1], 2, 3);
        let o = check_closure_count(&ctx, &cs, &constant(&ctx, 3, 2)).unwrap();
        assert!(o.passed);
        assert_eq!(o.counted["points"], "3");
        assert!(matches!(
            check_closure_count(&ctx, &c, &constant(&ctx, 2, 1)),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn fiber_size_examples() {
        let ctx = a1();
        let cs = census(&ctx, &[1], 3, 3);
        let o = check_fiber_sizes(&ctx, &cs, &constant(&ctx, 1, 2)).unwrap();
        assert!(o.passed, "{o:?}");
        assert_eq!(o.expected["fiber_size"], "6");
        assert_eq!(o.counted["fiber_sizes"], "6x3");
        let c = census(&ctx, &[], 3, 3);
        let o = check_fiber_sizes(&ctx, &c, &constant(&ctx, 1, 1)).unwrap();
        assert!(o.passed);
        assert_eq!(o.expected["fiber_size"], "6");
        // Oracle: the nonzero squares in F_5 each have two roots.
        let c0 = census(&ctx, &[], 1, 5);
        let o = check_fiber_sizes(&ctx, &c0, &constant(&ctx, 0, 1)).unwrap();
        assert!(o.passed);
        assert_eq!(o.counted["fiber_sizes"], "2x2");
        let cs2 = census(&ctx, &[1], 2, 3);
        assert!(matches!(
            check_fiber_sizes(&ctx, &cs2, &constant(&ctx, 1, 2)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn partition_a1() {
        let ctx = a1();
        let n = 5;
        let c1 = census(&ctx, &[], n, 5);
        let cs = census(&ctx, &[1], n, 5);
        let reps = ctx.enumerate_strata(4, 2, 100_000).unwrap();
        let eligible: Vec<(&StratumReport, &JetCensus)> = reps
            .iter()
            .filter(|r| n > 2 * e_integer(r).unwrap())
            .map(|r| (r, if r.w.is_identity() { &c1 } else { &cs }))
            .collect();
        assert_eq!(eligible.len(), 5);
        let o = check_partition(&eligible, "A1");
        assert!(o.passed);
        // Every image of the valuation-m stratum has valuation m.
        for (rep, c) in &eligible {
            let m = rep.delta_r.to_integer().to_usize().unwrap();
            for i in c.stratum_indices(&rep.r) {
                let img = &c.entries[i].image;
                assert_eq!(img.iter().position(|&x| x != 0), Some(m));
            }
        }
        assert!(check_partition(&eligible[..1], "single").passed);
    }

    #[test]
    fn jacobian_and_freeness_sampled() {
        let ctx = a1();
        for m in 0..=5i64 {
            let word: &[usize] = if m % 2 == 0 { &[] } else { &[1] };
            let w = ctx.index_of(&element_from_word(&ctx.rs, word).unwrap()).unwrap();
            let field = field_for(&ctx, w, 5).unwrap();
            let r = constant(&ctx, m, 2);
            let n = (m as usize) / 2 + (m as usize + 1) / 2 + 1;
            let (j, f) = check_jacobian_and_freeness(&ctx, w, &r, n, field, 100, 7).unwrap();
            assert!(j.passed && f.passed, "{j:?} {f:?}");
            assert_eq!(j.counted["matching"], "100");
            let (j0, _) = check_jacobian_and_freeness(&ctx, w, &r, n, field, 0, 7).unwrap();
            assert!(j0.passed);
        }
    }

    #[test]
    fn separation_pairs_by_type() {
        let a2 = StrataContext::new(build_root_system(RootType::A, 2).unwrap()).unwrap();
        assert!(separation_pairs(&a2, 2, 100_000).unwrap().is_empty());
        let mut r = vec![rat(0, 1); 6];
        r[0] = rat(1, 1);
        r[3] = rat(1, 1);
        let mut r2 = vec![rat(0, 1); 6];
        r2[2] = rat(1, 1);
        r2[5] = rat(1, 1);
        let field = JetField::new(7, 1, 6).unwrap();
        let err = separation_certificate(
            &a2,
            &ValuationFunction::new(r).unwrap(),
            &ValuationFunction::new(r2).unwrap(),
            1,
            field,
            5,
            0,
        );
        assert!(matches!(err, Err(Error::Precondition(_))));

        let b2 = StrataContext::new(build_root_system(RootType::B, 2).unwrap()).unwrap();
        let pairs = separation_pairs(&b2, 2, 100_000).unwrap();
        assert!(!pairs.is_empty());
        let field = JetField::default_for(1, 8, 8);
        for (i, (r, r2)) in pairs.iter().enumerate() {
            let o = separation_certificate(&b2, r, r2, 1, field, 20, i as u64).unwrap();
            assert!(o.passed, "{o:?}");
        }
    }

    #[test]
    fn hensel_trials_small() {
        let o = hensel_trials(30, 1, 100_000).unwrap();
        assert!(o.passed, "{o:?}");
    }

    #[test]
    fn plan_is_deterministic() {
        let plan = VerificationPlan {
            type_label: RootType::A,
            rank: 1,
            strata: Vec::new(),
            truncation: 3,
            prime: Some(3),
            checks: vec![CheckKind::ClosureCount, CheckKind::FiberSize, CheckKind::Partition, CheckKind::Jacobian, CheckKind::Freeness],
            max_delta: 4,
            samples: 10,
            cap: 1_000_000,
            seed: 42,
        };
        let a = run_plan(&plan).unwrap();
        let b = run_plan(&plan).unwrap();
        assert!(a.passed, "{a:?}");
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let back: VerificationReport = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
