//! Acceptance suite: one pass/fail line per criterion, with tolerances
//! (all exact) and wall-clock budgets pinned here.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_integer::Integer;
use num_traits::ToPrimitive;
use rootval::exactfield::rat;
use rootval::jets::JetField;
use rootval::rootsys::{
    build_root_system, conjugacy_class_of, element_from_word, invariant_degrees, shipped_types, RootType,
    DEFAULT_WEYL_CAP,
};
use rootval::strata::{StrataContext, StratumReport, ValuationFunction};
use rootval::verify::{
    check_closure_count, check_fiber_sizes, check_jacobian_and_freeness, check_partition, field_for, hensel_trials,
    JetCensus,
};

const CAP: usize = 5_000_000;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn run(id: u32, name: &'static str, budget_secs: u64, f: impl FnOnce() -> Result<String, String>) -> Criterion {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > budget {
        passed = false;
        detail = format!("{detail}; over budget");
    }
    Criterion {
        id,
        name,
        budget,
        passed,
        detail,
        elapsed,
    }
}

fn ctx(t: RootType, n: usize) -> StrataContext {
    StrataContext::new(build_root_system(t, n).unwrap()).unwrap()
}

fn max_order(c: &StrataContext) -> u64 {
    (0..c.group.len()).map(|w| c.order(w)).max().unwrap()
}

fn e_of(rep: &StratumReport) -> usize {
    rep.e_wr.to_integer().to_usize().unwrap()
}

fn max_r_below(rep: &StratumReport, n: usize) -> bool {
    rep.r.max() < rat(n as i64, 1)
}

fn criterion_1() -> Result<String, String> {
    let c = ctx(RootType::A, 1);
    for m in 0..=8i64 {
        let word: &[usize] = if m % 2 == 0 { &[] } else { &[1] };
        let w = element_from_word(&c.rs, word).unwrap();
        let r = ValuationFunction::constant(&c.rs, rat(m, 2)).unwrap();
        let rep = c.is_nonempty(&w, &r).map_err(|e| e.to_string())?;
        if !rep.nonempty || rep.codim != Some(m as u64) {
            return Err(format!("m = {m}: nonempty = {}, codim = {:?}", rep.nonempty, rep.codim));
        }
        // The other parity is empty.
        let other: &[usize] = if m % 2 == 0 { &[1] } else { &[] };
        let wo = element_from_word(&c.rs, other).unwrap();
        if c.is_nonempty(&wo, &r).unwrap().nonempty {
            return Err(format!("m = {m}: wrong-parity stratum reported nonempty"));
        }
    }
    Ok("m = 0..8 nonempty with codim m".into())
}

const SUITE: [(RootType, usize); 5] = [
    (RootType::A, 1),
    (RootType::A, 2),
    (RootType::A, 3),
    (RootType::B, 2),
    (RootType::G, 2),
];

fn criterion_2_and_10() -> (Result<String, String>, Result<String, String>) {
    let mut total = 0;
    let mut err2 = None;
    let mut err10 = None;
    for (t, n) in SUITE {
        let c = ctx(t, n);
        let reps = match c.enumerate_strata(8, 6, CAP) {
            Ok(r) => r,
            Err(e) => return (Err(e.to_string()), Err(e.to_string())),
        };
        for rep in &reps {
            total += 1;
            let label = format!("{t}{n} w = {} r = [{}]", rep.w.word_string(), rep.r.display());
            if !rep.nonempty {
                err2.get_or_insert(format!("{label}: enumerated but empty"));
                continue;
            }
            let dims_ok = rep.eigenspace_dims.iter().sum::<usize>() == n && rep.eigenspace_dims.len() as u64 == rep.l;
            let e_ok = rep.e_wr.is_integer();
            let codim_ok = e_ok && rep.codim == rep.d_wr.map(|d| d + e_of(rep) as u64);
            let c_ok = rep.c_w == (n - rep.eigenspace_dims[0]) as u64;
            if !(dims_ok && e_ok && codim_ok && c_ok) {
                err2.get_or_insert(format!("{label}: dims {dims_ok}, e {e_ok}, codim {codim_ok}, c {c_ok}"));
            }
            let div_ok = c.order_divisibility_check(&rep.w, &rep.r).unwrap_or(false);
            let collapse_ok = !rep.r.is_integral() || rep.w.is_identity();
            if !(div_ok && collapse_ok) {
                err10.get_or_insert(format!("{label}: w^m = 1 {div_ok}, integral collapse {collapse_ok}"));
            }
        }
    }
    let ok = format!("{total} nonempty strata");
    (err2.map_or(Ok(ok.clone()), Err), err10.map_or(Ok(ok), Err))
}

/// Permutation of `{0..n}` induced on ambient coordinates (type A).
fn ambient_permutation(c: &StrataContext, w: usize) -> Vec<usize> {
    let rs = &c.rs;
    let dim = rs.ambient_dim;
    let perm = &c.group.elements[w].root_perm;
    let mut sigma = vec![usize::MAX; dim];
    for a in 0..rs.num_roots() {
        let plus = rs.roots[a].iter().position(|&x| x == 1).unwrap();
        // perm[a] = b means the element maps root b to root a.
        let b = perm[a] as usize;
        let plus_b = rs.roots[b].iter().position(|&x| x == 1).unwrap();
        sigma[plus_b] = plus;
    }
    sigma
}

fn cycle_type(sigma: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; sigma.len()];
    let mut t = Vec::new();
    for i in 0..sigma.len() {
        if !seen[i] {
            let mut len = 0;
            let mut j = i;
            while !seen[j] {
                seen[j] = true;
                j = sigma[j];
                len += 1;
            }
            t.push(len);
        }
    }
    t.sort_unstable_by(|a, b| b.cmp(a));
    t
}

fn criterion_3() -> Result<String, String> {
    let c = ctx(RootType::A, 3);
    let allowed: [&[usize]; 4] = [&[4], &[2, 2], &[3, 1], &[1, 1, 1, 1]];
    let mut checked = 0;
    let mut positives = 0;
    for w in 0..c.group.len() {
        let ct = cycle_type(&ambient_permutation(&c, w));
        let order = ct.iter().fold(1usize, |a, &b| a.lcm(&b)) as i64;
        if order as u64 != c.order(w) {
            return Err(format!("cycle type {ct:?} disagrees with order {}", c.order(w)));
        }
        let power_class = allowed.iter().any(|a| *a == ct.as_slice());
        let welt = c.group.element(w).clone();
        for b in 1..=4i64 {
            for a in 0..=8i64 {
                if a.gcd(&b) != 1 {
                    continue;
                }
                let q = rat(a, b);
                let expected = power_class && order == b;
                let got = c.equivalued_nonempty(&welt, &q).map_err(|e| e.to_string())?;
                let r = ValuationFunction::constant(&c.rs, q.clone()).unwrap();
                let general = c.evaluate(w, &r).map_err(|e| e.to_string())?.nonempty;
                if got != expected || general != expected {
                    return Err(format!("w = {} ({ct:?}), r = {a}/{b}: got {got}/{general}, expected {expected}", welt.word_string()));
                }
                checked += 1;
                positives += expected as usize;
            }
        }
    }
    Ok(format!("{checked} (w, a/b) pairs, {positives} nonempty"))
}

fn criterion_4() -> Result<String, String> {
    let mut values = 0;
    for (t, n) in SUITE {
        let c = ctx(t, n);
        for b in 1..=max_order(&c) as i64 {
            for a in 0..=8i64 {
                if a.gcd(&b) != 1 {
                    continue;
                }
                let r = ValuationFunction::constant(&c.rs, rat(a, b)).unwrap();
                let mut classes = BTreeSet::new();
                for w in 0..c.group.len() {
                    if c.evaluate(w, &r).map_err(|e| e.to_string())?.nonempty {
                        classes.insert(conjugacy_class_of(&c.group, w).0);
                    }
                }
                if classes.len() > 1 {
                    return Err(format!("{t}{n} r ≡ {a}/{b}: {} classes", classes.len()));
                }
                if !classes.is_empty() {
                    // The class must be complete.
                    let rep = *classes.iter().next().unwrap();
                    let size = conjugacy_class_of(&c.group, rep).1;
                    let count = (0..c.group.len())
                        .filter(|&w| c.evaluate(w, &r).unwrap().nonempty)
                        .count();
                    if count != size {
                        return Err(format!("{t}{n} r ≡ {a}/{b}: {count} of {size} class members"));
                    }
                }
                values += 1;
            }
        }
    }
    Ok(format!("{values} equivalued values, each one class or empty"))
}

fn criterion_5() -> Result<String, String> {
    let mut strata = 0;
    for (t, n, bound) in [(RootType::A, 1, 5), (RootType::A, 2, 6), (RootType::B, 2, 6)] {
        let c = ctx(t, n);
        for (i, rep) in c.enumerate_strata(bound, max_order(&c), CAP).map_err(|e| e.to_string())?.iter().enumerate() {
            let w = c.index_of(&rep.w).unwrap();
            let field = JetField::default_for(rep.l, c.group.len() as u64, c.rs.num_roots());
            let floor = rep.r.max().floor().to_integer().to_usize().unwrap();
            let n_trunc = (floor + 1).max(e_of(rep) + 1);
            let (jac, free) = check_jacobian_and_freeness(&c, w, &rep.r, n_trunc, field, 100, 1000 + i as u64)
                .map_err(|e| e.to_string())?;
            for o in [&jac, &free] {
                if !o.passed || o.skipped.is_some() {
                    return Err(format!("{t}{n} {}: {:?} {:?}", o.instance, o.skipped, o.note));
                }
            }
            strata += 1;
        }
    }
    Ok(format!("{strata} strata x 100 samples, zero failures"))
}

/// Exhaustive ranges shared by criteria 6–8.
const RANGES: [(RootType, usize, usize, [u64; 2]); 2] = [(RootType::A, 1, 6, [3, 5]), (RootType::A, 2, 3, [5, 7])];

struct Exhaustive {
    ctx: StrataContext,
    reps: Vec<StratumReport>,
    censuses: BTreeMap<(usize, usize, u64), JetCensus>,
}

impl Exhaustive {
    fn new(t: RootType, n: usize, max_n: usize) -> Self {
        let c = ctx(t, n);
        let max_delta = (max_n * c.rs.num_roots()) as u64;
        let reps = c.enumerate_strata(max_delta, max_order(&c), CAP).unwrap();
        Exhaustive {
            ctx: c,
            reps,
            censuses: BTreeMap::new(),
        }
    }

    /// Strata with `r < N` whose `l` divides `q − 1`, and the census for each.
    fn prepare(&mut self, n_trunc: usize, q: u64) -> Result<Vec<(usize, usize)>, String> {
        let mut out = Vec::new();
        for (k, rep) in self.reps.iter().enumerate() {
            if !max_r_below(rep, n_trunc) {
                continue;
            }
            let w = self.ctx.index_of(&rep.w).unwrap();
            let Ok(field) = field_for(&self.ctx, w, q) else { continue };
            if !self.censuses.contains_key(&(w, n_trunc, q)) {
                let census = JetCensus::build(&self.ctx, w, n_trunc, field, CAP).map_err(|e| e.to_string())?;
                self.censuses.insert((w, n_trunc, q), census);
            }
            out.push((k, w));
        }
        Ok(out)
    }
}

fn exhaustive_systems() -> Vec<Exhaustive> {
    RANGES.iter().map(|&(t, n, max_n, _)| Exhaustive::new(t, n, max_n)).collect()
}

fn criterion_6(systems: &mut [Exhaustive]) -> Result<String, String> {
    let mut checks = 0;
    for (sys, &(t, n, max_n, primes)) in systems.iter_mut().zip(&RANGES) {
        for q in primes {
            for n_trunc in 1..=max_n {
                for (k, w) in sys.prepare(n_trunc, q)? {
                    let census = &sys.censuses[&(w, n_trunc, q)];
                    let o = check_closure_count(&sys.ctx, census, &sys.reps[k].r).map_err(|e| e.to_string())?;
                    if !o.passed {
                        return Err(format!("{t}{n} {}: {:?} vs {:?}", o.instance, o.counted, o.expected));
                    }
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} exhaustive closure counts"))
}

fn criterion_7(systems: &mut [Exhaustive]) -> Result<String, String> {
    let mut checks = 0;
    let mut fibers = 0usize;
    for (sys, &(t, n, max_n, primes)) in systems.iter_mut().zip(&RANGES) {
        for q in primes {
            for n_trunc in 1..=max_n {
                for (k, w) in sys.prepare(n_trunc, q)? {
                    let rep = &sys.reps[k];
                    let e = e_of(rep);
                    if n_trunc <= 2 * e || !max_r_below(rep, n_trunc - e) {
                        continue;
                    }
                    let census = &sys.censuses[&(w, n_trunc, q)];
                    let o = check_fiber_sizes(&sys.ctx, census, &rep.r).map_err(|e| e.to_string())?;
                    if !o.passed {
                        return Err(format!("{t}{n} {}: {:?}", o.instance, o.note));
                    }
                    fibers += o.counted["image_points"].parse::<usize>().unwrap();
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} strata, {fibers} rationally hit fibers"))
}

fn criterion_8(systems: &mut [Exhaustive]) -> Result<String, String> {
    let mut checks = 0;
    for (sys, &(t, n, max_n, primes)) in systems.iter_mut().zip(&RANGES) {
        for q in primes {
            for n_trunc in 1..=max_n {
                let prepared = sys.prepare(n_trunc, q)?;
                let eligible: Vec<(&StratumReport, &JetCensus)> = prepared
                    .iter()
                    .filter(|&&(k, _)| n_trunc > 2 * e_of(&sys.reps[k]))
                    .map(|&(k, w)| (&sys.reps[k], &sys.censuses[&(w, n_trunc, q)]))
                    .collect();
                let o = check_partition(&eligible, &format!("{t}{n} N = {n_trunc} q = {q}"));
                if !o.passed {
                    return Err(format!("{}: {:?}", o.instance, o.note));
                }
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} (system, N, q) partitions disjoint"))
}

fn criterion_9() -> Result<String, String> {
    let o = hensel_trials(1000, 2024, 1_000_000).map_err(|e| e.to_string())?;
    if !o.passed {
        return Err(format!("{:?} {:?}", o.note, o.counted));
    }
    Ok(format!("solved {}, cross-checked {}", o.counted["solved"], o.counted["cross_checked"]))
}

fn known_degrees(t: RootType, n: usize) -> Option<Vec<u64>> {
    let n64 = n as u64;
    Some(match t {
        RootType::A => (2..=n64 + 1).collect(),
        RootType::B | RootType::C => (1..=n64).map(|k| 2 * k).collect(),
        RootType::D => {
            let mut d: Vec<u64> = (1..n64).map(|k| 2 * k).chain([n64]).collect();
            d.sort_unstable();
            d
        }
        RootType::G => vec![2, 6],
        RootType::F => vec![2, 6, 8, 12],
        RootType::E if n == 6 => vec![2, 5, 6, 8, 9, 12],
        _ => return None,
    })
}

fn criterion_11() -> Result<String, String> {
    let mut count = 0;
    for (t, n) in shipped_types() {
        let rs = build_root_system(t, n).unwrap();
        let Ok(group) = rootval::rootsys::enumerate_weyl(&rs, 1_000_000) else {
            continue;
        };
        let d = invariant_degrees(&rs, DEFAULT_WEYL_CAP).map_err(|e| e.to_string())?;
        if d.sum_minus_one() != rs.num_positive() as u64 || d.product() != group.len() as u128 {
            return Err(format!("{t}{n}: degrees {:?}", d.degrees));
        }
        if let Some(k) = known_degrees(t, n) {
            if k != d.degrees {
                return Err(format!("{t}{n}: {:?} vs table {:?}", d.degrees, k));
            }
        }
        count += 1;
    }
    Ok(format!("{count} types with |W| ≤ 10^6"))
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    results.push(run(1, "SL2 ladder", 1, criterion_1));
    let start = Instant::now();
    let (c2, c10) = criterion_2_and_10();
    let t2 = start.elapsed();
    results.push(run(3, "equivalued classification", 10, criterion_3));
    results.push(run(4, "Springer uniqueness", 60, criterion_4));
    results.push(run(5, "Jacobian valuation", 60, criterion_5));
    let mut systems = exhaustive_systems();
    results.push(run(6, "closure counts", 120, || criterion_6(&mut systems)));
    results.push(run(7, "torsor fiber sizes", 300, || criterion_7(&mut systems)));
    results.push(run(8, "partition", 300, || criterion_8(&mut systems)));
    results.push(run(9, "Hensel solver", 120, criterion_9));
    results.push(run(11, "degree identities", 60, criterion_11));
    for (id, name, res) in [(2, "integrality suite", c2), (10, "order divisibility and integral collapse", c10)] {
        let mut c = run(id, name, 60, || res);
        c.elapsed = t2;
        if t2 > c.budget {
            c.passed = false;
        }
        results.push(c);
    }
    results.sort_by_key(|c| c.id);
    for c in &results {
        println!(
            "criterion {:>2} {} {}: {} [{:.2?} / {:?}]",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail,
            c.elapsed,
            c.budget
        );
    }
    let failed: Vec<u32> = results.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
