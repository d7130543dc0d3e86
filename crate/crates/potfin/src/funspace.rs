//! Described functions between staged relation spaces.
//!
//! A function here is a piece of data, a [`FnDesc`], evaluated against a
//! domain space. Two descriptions are related at a stage pair `(i, j)` when
//! arguments indistinguishable at `i` land on values indistinguishable at
//! `j`; a description related to itself at `(i, j)` maps stage-`i` knowledge
//! to stage-`j` knowledge and nothing finer is needed. The set of such pairs
//! is the description's stage set, and the description counts as a function
//! of the system, rather than merely of each stage, exactly when that set
//! is large in the product filter.
//!
//! [`fn_perspace`] packages all of this as a staged relation space whose
//! stage points are the finite canonical tables, and [`check_apx_iso`]
//! matches those tables against the table states of the function-space
//! stage system built from the same two spaces.

use crate::elem::{Elem, FnDesc};
use crate::index::{FilterSpec, Index, IndexPoset, SubsetDesc, Verdict3};
use crate::limit::Carrier;
use crate::perset::PerSpace;
use crate::report::LawReport;
use crate::system::{function_space, State};
use crate::{input_err, Error, Result};

fn want_nat(a: &Elem) -> Result<u64> {
    a.as_nat().ok_or_else(|| Error::Input(format!("expected a number, got {a}")))
}

fn want_fn(a: &Elem) -> Result<&FnDesc> {
    a.as_fn().ok_or_else(|| Error::Input(format!("expected a function description, got {a}")))
}

fn split_pair(ij: &Index) -> Result<(Index, Index)> {
    match ij.as_pair() {
        Some((i, j)) => Ok((i.clone(), j.clone())),
        None => input_err(format!("function stages are pairs, got {ij}")),
    }
}

fn truth(e: &Elem) -> Result<bool> {
    e.as_bool().ok_or_else(|| Error::Input(format!("expected a truth value, got {e}")))
}

/// Quantify a description over its whole argument range: the conjunction of
/// every value the description commits to. Shapes without a surveyable
/// value set are input errors.
fn forall_value(arg: &FnDesc) -> Result<bool> {
    match arg {
        FnDesc::Const(e) => truth(e),
        FnDesc::EventuallyConst { prefix, tail } => {
            let mut all = truth(tail)?;
            for e in prefix {
                let t = truth(e)?;
                all = all && t;
            }
            Ok(all)
        }
        FnDesc::Table { entries, default, .. } => {
            if entries.is_empty() && default.is_none() {
                return input_err("the quantified table commits to no values".to_string());
            }
            let mut all = true;
            for (_, v) in entries {
                let t = truth(v)?;
                all = all && t;
            }
            if let Some(d) = default {
                let t = truth(d)?;
                all = all && t;
            }
            Ok(all)
        }
        other => input_err(format!("cannot quantify over the shape {other}")),
    }
}

/// Evaluate a description at one argument. Tables canonicalize the argument
/// at their own stage before the lookup, so a table answers for every
/// element the domain space can canonicalize, not only for its listed keys.
pub fn eval_fn(dom: &PerSpace, desc: &FnDesc, a: &Elem) -> Result<Elem> {
    match desc {
        FnDesc::Identity => Ok(a.clone()),
        FnDesc::Succ => Ok(Elem::Nat(want_nat(a)? + 1)),
        FnDesc::Const(e) => Ok((**e).clone()),
        FnDesc::EventuallyConst { prefix, tail } => {
            let n = want_nat(a)? as usize;
            Ok(prefix.get(n).cloned().unwrap_or_else(|| (**tail).clone()))
        }
        FnDesc::Table { stage, entries, default } => {
            let key = if dom.has_total_pt() { dom.pt_total(stage, a)? } else { dom.pt(stage, a)? };
            if let Ok(pos) = entries.binary_search_by(|(k, _)| k.cmp(&key)) {
                return Ok(entries[pos].1.clone());
            }
            match default {
                Some(d) => Ok((**d).clone()),
                None => input_err(format!("{desc} has no entry for {a} (key {key})")),
            }
        }
        FnDesc::Forall => Ok(Elem::Bool(forall_value(want_fn(a)?)?)),
        FnDesc::Compose(outer, inner) => {
            if matches!(**outer, FnDesc::Table { .. }) {
                return input_err(format!(
                    "composite with a table outside: {desc}. Fold it into one table first"
                ));
            }
            let mid = eval_fn(dom, inner, a)?;
            eval_fn(dom, outer, &mid)
        }
    }
}

/// Does the pool hold a pair related at `i` whose images break apart at `j`?
fn relation_gap(
    dom: &PerSpace,
    cod: &PerSpace,
    f: &FnDesc,
    g: &FnDesc,
    i: &Index,
    j: &Index,
    pool: &[Elem],
) -> Result<bool> {
    let mut imf = Vec::with_capacity(pool.len());
    let mut img = Vec::with_capacity(pool.len());
    for a in pool {
        imf.push(eval_fn(dom, f, a)?);
        img.push(eval_fn(dom, g, a)?);
    }
    for (x, a) in pool.iter().enumerate() {
        for (y, b) in pool.iter().enumerate() {
            if dom.per(a, i, b)? && !cod.per(&imf[x], j, &img[y])? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The logical relation at one stage pair: arguments related at `i` must map
/// to values related at `j`, over the carrier samples and, when the domain
/// has them, its stage-`i` points. Samples go first so that a violating pair
/// among them is found before any point set is enumerated.
pub fn per_fn(
    dom: &PerSpace,
    cod: &PerSpace,
    f: &FnDesc,
    g: &FnDesc,
    i: &Index,
    j: &Index,
    sample_fuel: u64,
) -> Result<bool> {
    let samples = dom.carrier.elems(sample_fuel);
    if relation_gap(dom, cod, f, g, i, j, &samples)? {
        return Ok(false);
    }
    if dom.has_points() {
        let mut pool = dom.points(i)?;
        pool.extend(samples);
        pool.sort();
        pool.dedup();
        if relation_gap(dom, cod, f, g, i, j, &pool)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Stagewise continuity of one description at `(i, j)`: it relates to
/// itself there. The diagonal already forces every stage-`i` argument class
/// onto a single stage-`j` value class.
pub fn is_ij_continuous(
    dom: &PerSpace,
    cod: &PerSpace,
    f: &FnDesc,
    i: &Index,
    j: &Index,
    sample_fuel: u64,
) -> Result<bool> {
    per_fn(dom, cod, f, f, i, j, sample_fuel)
}

/// The stage of the codomain from which on a value is present, read off the
/// value's declared stage set and verified against actual membership.
fn value_stage(n: &PerSpace, v: &Elem) -> Result<Index> {
    let desc = n.dom_desc(v)?;
    let w = desc
        .upset_witness()
        .ok_or_else(|| Error::Input(format!("no certified stage for the value {v}")))?;
    if !n.in_dom(v, &w)? {
        return input_err(format!("{v} is declared from {w} on but absent there"));
    }
    Ok(w)
}

/// Row function of a description's stage set: at left index `l`, the join
/// of the stages from which every value over the stage-`l` points is
/// present. Exact when the domain relation at `l` is decided by those
/// points. Any failure claims nothing at that row, and the stage-set law
/// surfaces the loss.
fn witness_rows(m: &PerSpace, n: &PerSpace, desc: &FnDesc) -> impl Fn(&Index) -> Vec<Index> {
    let (m, n, desc) = (m.clone(), n.clone(), desc.clone());
    move |l: &Index| -> Vec<Index> {
        let pts = match m.points(l) {
            Ok(p) => p,
            Err(_) => return vec![],
        };
        let mut row = n.index.min_index();
        for p in &pts {
            let v = match eval_fn(&m, &desc, p) {
                Ok(v) => v,
                Err(_) => return vec![],
            };
            let s = match value_stage(&n, &v) {
                Ok(s) => s,
                Err(_) => return vec![],
            };
            row = match n.index.join(&row, &s) {
                Ok(r) => r,
                Err(_) => return vec![],
            };
        }
        vec![row]
    }
}

/// Declared stage set for a description, when one can be written down
/// exactly. Quantifiers get the empty set. Over a domain whose stage
/// relations are decided by the stage points the row function is exact for
/// every shape; otherwise only constants have a described set.
fn witness_desc(
    m: &PerSpace,
    n: &PerSpace,
    discrete: bool,
    desc: &FnDesc,
    label: String,
) -> Option<SubsetDesc> {
    match desc {
        FnDesc::Forall => Some(SubsetDesc::explicit(label, Vec::<Index>::new())),
        _ if discrete => Some(SubsetDesc::rows_upset_many(label, witness_rows(m, n, desc))),
        FnDesc::Const(c) => {
            let s = value_stage(n, c).ok()?;
            Some(SubsetDesc::rows_upset(label, move |_| s.clone()))
        }
        _ => None,
    }
}

/// Empirical probe: do the stage relations over a small window identify any
/// two structurally distinct elements? Trusted only over what it scanned,
/// which is all the carrier construction needs.
fn discrete_domain(m: &PerSpace) -> bool {
    let bound = m.index.uniform_bound(3);
    let stages = match m.index.enumerate_to(&bound) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let mut pool = m.carrier.elems(4);
    if m.has_points() {
        for i in &stages {
            match m.points(i) {
                Ok(p) => pool.extend(p),
                Err(_) => return false,
            }
        }
    }
    pool.sort();
    pool.dedup();
    for i in &stages {
        for a in &pool {
            for b in &pool {
                match m.per(a, i, b) {
                    Ok(true) if a != b => return false,
                    Ok(_) => {}
                    Err(_) => return false,
                }
            }
        }
    }
    true
}

/// The canonical table of a description at `(i, j)`: every stage-`i` point
/// mapped to the stage-`j` canonical form of its value. Tabulation is the
/// pointing map of the function space, and it is total on every evaluable
/// description.
fn canonical_table(m: &PerSpace, n: &PerSpace, desc: &FnDesc, i: &Index, j: &Index) -> Result<Elem> {
    let mut entries = Vec::new();
    for p in m.points(i)? {
        let v = eval_fn(m, desc, &p)?;
        entries.push((p, n.pt_total(j, &v)?));
    }
    Ok(Elem::Fn(FnDesc::table(i.clone(), entries, None)))
}

fn table_stage(desc: &FnDesc) -> Option<Index> {
    match desc {
        FnDesc::Table { stage, .. } => Some(stage.clone()),
        FnDesc::Compose(_, inner) => table_stage(inner),
        _ => None,
    }
}

/// Keep a carrier shape only if its stage set claims something on a small
/// canary window. Shapes whose values the codomain cannot place would
/// otherwise sit in the carrier with empty declared rows and fail the
/// stage-set law for no informative reason.
fn shape_usable(m: &PerSpace, n: &PerSpace, desc: &FnDesc) -> bool {
    let rows = witness_rows(m, n, desc);
    let bound = m.index.uniform_bound(2);
    let stages = match m.index.enumerate_to(&bound) {
        Ok(s) => s,
        Err(_) => return false,
    };
    !stages.is_empty() && stages.iter().all(|l| !rows(l).is_empty())
}

/// The function space of two staged relation spaces, as a staged relation
/// space.
///
/// Stages are pairs, relations are the logical relation of [`per_fn`] with
/// the given sample fuel, stage points are the canonical tables, and both
/// pointing maps tabulate. The carrier holds constant descriptions always,
/// and the identity, successor and eventually-constant descriptions over
/// domains whose probed stage relations identify nothing, each gated by a
/// canary check that its values can be placed in the codomain. Element
/// equality is observational: two descriptions are equal when they agree on
/// the carrier samples and on the points of any table stage they mention.
///
/// Both spaces must carry total canonicalization maps.
pub fn fn_perspace(m: &PerSpace, n: &PerSpace, sample_fuel: u64) -> Result<PerSpace> {
    if !m.has_total_pt() || !n.has_total_pt() {
        return input_err(format!(
            "function stages need total canonicalization on {} and {}",
            m.name, n.name
        ));
    }
    let name = format!("[{} -> {}]", m.name, n.name);
    let index = IndexPoset::product(m.index.clone(), n.index.clone());
    let filter = FilterSpec::product(m.filter.clone(), n.filter.clone());
    let discrete = discrete_domain(m);

    let (mc, nc) = (m.clone(), n.clone());
    let carrier = Carrier::new(move |fuel| {
        let mut out = Vec::new();
        let mut push = |d: FnDesc| {
            if shape_usable(&mc, &nc, &d) {
                out.push(Elem::Fn(d));
            }
        };
        let values = nc.carrier.elems(fuel.min(3));
        for v in &values {
            push(FnDesc::constant(v.clone()));
        }
        if discrete {
            push(FnDesc::Identity);
            push(FnDesc::Succ);
            for v in &values {
                for w in &values {
                    if v == w {
                        continue;
                    }
                    // The prefix length runs up to the full fuel: stage-i
                    // behavior needs flips at depth i to be representable.
                    for k in 1..=fuel {
                        push(FnDesc::eventually(vec![v.clone(); k as usize], w.clone()));
                    }
                }
            }
        }
        out
    });

    let (m2, n2) = (m.clone(), n.clone());
    let per = move |a: &Elem, ij: &Index, b: &Elem| -> Result<bool> {
        let (i, j) = split_pair(ij)?;
        per_fn(&m2, &n2, want_fn(a)?, want_fn(b)?, &i, &j, sample_fuel)
    };

    let (m3, n3) = (m.clone(), n.clone());
    let dom = move |a: &Elem| -> Result<SubsetDesc> {
        let f = want_fn(a)?;
        witness_desc(&m3, &n3, discrete, f, format!("stages({f})"))
            .ok_or_else(|| Error::Input(format!("no exact stage description for the shape {f}")))
    };

    let (m4, n4) = (m.clone(), n.clone());
    let points = move |ij: &Index| -> Result<Vec<Elem>> {
        let (i, j) = split_pair(ij)?;
        let dp = m4.points(&i)?;
        if dp.is_empty() {
            return Ok(vec![Elem::Fn(FnDesc::table(i.clone(), [], None))]);
        }
        let cp = n4.points(&j)?;
        if cp.is_empty() {
            return Ok(vec![]);
        }
        let cap = crate::system::default_state_cap();
        match (cp.len() as u128).checked_pow(dp.len() as u32) {
            Some(c) if c <= cap as u128 => {}
            _ => {
                return Err(Error::Resource(format!(
                    "stage {ij} has {}^{} tables, over the cap of {cap}",
                    cp.len(),
                    dp.len()
                )))
            }
        }
        let mut out = Vec::new();
        let mut digits = vec![0usize; dp.len()];
        'odometer: loop {
            out.push(Elem::Fn(FnDesc::table(
                i.clone(),
                dp.iter().enumerate().map(|(x, p)| (p.clone(), cp[digits[x]].clone())),
                None,
            )));
            for d in digits.iter_mut() {
                *d += 1;
                if *d < cp.len() {
                    continue 'odometer;
                }
                *d = 0;
            }
            break;
        }
        Ok(out)
    };

    let (m5, n5) = (m.clone(), n.clone());
    let pt = move |ij: &Index, a: &Elem| -> Result<Elem> {
        let (i, j) = split_pair(ij)?;
        canonical_table(&m5, &n5, want_fn(a)?, &i, &j)
    };
    let (m6, n6) = (m.clone(), n.clone());
    let pt_total = move |ij: &Index, a: &Elem| -> Result<Elem> {
        let (i, j) = split_pair(ij)?;
        canonical_table(&m6, &n6, want_fn(a)?, &i, &j)
    };

    let (m7, n7) = (m.clone(), n.clone());
    let eq = move |a: &Elem, b: &Elem| -> Result<bool> {
        match (a.as_fn(), b.as_fn()) {
            (Some(f), Some(g)) => {
                if f == g {
                    return Ok(true);
                }
                let mut probes = m7.carrier.elems(sample_fuel);
                if m7.has_points() {
                    for d in [f, g] {
                        if let Some(s) = table_stage(d) {
                            probes.extend(m7.points(&s)?);
                        }
                    }
                }
                probes.sort();
                probes.dedup();
                for p in &probes {
                    if !n7.elem_eq(&eval_fn(&m7, f, p)?, &eval_fn(&m7, g, p)?)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            (None, None) => Ok(a == b),
            _ => Ok(false),
        }
    };

    Ok(PerSpace::new(name, index, filter, carrier, per, dom)
        .with_points(points, pt)
        .with_total_pt(pt_total)
        .with_elem_eq(eq))
}

/// A description bundled with the two spaces it runs between.
#[derive(Clone)]
pub struct DescribedFn {
    pub name: String,
    pub dom: PerSpace,
    pub cod: PerSpace,
    pub desc: FnDesc,
}

impl DescribedFn {
    pub fn new(name: impl Into<String>, dom: PerSpace, cod: PerSpace, desc: FnDesc) -> DescribedFn {
        DescribedFn { name: name.into(), dom, cod, desc }
    }

    pub fn eval(&self, a: &Elem) -> Result<Elem> {
        eval_fn(&self.dom, &self.desc, a)
    }

    pub fn continuous_at(&self, i: &Index, j: &Index, sample_fuel: u64) -> Result<bool> {
        is_ij_continuous(&self.dom, &self.cod, &self.desc, i, j, sample_fuel)
    }
}

/// Where one description is stagewise continuous, scanned over a grid, with
/// the exact stage set and its filter verdict when the set can be written
/// down.
pub struct ContinuityReport {
    pub name: String,
    pub bound: Index,
    /// Stage pairs below the bound where the description relates to itself.
    pub witnesses: Vec<Index>,
    /// Declared stage set, when the shape has an exact one.
    pub described: Option<SubsetDesc>,
    /// Filter-largeness of the declared set. Unknown when no set is
    /// declared or the declaration failed its cross-check.
    pub filter_verdict: Verdict3,
    pub note: Option<String>,
}

impl ContinuityReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}: continuity below {}\n", self.name, self.bound));
        out.push_str(&format!("  witnessed at {} stage pair(s)", self.witnesses.len()));
        if !self.witnesses.is_empty() && self.witnesses.len() <= 12 {
            let list: Vec<String> = self.witnesses.iter().map(|w| w.to_string()).collect();
            out.push_str(&format!(": {}", list.join(", ")));
        }
        out.push('\n');
        match &self.described {
            Some(d) => out.push_str(&format!("  declared stage set: {}\n", d.name)),
            None => out.push_str("  declared stage set: none\n"),
        }
        out.push_str(&format!("  filter verdict: {}\n", self.filter_verdict));
        if let Some(n) = &self.note {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

/// Scan the stage grid below `bound` for continuity witnesses, cross-check
/// the declared stage set against the scan, and put the declared set to the
/// product filter. A verdict of `True` certifies continuity from a witness
/// above the grid; `False` on an exactly declared set refutes it outright.
pub fn continuity_report(f: &DescribedFn, bound: &Index, sample_fuel: u64) -> Result<ContinuityReport> {
    let index = IndexPoset::product(f.dom.index.clone(), f.cod.index.clone());
    let stages = index.enumerate_to(bound)?;
    let mut witnesses = Vec::new();
    for ij in &stages {
        let (i, j) = split_pair(ij)?;
        if per_fn(&f.dom, &f.cod, &f.desc, &f.desc, &i, &j, sample_fuel)? {
            witnesses.push(ij.clone());
        }
    }

    // Quantifiers and constants have shape-determined sets, so the
    // discreteness probe only runs for the remaining shapes.
    let discrete = match &f.desc {
        FnDesc::Forall | FnDesc::Const(_) => false,
        _ => discrete_domain(&f.dom),
    };
    let described = witness_desc(&f.dom, &f.cod, discrete, &f.desc, format!("stages({})", f.name));

    let mut note = None;
    if let Some(d) = &described {
        for ij in &stages {
            let claimed = d.member(&index, ij) == Verdict3::True;
            let actual = witnesses.contains(ij);
            if claimed != actual {
                note = Some(format!(
                    "declared set and scan disagree at {ij}: declared {claimed}, scanned {actual}"
                ));
                break;
            }
        }
    } else {
        note = Some("no exact stage set for this shape, scan only".to_string());
    }

    let filter = FilterSpec::product(f.dom.filter.clone(), f.cod.filter.clone());
    let filter_verdict = match &described {
        Some(d) if note.is_none() => filter.contains(d, bound)?,
        _ => Verdict3::Unknown,
    };

    Ok(ContinuityReport {
        name: f.name.clone(),
        bound: bound.clone(),
        witnesses,
        described,
        filter_verdict,
        note,
    })
}

fn atomize(e: &Elem) -> State {
    State::atom(e.to_string())
}

/// The table element of the function space, rewritten as a table state of
/// the stage system.
fn phi(e: &Elem) -> Result<State> {
    match e.as_fn() {
        Some(FnDesc::Table { entries, .. }) => {
            State::table(entries.iter().map(|(k, v)| (atomize(k), atomize(v))))
        }
        _ => input_err(format!("{e} is not a stage table")),
    }
}

const A_CARD: &str = "both constructions have the same number of stage states";
const A_BIJ: &str = "atomizing tables is a bijection between the stage states";
const A_STRONG: &str = "the coarse-stage relation on tables matches system descent through the bijection";
const A_EMB: &str = "the bijection commutes with upward tabulation and system embedding";
const A_PROJ: &str = "the bijection commutes with downward tabulation and system projection";

/// Match the function space of two staged relation spaces against the
/// function-space stage system of their induced systems: same states up to
/// atomization, same descent, same embeddings and projections.
pub fn check_apx_iso(m: &PerSpace, n: &PerSpace, bound: &Index, fuel: u64) -> Result<LawReport> {
    let fsp = fn_perspace(m, n, fuel)?;
    let msys = crate::perset::internal_system(m, fuel)?;
    let nsys = crate::perset::internal_system(n, fuel)?;
    let (mf, nf) = match (msys.factor(), nsys.factor()) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => {
            return input_err(format!(
                "both {} and {} must induce systems with embeddings",
                m.name, n.name
            ))
        }
    };
    let g = function_space(&mf, &nf)?;
    let stages = fsp.index.enumerate_to(bound)?;
    let mut report =
        LawReport::new(format!("{} against {}", fsp.name, g.system.name), bound.to_string());

    let mut points = Vec::new();
    for ij in &stages {
        points.push(fsp.points(ij)?);
    }

    let mut card = pass();
    'card: for (x, ij) in stages.iter().enumerate() {
        let want = g.system.stage(ij)?.len();
        if points[x].len() != want {
            card = fail(format!("{} tables against {} states at {ij}", points[x].len(), want));
            break 'card;
        }
    }
    report.push("APX_CARD", A_CARD, card.0, card.1, None);

    let mut bij = pass();
    'bij: for (x, ij) in stages.iter().enumerate() {
        let mut image: Vec<State> = Vec::new();
        for t in &points[x] {
            image.push(phi(t)?);
        }
        image.sort();
        let before = image.len();
        image.dedup();
        if image.len() != before {
            bij = fail(format!("two tables at {ij} atomize to the same state"));
            break 'bij;
        }
        let want: Vec<State> = g.system.stage(ij)?.as_ref().clone();
        if image != want {
            bij = fail(format!("atomized tables at {ij} are not the stage states"));
            break 'bij;
        }
    }
    report.push("APX_BIJ", A_BIJ, bij.0, bij.1, None);

    // The induced system reads descent as the logical relation at the
    // coarser stage pair. Comparing canonical tables instead would clamp
    // values that the coarse codomain stage cannot hold and overclaim.
    let mut strong = pass();
    'strong: for (xh, hi) in stages.iter().enumerate() {
        for (xl, lo) in stages.iter().enumerate() {
            if !fsp.index.leq(lo, hi)? {
                continue;
            }
            for fh in &points[xh] {
                for fl in &points[xl] {
                    let rel = fsp.per(fh, lo, fl)?;
                    let sys = g.system.descends((hi, &phi(fh)?), (lo, &phi(fl)?))?;
                    if rel != sys {
                        strong = fail(format!(
                            "descent of {fh} at {hi} to {fl} at {lo}: relation {rel}, system {sys}"
                        ));
                        break 'strong;
                    }
                }
            }
        }
    }
    report.push("APX_STRONG", A_STRONG, strong.0, strong.1, None);

    let mut embl = pass();
    'emb: for hi in &stages {
        for (xl, lo) in stages.iter().enumerate() {
            if !fsp.index.leq(lo, hi)? {
                continue;
            }
            for fl in &points[xl] {
                let up = phi(&fsp.pt_total(hi, fl)?)?;
                let sys = g.emb(lo, hi, &phi(fl)?)?;
                if up != sys {
                    embl = fail(format!(
                        "{fl} from {lo} to {hi}: tabulation gives {up}, embedding gives {sys}"
                    ));
                    break 'emb;
                }
            }
        }
    }
    report.push("APX_EMB", A_EMB, embl.0, embl.1, None);

    let mut projl = pass();
    'proj: for (xh, hi) in stages.iter().enumerate() {
        for lo in &stages {
            if !fsp.index.leq(lo, hi)? {
                continue;
            }
            for fh in &points[xh] {
                let down = phi(&fsp.pt_total(lo, fh)?)?;
                let sys = g.proj(hi, lo, &phi(fh)?)?;
                if down != sys {
                    projl = fail(format!(
                        "{fh} from {hi} to {lo}: tabulation gives {down}, projection gives {sys}"
                    ));
                    break 'proj;
                }
            }
        }
    }
    report.push("APX_PROJ", A_PROJ, projl.0, projl.1, None);

    Ok(report)
}

fn pass() -> (crate::report::Verdict, Option<String>) {
    (crate::report::Verdict::Pass, None)
}

fn fail(msg: String) -> (crate::report::Verdict, Option<String>) {
    (crate::report::Verdict::Fail, Some(msg))
}

const C_ARG: &str = "the value at the argument matches the value at its stage point";
const C_TAB: &str = "the value at the stage point matches the canonical table's value";
const C_FIX: &str = "the canonical table cannot tell the argument from its stage point";

/// For a description continuous at `(i, j)` and an argument in the stage-`i`
/// domain, walk the evaluation chain: the direct value, the value at the
/// argument's stage point, and the canonical table's value all agree at
/// stage `j`, and the table is blind to the difference between argument and
/// point. Preconditions are input errors, not failures.
pub fn eval_chain_check(
    f: &DescribedFn,
    a: &Elem,
    i: &Index,
    j: &Index,
    sample_fuel: u64,
) -> Result<LawReport> {
    if !f.continuous_at(i, j, sample_fuel)? {
        return input_err(format!("{} is not continuous at ({i}, {j})", f.name));
    }
    if !f.dom.in_dom(a, i)? {
        return input_err(format!("{a} is outside the stage-{i} domain of {}", f.dom.name));
    }
    let mut report =
        LawReport::new(format!("{} evaluation chain at ({i}, {j})", f.name), format!("({i}, {j})"));

    let p = f.dom.pt(i, a)?;
    let direct = f.eval(a)?;
    let at_point = f.eval(&p)?;
    let table = canonical_table(&f.dom, &f.cod, &f.desc, i, j)?;
    let tdesc = want_fn(&table)?;
    let tab_a = eval_fn(&f.dom, tdesc, a)?;
    let tab_p = eval_fn(&f.dom, tdesc, &p)?;

    let r1 = if f.cod.per(&direct, j, &at_point)? {
        pass()
    } else {
        fail(format!("{direct} and {at_point} split at stage {j}"))
    };
    report.push("CHAIN_ARG", C_ARG, r1.0, r1.1, Some(format!("argument {a}, point {p}")));

    let r2 = if f.cod.per(&at_point, j, &tab_a)? {
        pass()
    } else {
        fail(format!("{at_point} and table value {tab_a} split at stage {j}"))
    };
    report.push("CHAIN_TAB", C_TAB, r2.0, r2.1, None);

    let r3 = if tab_a == tab_p {
        pass()
    } else {
        fail(format!("table sends {a} to {tab_a} but its point {p} to {tab_p}"))
    };
    report.push("CHAIN_FIX", C_FIX, r3.0, r3.1, None);

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{bool_perspace, nat_perspace};
    use crate::perset::{check_perspace, induced_target, PerLevel};

    fn nn() -> (PerSpace, PerSpace) {
        (nat_perspace(), nat_perspace())
    }

    fn pij(i: u64, j: u64) -> Index {
        Index::pair(Index::Nat(i), Index::Nat(j))
    }

    #[test]
    fn identity_relates_to_itself_on_the_diagonal() {
        let (m, n) = nn();
        assert!(per_fn(&m, &n, &FnDesc::Identity, &FnDesc::Identity, &Index::Nat(2), &Index::Nat(2), 6)
            .unwrap());
        assert!(!per_fn(&m, &n, &FnDesc::Identity, &FnDesc::Succ, &Index::Nat(2), &Index::Nat(3), 6)
            .unwrap());
    }

    #[test]
    fn successor_needs_one_extra_stage() {
        let (m, n) = nn();
        assert!(is_ij_continuous(&m, &n, &FnDesc::Succ, &Index::Nat(2), &Index::Nat(3), 6).unwrap());
        assert!(!is_ij_continuous(&m, &n, &FnDesc::Succ, &Index::Nat(2), &Index::Nat(2), 6).unwrap());
    }

    #[test]
    fn stage_tables_are_counted_by_the_closed_form() {
        let (m, n) = nn();
        let f = fn_perspace(&m, &n, 6).unwrap();
        assert_eq!(f.points(&pij(2, 2)).unwrap().len(), 4);
        assert_eq!(f.points(&pij(3, 3)).unwrap().len(), 27);
    }

    #[test]
    fn tabulation_clamps_values_into_the_target_stage() {
        let (m, n) = nn();
        let f = fn_perspace(&m, &n, 6).unwrap();
        let t = f.pt_total(&pij(2, 2), &Elem::Fn(FnDesc::Succ)).unwrap();
        let want = FnDesc::table(
            Index::Nat(2),
            [(Elem::Nat(0), Elem::Nat(1)), (Elem::Nat(1), Elem::Nat(1))],
            None,
        );
        assert_eq!(t, Elem::Fn(want));
    }

    #[test]
    fn stage_tables_are_fixed_by_tabulation() {
        let (m, n) = nn();
        let f = fn_perspace(&m, &n, 6).unwrap();
        let ij = pij(2, 2);
        for t in f.points(&ij).unwrap() {
            let again = f.pt_total(&ij, &t).unwrap();
            assert!(f.elem_eq(&again, &t).unwrap(), "{t} moved to {again}");
        }
    }

    #[test]
    fn tabulation_composes_downward() {
        let (m, n) = nn();
        let f = fn_perspace(&m, &n, 6).unwrap();
        let (hi, lo) = (pij(3, 3), pij(2, 2));
        for d in [FnDesc::Identity, FnDesc::Succ, FnDesc::constant(Elem::Nat(1))] {
            let e = Elem::Fn(d);
            let via = f.pt_total(&lo, &f.pt_total(&hi, &e).unwrap()).unwrap();
            let direct = f.pt_total(&lo, &e).unwrap();
            assert!(f.elem_eq(&via, &direct).unwrap());
        }
    }

    #[test]
    fn continuity_survives_raising_both_stages() {
        let (m, n) = nn();
        assert!(is_ij_continuous(&m, &n, &FnDesc::Succ, &Index::Nat(3), &Index::Nat(4), 6).unwrap());
        assert!(is_ij_continuous(&m, &n, &FnDesc::Identity, &Index::Nat(3), &Index::Nat(3), 6).unwrap());
    }

    #[test]
    fn identity_grid_is_the_upper_triangle() {
        let (m, n) = nn();
        let f = DescribedFn::new("id", m, n, FnDesc::Identity);
        let rep = continuity_report(&f, &pij(5, 5), 6).unwrap();
        let want: Vec<Index> = {
            let mut v = Vec::new();
            for i in 1..=5 {
                for j in 1..=5 {
                    if j >= i {
                        v.push(pij(i, j));
                    }
                }
            }
            v.sort();
            v
        };
        let mut got = rep.witnesses.clone();
        got.sort();
        assert_eq!(got, want);
        assert_eq!(rep.filter_verdict, Verdict3::True);
        assert!(rep.note.is_none());
    }

    #[test]
    fn constant_grid_is_everything() {
        let (m, n) = nn();
        let f = DescribedFn::new("const 0", m, n, FnDesc::constant(Elem::Nat(0)));
        let rep = continuity_report(&f, &pij(4, 4), 6).unwrap();
        assert_eq!(rep.witnesses.len(), 16);
        assert_eq!(rep.filter_verdict, Verdict3::True);
    }

    #[test]
    fn eventual_constant_grid_waits_for_the_largest_value() {
        let (m, n) = nn();
        let desc = FnDesc::eventually(vec![Elem::Nat(3), Elem::Nat(1)], Elem::Nat(0));
        let f = DescribedFn::new("burst", m, n, desc);
        let rep = continuity_report(&f, &pij(4, 4), 6).unwrap();
        let want: Vec<Index> = (1..=4).map(|i| pij(i, 4)).collect();
        let mut got = rep.witnesses.clone();
        got.sort();
        assert_eq!(got, want);
        assert_eq!(rep.filter_verdict, Verdict3::True);
        assert!(rep.note.is_none());
    }

    #[test]
    fn quantifier_has_an_empty_grid_and_an_exact_refutation() {
        let dom = fn_perspace(&nat_perspace(), &bool_perspace(), 8).unwrap();
        let f = DescribedFn::new("forall", dom, bool_perspace(), FnDesc::Forall);
        let bound = Index::pair(Index::pair(Index::Nat(6), Index::Unit), Index::Unit);
        let rep = continuity_report(&f, &bound, 8).unwrap();
        assert!(rep.witnesses.is_empty());
        assert!(rep.described.is_some());
        assert_eq!(rep.filter_verdict, Verdict3::False);
    }

    #[test]
    fn quantifier_separates_a_related_pair_at_every_stage() {
        let dom = fn_perspace(&nat_perspace(), &bool_perspace(), 8).unwrap();
        let cod = bool_perspace();
        for i in 1..=6u64 {
            let a = FnDesc::constant(Elem::Bool(true));
            let b = FnDesc::eventually(vec![Elem::Bool(true); i as usize], Elem::Bool(false));
            let ij = Index::pair(Index::Nat(i), Index::Unit);
            assert!(dom.per(&Elem::Fn(a.clone()), &ij, &Elem::Fn(b.clone())).unwrap());
            let qa = eval_fn(&dom, &FnDesc::Forall, &Elem::Fn(a)).unwrap();
            let qb = eval_fn(&dom, &FnDesc::Forall, &Elem::Fn(b)).unwrap();
            assert!(!cod.per(&qa, &Index::Unit, &qb).unwrap());
        }
    }

    #[test]
    fn both_function_constructions_are_isomorphic() {
        let rep = check_apx_iso(&nat_perspace(), &nat_perspace(), &pij(3, 3), 6).unwrap();
        assert!(rep.all_passed(), "{}", rep.render_text());
        let rep = check_apx_iso(
            &nat_perspace(),
            &bool_perspace(),
            &Index::pair(Index::Nat(3), Index::Unit),
            6,
        )
        .unwrap();
        assert!(rep.all_passed(), "{}", rep.render_text());
    }

    #[test]
    fn evaluation_chain_holds_for_identity_and_successor() {
        let (m, n) = nn();
        let id = DescribedFn::new("id", m.clone(), n.clone(), FnDesc::Identity);
        let rep = eval_chain_check(&id, &Elem::Nat(2), &Index::Nat(3), &Index::Nat(3), 6).unwrap();
        assert!(rep.all_passed(), "{}", rep.render_text());

        let succ = DescribedFn::new("succ", m, n, FnDesc::Succ);
        let rep = eval_chain_check(&succ, &Elem::Nat(1), &Index::Nat(2), &Index::Nat(3), 6).unwrap();
        assert!(rep.all_passed(), "{}", rep.render_text());
        assert!(eval_chain_check(&succ, &Elem::Nat(1), &Index::Nat(2), &Index::Nat(2), 6).is_err());
    }

    #[test]
    fn function_space_passes_the_space_laws() {
        let f = fn_perspace(&nat_perspace(), &nat_perspace(), 6).unwrap();
        let rep = check_perspace(&f, PerLevel::Perset, &pij(3, 3), 6).unwrap();
        assert!(rep.all_passed(), "{}", rep.render_text());
    }

    #[test]
    fn function_space_coheres_but_is_not_separated_below_a_bound() {
        use crate::report::Verdict;
        let f = fn_perspace(&nat_perspace(), &nat_perspace(), 6).unwrap();
        let t = induced_target(&f, 6).unwrap();
        let rep = crate::limit::check_target(&t, &pij(2, 2), 6).unwrap();
        // Families, embeddings, projections, domains, and completion all
        // hold at the bound.
        for law in ["TDOM", "TPRE", "TEMB", "TPROJ", "TPROJ_DEF", "TPROJ_PROP", "TEP_TOP", "TCOMPL"]
        {
            assert_eq!(rep.verdict_of(law), Some(Verdict::Pass), "{law}\n{}", rep.render_text());
        }
        // Separation cannot hold at any finite bound: a description that
        // flips its value past the bound is indistinguishable below it
        // from the matching constant. The quantifier's discontinuity
        // lives on exactly this gap.
        assert_eq!(rep.verdict_of("TEXT"), Some(Verdict::Fail), "{}", rep.render_text());
        let cex = rep
            .laws
            .iter()
            .find(|e| e.law == "TEXT")
            .and_then(|e| e.counterexample.clone())
            .unwrap();
        assert!(cex.contains("evc"), "{cex}");
        assert_eq!(rep.verdict_of("TMAX"), Some(Verdict::UnknownAtBound), "{}", rep.render_text());
    }

    #[test]
    fn composition_evaluates_inside_out_and_rejects_outer_tables() {
        let (m, n) = nn();
        let two = FnDesc::compose(FnDesc::Succ, FnDesc::Succ);
        assert_eq!(eval_fn(&m, &two, &Elem::Nat(1)).unwrap(), Elem::Nat(3));
        assert!(is_ij_continuous(&m, &n, &two, &Index::Nat(2), &Index::Nat(4), 6).unwrap());
        assert!(!is_ij_continuous(&m, &n, &two, &Index::Nat(2), &Index::Nat(3), 6).unwrap());

        let tab = FnDesc::table(Index::Nat(2), [(Elem::Nat(0), Elem::Nat(0))], None);
        let bad = FnDesc::compose(tab, FnDesc::Succ);
        assert!(eval_fn(&m, &bad, &Elem::Nat(0)).is_err());
    }

    #[test]
    fn quantifier_values_follow_the_committed_entries() {
        assert!(forall_value(&FnDesc::constant(Elem::Bool(true))).unwrap());
        assert!(!forall_value(&FnDesc::eventually(vec![Elem::Bool(true)], Elem::Bool(false)))
            .unwrap());
        assert!(forall_value(&FnDesc::eventually(vec![], Elem::Bool(true))).unwrap());
        let t = FnDesc::table(
            Index::Nat(2),
            [(Elem::Nat(0), Elem::Bool(true)), (Elem::Nat(1), Elem::Bool(false))],
            None,
        );
        assert!(!forall_value(&t).unwrap());
        assert!(forall_value(&FnDesc::Identity).is_err());
    }
}
