//! Stage-indexed partial equivalence relations over one carrier.
//!
//! A space assigns to every stage a partial equivalence relation on a fixed
//! element set, read "indistinguishable at this stage's resolution". The
//! structure comes in three levels, each adding to the previous one:
//!
//! * fset: the stage relations alone. Checked laws: partial equivalence per
//!   stage, filter-large stage sets per element, and restriction of finer
//!   agreement to coarser shared stages.
//! * pointed: every stage owns a finite point set, and a pointing map sends
//!   each element of the stage's domain to the one point of its class.
//! * perset: the pointing map extends to a total canonicalization map on
//!   the whole carrier, compatible across stages.
//!
//! Every space induces a stage system whose states are its stage points (or
//! its stage classes when no points are given), and the carrier is then a
//! limit-style structure over that induced system. Point sequences, their
//! limit elements, and the convergence bridge connect the two readings.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::elem::{Elem, FamilyData};
use crate::index::{FilterSpec, Index, IndexPoset, SubsetDesc, Verdict3, SCAN_SLACK};
use crate::limit::{
    enumerate_dynamic_elements, families_compatible, Carrier, ConsistentFamily, Target,
};
use crate::report::{LawReport, Verdict};
use crate::system::{FactorSystem, StageSystem, State, SystemRef};
use crate::{input_err, Error, Result};

/// How much structure a space claims, lowest to highest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum PerLevel {
    /// Stage relations only.
    Fset,
    /// Stage point sets with a pointing map on each stage's domain.
    Pointed,
    /// A total canonicalization map extending the pointing map.
    Perset,
}

impl std::fmt::Display for PerLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PerLevel::Fset => "fset",
            PerLevel::Pointed => "pointed",
            PerLevel::Perset => "perset",
        };
        f.write_str(s)
    }
}

type PerFn = Rc<dyn Fn(&Elem, &Index, &Elem) -> Result<bool>>;
type DomFn = Rc<dyn Fn(&Elem) -> Result<SubsetDesc>>;
type PointsFn = Rc<dyn Fn(&Index) -> Result<Vec<Elem>>>;
type PointFn = Rc<dyn Fn(&Index, &Elem) -> Result<Elem>>;
type EqFn = Rc<dyn Fn(&Elem, &Elem) -> Result<bool>>;

/// A carrier with one partial equivalence relation per stage and optional
/// point structure on top of it.
#[derive(Clone)]
pub struct PerSpace {
    pub name: String,
    pub index: IndexPoset,
    pub filter: FilterSpec,
    pub carrier: Carrier,
    per: PerFn,
    dom: DomFn,
    points: Option<PointsFn>,
    pt: Option<PointFn>,
    pt_total: Option<PointFn>,
    eq: Option<EqFn>,
}

impl PerSpace {
    pub fn new(
        name: impl Into<String>,
        index: IndexPoset,
        filter: FilterSpec,
        carrier: Carrier,
        per: impl Fn(&Elem, &Index, &Elem) -> Result<bool> + 'static,
        dom: impl Fn(&Elem) -> Result<SubsetDesc> + 'static,
    ) -> PerSpace {
        PerSpace {
            name: name.into(),
            index,
            filter,
            carrier,
            per: Rc::new(per),
            dom: Rc::new(dom),
            points: None,
            pt: None,
            pt_total: None,
            eq: None,
        }
    }

    /// Add stage point sets and the pointing map. The pointing map is only
    /// ever evaluated on elements of the stage's domain.
    pub fn with_points(
        mut self,
        points: impl Fn(&Index) -> Result<Vec<Elem>> + 'static,
        pt: impl Fn(&Index, &Elem) -> Result<Elem> + 'static,
    ) -> PerSpace {
        self.points = Some(Rc::new(points));
        self.pt = Some(Rc::new(pt));
        self
    }

    /// Add the total canonicalization map. Call after `with_points`.
    pub fn with_total_pt(
        mut self,
        pt_total: impl Fn(&Index, &Elem) -> Result<Elem> + 'static,
    ) -> PerSpace {
        self.pt_total = Some(Rc::new(pt_total));
        self
    }

    /// Override element equality. Spaces whose descriptions can denote one
    /// element in several ways compare by observation instead of by shape;
    /// everything else keeps structural equality.
    pub fn with_elem_eq(
        mut self,
        eq: impl Fn(&Elem, &Elem) -> Result<bool> + 'static,
    ) -> PerSpace {
        self.eq = Some(Rc::new(eq));
        self
    }

    /// The strongest level this space carries structure for.
    pub fn max_level(&self) -> PerLevel {
        if self.points.is_some() && self.pt.is_some() {
            if self.pt_total.is_some() {
                PerLevel::Perset
            } else {
                PerLevel::Pointed
            }
        } else {
            PerLevel::Fset
        }
    }

    pub fn per(&self, a: &Elem, i: &Index, b: &Elem) -> Result<bool> {
        (self.per)(a, i, b)
    }

    /// Membership in the stage's domain: related to itself there.
    pub fn in_dom(&self, a: &Elem, i: &Index) -> Result<bool> {
        self.per(a, i, a)
    }

    /// Declared stage set of `a`, checked against where `a` actually
    /// inhabits stage domains.
    pub fn dom_desc(&self, a: &Elem) -> Result<SubsetDesc> {
        (self.dom)(a)
    }

    pub fn has_points(&self) -> bool {
        self.points.is_some() && self.pt.is_some()
    }

    pub fn has_total_pt(&self) -> bool {
        self.pt_total.is_some()
    }

    /// The stage's point set, sorted.
    pub fn points(&self, i: &Index) -> Result<Vec<Elem>> {
        match &self.points {
            Some(f) => {
                let mut v = f(i)?;
                v.sort();
                v.dedup();
                Ok(v)
            }
            None => input_err(format!("space {} has no stage points", self.name)),
        }
    }

    /// The pointing map. Meaningful on the stage's domain only.
    pub fn pt(&self, i: &Index, a: &Elem) -> Result<Elem> {
        match &self.pt {
            Some(f) => f(i, a),
            None => input_err(format!("space {} has no pointing map", self.name)),
        }
    }

    /// The total canonicalization map.
    pub fn pt_total(&self, i: &Index, a: &Elem) -> Result<Elem> {
        match &self.pt_total {
            Some(f) => f(i, a),
            None => {
                input_err(format!("space {} has no total canonicalization map", self.name))
            }
        }
    }

    /// Element equality as this space sees it.
    pub fn elem_eq(&self, a: &Elem, b: &Elem) -> Result<bool> {
        match &self.eq {
            Some(f) => f(a, b),
            None => Ok(a == b),
        }
    }
}

/// Membership of `x` in a point set under the space's element equality.
fn holds_point(space: &PerSpace, set: &[Elem], x: &Elem) -> Result<bool> {
    if set.binary_search(x).is_ok() {
        return Ok(true);
    }
    for p in set {
        if space.elem_eq(p, x)? {
            return Ok(true);
        }
    }
    Ok(false)
}

const P_PER: &str =
    "every stage relation is symmetric, transitive, and relates only elements of its domain";
const P_DENSE: &str =
    "every element inhabits stage domains exactly at its declared, filter-large stage set";
const P_APPROX: &str = "agreement at a finer stage restricts to every coarser stage both inhabit";
const P_PT1: &str = "stage point sets grow along the stage order";
const P_PT2: &str = "the pointing map sends related elements to the one point of their class";
const P_PT3: &str =
    "pointing at a finer stage stays inside every coarser domain the element inhabits";
const P_PTFACTS: &str =
    "pointing identities: points persist upward, detect agreement, and are fixed points";
const P_PTCOMM: &str = "pointing maps at comparable stages commute on shared domains";
const P_EXT1: &str =
    "the canonicalization map lands in the stage points and extends the pointing map";
const P_EXT2: &str = "canonicalizing after a finer canonicalization equals canonicalizing directly";
const P_EXT3: &str = "canonicalizing at a finer stage preserves membership in coarser domains";
const P_CHAR: &str = "the five condensed clauses hold and re-derive finer-to-coarser agreement";
const P_EXTFACTS: &str =
    "canonicalization identities: kernel ordering, agreement detection, fixed points, commutation";

fn failv(msg: String) -> (Verdict, Option<String>) {
    (Verdict::Fail, Some(msg))
}

/// Run the law suite for `space` at the requested level, exhaustively over
/// the stages up to `bound` and the carrier samples the fuel yields. Laws
/// above the requested level are reported as skipped.
pub fn check_perspace(
    space: &PerSpace,
    level: PerLevel,
    bound: &Index,
    fuel: u64,
) -> Result<LawReport> {
    if level > space.max_level() {
        return input_err(format!(
            "space {} carries {} structure, cannot check it at the {} level",
            space.name,
            space.max_level(),
            level
        ));
    }
    let stages = space.index.enumerate_to(bound)?;
    let samples = space.carrier.elems(fuel);
    let mut report = LawReport::new(space.name.clone(), bound.to_string());
    if samples.is_empty() {
        return input_err(format!("space {} has no sample elements", space.name));
    }

    // Domain membership of every sample at every stage, computed once.
    let mut dmx: Vec<Vec<bool>> = Vec::new();
    for a in &samples {
        let mut row = Vec::new();
        for i in &stages {
            row.push(space.in_dom(a, i)?);
        }
        dmx.push(row);
    }
    // Comparable stage pairs, coarser first.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for ip in 0..stages.len() {
        for jp in 0..stages.len() {
            if space.index.leq_unchecked(&stages[ip], &stages[jp]) {
                pairs.push((ip, jp));
            }
        }
    }

    // PER
    let mut entry = (Verdict::Pass, None);
    'per: for (ip, i) in stages.iter().enumerate() {
        for (xa, a) in samples.iter().enumerate() {
            for b in &samples {
                if !space.per(a, i, b)? {
                    continue;
                }
                if !space.per(b, i, a)? {
                    entry = failv(format!("{a} ~ {b} at {i} but not {b} ~ {a}"));
                    break 'per;
                }
                if !dmx[xa][ip] {
                    entry = failv(format!("{a} ~ {b} at {i} with {a} outside the domain there"));
                    break 'per;
                }
                for c in &samples {
                    if space.per(b, i, c)? && !space.per(a, i, c)? {
                        entry = failv(format!("{a} ~ {b} ~ {c} at {i} but not {a} ~ {c}"));
                        break 'per;
                    }
                }
            }
        }
    }
    report.push("PER", P_PER, entry.0, entry.1, Some(format!("{} samples", samples.len())));

    // DENSE
    let mut entry = (Verdict::Pass, None);
    'dense: for (x, a) in samples.iter().enumerate() {
        let desc = space.dom_desc(a)?;
        for (ip, i) in stages.iter().enumerate() {
            let has = dmx[x][ip];
            match desc.member(&space.index, i) {
                Verdict3::True if !has => {
                    entry = failv(format!("{a}: declared at {i}, not in the domain there"));
                    break 'dense;
                }
                Verdict3::False if has => {
                    entry = failv(format!("{a}: inhabits the domain at undeclared stage {i}"));
                    break 'dense;
                }
                Verdict3::Unknown => {
                    entry = (
                        Verdict::UnknownAtBound,
                        Some(format!("{a}: declaration undecided at {i}")),
                    );
                }
                _ => {}
            }
        }
        match space.filter.contains(&desc, bound)? {
            Verdict3::True => {}
            Verdict3::False => {
                entry = failv(format!("{a}: stage set {} is not filter-large", desc.name));
                break 'dense;
            }
            Verdict3::Unknown => {
                entry = (Verdict::UnknownAtBound, Some(format!("{a}: stage set {}", desc.name)));
            }
        }
    }
    let dense_entry = entry.clone();
    report.push("DENSE", P_DENSE, entry.0, entry.1, None);

    // APPROX
    let mut entry = (Verdict::Pass, None);
    'apx: for &(ip, jp) in &pairs {
        if ip == jp {
            continue;
        }
        let (lo, hi) = (&stages[ip], &stages[jp]);
        for (xa, a) in samples.iter().enumerate() {
            for (xb, b) in samples.iter().enumerate() {
                if space.per(a, hi, b)? && dmx[xa][ip] && dmx[xb][ip] && !space.per(a, lo, b)? {
                    entry = failv(format!(
                        "{a} ~ {b} at {hi}, both inhabit {lo}, no agreement there"
                    ));
                    break 'apx;
                }
            }
        }
    }
    report.push("APPROX", P_APPROX, entry.0, entry.1, None);

    let pointed = level >= PerLevel::Pointed;
    let total = level >= PerLevel::Perset;
    let mut pts: Vec<Vec<Elem>> = Vec::new();
    if pointed {
        for i in &stages {
            pts.push(space.points(i)?);
        }
    }

    // PT1
    let entry = if pointed {
        let mut e = (Verdict::Pass, None);
        'pt1: for &(ip, jp) in &pairs {
            for p in &pts[ip] {
                if !holds_point(space, &pts[jp], p)? {
                    e = failv(format!(
                        "point {p} of {} is missing at {}",
                        stages[ip], stages[jp]
                    ));
                    break 'pt1;
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("PT1", P_PT1, entry.0, entry.1, None);

    // PT2
    let entry = if pointed {
        let mut e = (Verdict::Pass, None);
        'pt2: for (ip, i) in stages.iter().enumerate() {
            for a in &samples {
                for b in &samples {
                    if !space.per(a, i, b)? {
                        continue;
                    }
                    let pa = space.pt(i, a)?;
                    let pb = space.pt(i, b)?;
                    if !space.elem_eq(&pa, &pb)? {
                        e = failv(format!(
                            "{a} ~ {b} at {i} but their points {pa} and {pb} differ"
                        ));
                        break 'pt2;
                    }
                    if !holds_point(space, &pts[ip], &pa)? {
                        e = failv(format!("{a} points to {pa} at {i}, not a stage point"));
                        break 'pt2;
                    }
                    if !space.per(a, i, &pa)? {
                        e = failv(format!("{a} at {i} is not related to its point {pa}"));
                        break 'pt2;
                    }
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("PT2", P_PT2, entry.0, entry.1, None);

    // PT3
    let entry = if pointed {
        let mut e = (Verdict::Pass, None);
        'pt3: for &(ip, jp) in &pairs {
            if ip == jp {
                continue;
            }
            for (xa, a) in samples.iter().enumerate() {
                if dmx[xa][ip] && dmx[xa][jp] {
                    let p = space.pt(&stages[jp], a)?;
                    if !space.in_dom(&p, &stages[ip])? {
                        e = failv(format!(
                            "point {p} of {a} at {} leaves the domain at {}",
                            stages[jp], stages[ip]
                        ));
                        break 'pt3;
                    }
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("PT3", P_PT3, entry.0, entry.1, None);

    // PTFACTS, five parts
    let entry = if pointed {
        let mut e = (Verdict::Pass, None);
        'ptf: {
            for &(ip, jp) in &pairs {
                let (lo, hi) = (&stages[ip], &stages[jp]);
                for p in &pts[ip] {
                    // part 1: coarser points inhabit finer domains
                    if !space.in_dom(p, hi)? {
                        e = failv(format!(
                            "part 1: point {p} of {lo} is outside the domain at {hi}"
                        ));
                        break 'ptf;
                    }
                    // part 4: points are fixed by pointing at finer stages
                    let moved = space.pt(hi, p)?;
                    if !space.elem_eq(&moved, p)? {
                        e = failv(format!(
                            "part 4: point {p} of {lo} moves under pointing at {hi}"
                        ));
                        break 'ptf;
                    }
                }
                // part 5: a coarse point stays put when pointed again higher up
                for (xa, a) in samples.iter().enumerate() {
                    if !dmx[xa][ip] {
                        continue;
                    }
                    let q = space.pt(lo, a)?;
                    let repointed = space.pt(hi, &q)?;
                    if !space.elem_eq(&repointed, &q)? {
                        e = failv(format!("part 5: the point {q} of {a} at {lo} moves at {hi}"));
                        break 'ptf;
                    }
                }
            }
            for (ip, i) in stages.iter().enumerate() {
                // part 2: pointing detects agreement on the domain
                for (xa, a) in samples.iter().enumerate() {
                    if !dmx[xa][ip] {
                        continue;
                    }
                    for (xb, b) in samples.iter().enumerate() {
                        if !dmx[xb][ip] {
                            continue;
                        }
                        let agree = space.per(a, i, b)?;
                        let same = space.elem_eq(&space.pt(i, a)?, &space.pt(i, b)?)?;
                        if agree != same {
                            e = failv(format!(
                                "part 2: at {i}, agreement of {a} and {b} is {agree} but point equality is {same}"
                            ));
                            break 'ptf;
                        }
                    }
                }
                // part 3: b points to a exactly when a is a stage point of b's class
                let mut cands = pts[ip].clone();
                cands.extend(samples.iter().cloned());
                cands.sort();
                cands.dedup();
                for (xb, b) in samples.iter().enumerate() {
                    if !dmx[xb][ip] {
                        continue;
                    }
                    let pb = space.pt(i, b)?;
                    for a in &cands {
                        let direct = space.elem_eq(a, &pb)?;
                        let by_class = holds_point(space, &pts[ip], a)? && space.per(a, i, b)?;
                        if direct != by_class {
                            e = failv(format!(
                                "part 3: at {i}, {a} against the point of {b}: directly {direct}, by class {by_class}"
                            ));
                            break 'ptf;
                        }
                    }
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("PTFACTS", P_PTFACTS, entry.0, entry.1, None);

    // PTCOMM
    let entry = if pointed {
        let mut e = (Verdict::Pass, None);
        'ptc: for &(ip, jp) in &pairs {
            if ip == jp {
                continue;
            }
            let (lo, hi) = (&stages[ip], &stages[jp]);
            for (xa, a) in samples.iter().enumerate() {
                if !(dmx[xa][ip] && dmx[xa][jp]) {
                    continue;
                }
                let plo = space.pt(lo, a)?;
                let phi = space.pt(hi, a)?;
                if !space.elem_eq(&space.pt(lo, &phi)?, &plo)? {
                    e = failv(format!(
                        "{a}: pointing at {hi} then {lo} differs from pointing at {lo} directly"
                    ));
                    break 'ptc;
                }
                if !space.elem_eq(&space.pt(hi, &plo)?, &plo)? {
                    e = failv(format!("{a}: the point at {lo} is not fixed under pointing at {hi}"));
                    break 'ptc;
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("PTCOMM", P_PTCOMM, entry.0, entry.1, None);

    // EXT1
    let entry = if total {
        let mut e = (Verdict::Pass, None);
        'e1: for (ip, i) in stages.iter().enumerate() {
            for (xa, a) in samples.iter().enumerate() {
                let t = space.pt_total(i, a)?;
                if !holds_point(space, &pts[ip], &t)? {
                    e = failv(format!("canonical image {t} of {a} at {i} is not a stage point"));
                    break 'e1;
                }
                if dmx[xa][ip] && !space.elem_eq(&t, &space.pt(i, a)?)? {
                    e = failv(format!("total and partial pointing disagree on {a} at {i}"));
                    break 'e1;
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("EXT1", P_EXT1, entry.0, entry.1, None);

    // EXT2
    let entry = if total {
        let mut e = (Verdict::Pass, None);
        'e2: for &(ip, jp) in &pairs {
            let (lo, hi) = (&stages[ip], &stages[jp]);
            for a in &samples {
                let via = space.pt_total(lo, &space.pt_total(hi, a)?)?;
                if !space.elem_eq(&via, &space.pt_total(lo, a)?)? {
                    e = failv(format!(
                        "canonicalizing {a} through {hi} then {lo} shifts its image"
                    ));
                    break 'e2;
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("EXT2", P_EXT2, entry.0, entry.1, None);

    // EXT3
    let entry = if total {
        let mut e = (Verdict::Pass, None);
        'e3: for &(ip, jp) in &pairs {
            if ip == jp {
                continue;
            }
            let (lo, hi) = (&stages[ip], &stages[jp]);
            for (xa, a) in samples.iter().enumerate() {
                if !dmx[xa][ip] {
                    continue;
                }
                let t = space.pt_total(hi, a)?;
                if !space.in_dom(&t, lo)? {
                    e = failv(format!(
                        "canonical image {t} of {a} at {hi} leaves the domain at {lo}"
                    ));
                    break 'e3;
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("EXT3", P_EXT3, entry.0, entry.1, None);

    // CHAR: the condensed clause set, then the chain that recovers APPROX
    let entry = if total {
        let mut e = (Verdict::Pass, None);
        'cha: {
            // clause 1: the stage-set law again
            match dense_entry.0 {
                Verdict::Fail => {
                    e = (Verdict::Fail, dense_entry.1.clone().map(|m| format!("clause 1: {m}")));
                    break 'cha;
                }
                Verdict::UnknownAtBound => {
                    e = (
                        Verdict::UnknownAtBound,
                        dense_entry.1.clone().map(|m| format!("clause 1: {m}")),
                    );
                }
                _ => {}
            }
            // clause 2: point sets grow
            for &(ip, jp) in &pairs {
                for p in &pts[ip] {
                    if !holds_point(space, &pts[jp], p)? {
                        e = failv(format!(
                            "clause 2: point {p} of {} is missing at {}",
                            stages[ip], stages[jp]
                        ));
                        break 'cha;
                    }
                }
            }
            // clause 3: related elements share their canonical image inside the class
            for i in &stages {
                for a in &samples {
                    for b in &samples {
                        if !space.per(a, i, b)? {
                            continue;
                        }
                        let ta = space.pt_total(i, a)?;
                        let tb = space.pt_total(i, b)?;
                        if !space.elem_eq(&ta, &tb)? {
                            e = failv(format!(
                                "clause 3: canonical images of {a} and {b} at {i} differ"
                            ));
                            break 'cha;
                        }
                        if !space.per(a, i, &ta)? {
                            e = failv(format!(
                                "clause 3: {a} is not related to its canonical image {ta} at {i}"
                            ));
                            break 'cha;
                        }
                    }
                }
            }
            // clause 4: canonicalizing after a finer canonicalization changes nothing
            for &(ip, jp) in &pairs {
                let (lo, hi) = (&stages[ip], &stages[jp]);
                for a in &samples {
                    let via = space.pt_total(lo, &space.pt_total(hi, a)?)?;
                    if !space.elem_eq(&via, &space.pt_total(lo, a)?)? {
                        e = failv(format!(
                            "clause 4: canonicalizing {a} through {hi} then {lo} shifts its image"
                        ));
                        break 'cha;
                    }
                }
            }
            // clause 5: canonicalizing at a finer stage stays inside coarser domains
            for &(ip, jp) in &pairs {
                if ip == jp {
                    continue;
                }
                let (lo, hi) = (&stages[ip], &stages[jp]);
                for (xa, a) in samples.iter().enumerate() {
                    if !dmx[xa][ip] {
                        continue;
                    }
                    let t = space.pt_total(hi, a)?;
                    if !space.in_dom(&t, lo)? {
                        e = failv(format!(
                            "clause 5: canonical image {t} of {a} at {hi} leaves the domain at {lo}"
                        ));
                        break 'cha;
                    }
                }
            }
            // the clauses re-derive the restriction law: walk the chain
            for &(ip, jp) in &pairs {
                if ip == jp {
                    continue;
                }
                let (lo, hi) = (&stages[ip], &stages[jp]);
                for (xa, a) in samples.iter().enumerate() {
                    for (xb, b) in samples.iter().enumerate() {
                        if !(space.per(a, hi, b)? && dmx[xa][ip] && dmx[xb][ip]) {
                            continue;
                        }
                        let step1 = space.elem_eq(&space.pt_total(hi, a)?, &space.pt_total(hi, b)?)?;
                        let step2 = space.elem_eq(&space.pt_total(lo, a)?, &space.pt_total(lo, b)?)?;
                        let step3 = space.per(a, lo, &space.pt_total(lo, a)?)?;
                        let step4 = space.per(a, lo, b)?;
                        if !(step1 && step2 && step3 && step4) {
                            e = failv(format!(
                                "derived: the chain from {a} ~ {b} at {hi} down to {lo} breaks (images {step1}, descent {step2}, class {step3}, agreement {step4})"
                            ));
                            break 'cha;
                        }
                    }
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("CHAR", P_CHAR, entry.0, entry.1, None);

    // EXTFACTS, eight parts
    let entry = if total {
        let mut e = (Verdict::Pass, None);
        'ef: {
            // part 2: agreement is kernel equality within the domain
            for (ip, i) in stages.iter().enumerate() {
                for (xa, a) in samples.iter().enumerate() {
                    for (xb, b) in samples.iter().enumerate() {
                        let agree = space.per(a, i, b)?;
                        let kernel = space.elem_eq(&space.pt_total(i, a)?, &space.pt_total(i, b)?)?;
                        let both = dmx[xa][ip] && dmx[xb][ip];
                        if agree != (kernel && both) {
                            e = failv(format!(
                                "part 2: at {i}, agreement of {a} and {b} is {agree} but kernel-and-domain gives {}",
                                kernel && both
                            ));
                            break 'ef;
                        }
                    }
                }
            }
            for &(ip, jp) in &pairs {
                if ip == jp {
                    continue;
                }
                let (lo, hi) = (&stages[ip], &stages[jp]);
                for (xa, a) in samples.iter().enumerate() {
                    let ta_hi = space.pt_total(hi, a)?;
                    let ta_lo = space.pt_total(lo, a)?;
                    // part 3: the finer image canonicalizes to the coarse one
                    if !space.elem_eq(&space.pt_total(lo, &ta_hi)?, &ta_lo)? {
                        e = failv(format!(
                            "part 3: the image {ta_hi} of {a} at {hi} does not canonicalize to {ta_lo} at {lo}"
                        ));
                        break 'ef;
                    }
                    // part 4: inside the coarse domain the finer image stays in class
                    if dmx[xa][ip] && !space.per(a, lo, &ta_hi)? {
                        e = failv(format!(
                            "part 4: {a} is not related at {lo} to its image {ta_hi} from {hi}"
                        ));
                        break 'ef;
                    }
                    // part 7: the coarse image is already canonical higher up
                    if !space.elem_eq(&space.pt_total(hi, &ta_lo)?, &ta_lo)? {
                        e = failv(format!(
                            "part 7: the image {ta_lo} of {a} at {lo} moves when canonicalized at {hi}"
                        ));
                        break 'ef;
                    }
                    // part 8: pointing factors through the finer canonicalization
                    if dmx[xa][ip] && !space.elem_eq(&space.pt(lo, &ta_hi)?, &space.pt(lo, a)?)? {
                        e = failv(format!(
                            "part 8: pointing {a} at {lo} differs from pointing its image {ta_hi}"
                        ));
                        break 'ef;
                    }
                    for (xb, b) in samples.iter().enumerate() {
                        let tb_hi = space.pt_total(hi, b)?;
                        // part 1: kernel equality at a finer stage implies it coarser
                        if space.elem_eq(&ta_hi, &tb_hi)?
                            && !space.elem_eq(&ta_lo, &space.pt_total(lo, b)?)?
                        {
                            e = failv(format!(
                                "part 1: {a} and {b} share their image at {hi} but not at {lo}"
                            ));
                            break 'ef;
                        }
                        // part 5: agreement survives finer canonicalization
                        if dmx[xa][ip]
                            && dmx[xb][ip]
                            && space.per(a, lo, b)?
                            && !space.per(&ta_hi, lo, &tb_hi)?
                        {
                            e = failv(format!(
                                "part 5: {a} ~ {b} at {lo} but their images from {hi} disagree"
                            ));
                            break 'ef;
                        }
                    }
                }
                // part 6: coarse points are fixed by finer canonicalization
                for p in &pts[ip] {
                    if !space.elem_eq(&space.pt_total(hi, p)?, p)? {
                        e = failv(format!(
                            "part 6: point {p} of {lo} moves when canonicalized at {hi}"
                        ));
                        break 'ef;
                    }
                }
            }
        }
        e
    } else {
        (Verdict::Skip, None)
    };
    report.push("EXTFACTS", P_EXTFACTS, entry.0, entry.1, None);

    Ok(report)
}

/// Read a limit-style structure as a staged relation space: two elements
/// agree at a stage exactly when they have consistent approximations there.
/// Carrier embeddings contribute points (the embedded stage states) and the
/// pointing map; a carrier projection contributes the canonicalization map.
pub fn per_from_target(t: &Target) -> PerSpace {
    let name = format!("per({})", t.name);
    let index = t.sys.system().index.clone();
    let t1 = t.clone();
    let per = move |a: &Elem, i: &Index, b: &Elem| -> Result<bool> {
        let sys = t1.sys.system();
        let stage = sys.stage(i)?;
        for x in stage.iter() {
            if !t1.approx(a, i, x)? {
                continue;
            }
            for y in stage.iter() {
                if t1.approx(b, i, y)? && sys.stage_consistent(i, x, y)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    };
    let t2 = t.clone();
    let dom = move |a: &Elem| t2.dom_desc(a);
    let mut space =
        PerSpace::new(name, index, t.filter.clone(), t.carrier.clone(), per, dom);
    if t.has_emb_top() {
        let t3 = t.clone();
        let points = move |i: &Index| -> Result<Vec<Elem>> {
            let sys = t3.sys.system();
            let mut out = Vec::new();
            for s in sys.stage(i)?.iter() {
                out.push(t3.emb_top(i, s)?);
            }
            out.sort();
            out.dedup();
            Ok(out)
        };
        let t4 = t.clone();
        let pt = move |i: &Index, a: &Elem| -> Result<Elem> {
            let sys = t4.sys.system();
            for s in sys.stage(i)?.iter() {
                if t4.approx(a, i, s)? {
                    return t4.emb_top(i, s);
                }
            }
            input_err(format!("{a} has no approximation at {i}"))
        };
        space = space.with_points(points, pt);
        if t.has_proj_top() {
            let t5 = t.clone();
            space = space.with_total_pt(move |i: &Index, a: &Elem| {
                let s = t5.proj_top(i, a)?;
                t5.emb_top(i, &s)
            });
        }
    }
    space
}

fn point_of_atom(space: &PerSpace, i: &Index, s: &State) -> Result<Elem> {
    for p in space.points(i)? {
        if State::atom(p.to_string()) == *s {
            return Ok(p);
        }
    }
    input_err(format!("{s} names no point at stage {i}"))
}

/// Minimal representative of each relation class among the samples at `i`.
fn class_reps(space: &PerSpace, samples: &[Elem], i: &Index) -> Result<Vec<Elem>> {
    let mut reps: Vec<Elem> = Vec::new();
    'next: for a in samples {
        if !space.in_dom(a, i)? {
            continue;
        }
        for r in &reps {
            if space.per(a, i, r)? {
                continue 'next;
            }
        }
        reps.push(a.clone());
    }
    Ok(reps)
}

fn rep_of_atom(space: &PerSpace, samples: &[Elem], i: &Index, s: &State) -> Result<Elem> {
    for r in class_reps(space, samples, i)? {
        if State::atom(format!("[{r}]")) == *s {
            return Ok(r);
        }
    }
    input_err(format!("{s} names no class at stage {i}"))
}

/// The stage system a space induces. With points, the stages are the point
/// sets, descent is stage agreement of the points, embeddings point the
/// coarse point at the finer stage (the identity whenever points persist
/// literally), and the canonicalization map projects. Without points, the
/// stages are relation classes of the fuel-selected samples and descent is
/// class overlap.
pub fn internal_system(space: &PerSpace, fuel: u64) -> Result<SystemRef> {
    let name = format!("pts({})", space.name);
    if space.has_points() {
        let sp = space.clone();
        let stages = move |i: &Index| -> Result<Vec<State>> {
            let pts = sp.points(i)?;
            if pts.len() > 100_000 {
                return Err(Error::Resource(format!("{} points at stage {i}", pts.len())));
            }
            let mut out: Vec<State> = pts.iter().map(|p| State::atom(p.to_string())).collect();
            out.sort();
            out.dedup();
            if out.len() != pts.len() {
                return input_err(format!("distinct points at {i} share a printed form"));
            }
            Ok(out)
        };
        let sp2 = space.clone();
        let pmap = move |hi: &Index, a: &State, lo: &Index, b: &State| -> Result<bool> {
            let ea = point_of_atom(&sp2, hi, a)?;
            let eb = point_of_atom(&sp2, lo, b)?;
            sp2.per(&ea, lo, &eb)
        };
        let base = StageSystem::new(name, space.index.clone(), stages, pmap);
        let spe = space.clone();
        let mut fact = FactorSystem::new(base, move |from: &Index, to: &Index, a: &State| {
            let p = point_of_atom(&spe, from, a)?;
            Ok(State::atom(spe.pt(to, &p)?.to_string()))
        });
        if space.has_total_pt() {
            let sp3 = space.clone();
            fact = fact.with_proj(move |from: &Index, to: &Index, a: &State| {
                let e = point_of_atom(&sp3, from, a)?;
                Ok(State::atom(sp3.pt_total(to, &e)?.to_string()))
            });
        }
        Ok(SystemRef::Factor(fact))
    } else {
        let samples = Rc::new(space.carrier.elems(fuel));
        if samples.is_empty() {
            return input_err(format!("space {} has no sample elements", space.name));
        }
        let sp = space.clone();
        let s1 = samples.clone();
        let stages = move |i: &Index| -> Result<Vec<State>> {
            Ok(class_reps(&sp, &s1, i)?
                .into_iter()
                .map(|r| State::atom(format!("[{r}]")))
                .collect())
        };
        let sp2 = space.clone();
        let s2 = samples;
        let pmap = move |hi: &Index, a: &State, lo: &Index, b: &State| -> Result<bool> {
            let ra = rep_of_atom(&sp2, &s2, hi, a)?;
            let rb = rep_of_atom(&sp2, &s2, lo, b)?;
            for x in s2.iter() {
                if sp2.per(x, hi, &ra)? && sp2.per(x, lo, &rb)? {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        Ok(SystemRef::Stage(StageSystem::new(name, space.index.clone(), stages, pmap)))
    }
}

/// The space's carrier read as a limit-style structure over its induced
/// system: an element is approximated by its point (or its class) at every
/// stage whose domain it inhabits.
pub fn induced_target(space: &PerSpace, fuel: u64) -> Result<Target> {
    let sys = internal_system(space, fuel)?;
    let name = format!("{} over its own stages", space.name);
    let pointed = space.has_points();
    let sp = space.clone();
    let samples = Rc::new(space.carrier.elems(fuel));
    let s1 = samples.clone();
    let approx = move |a: &Elem, i: &Index, s: &State| -> Result<bool> {
        if !sp.in_dom(a, i)? {
            return Ok(false);
        }
        if pointed {
            Ok(State::atom(sp.pt(i, a)?.to_string()) == *s)
        } else {
            for r in class_reps(&sp, &s1, i)? {
                if sp.per(a, i, &r)? {
                    return Ok(State::atom(format!("[{r}]")) == *s);
                }
            }
            Ok(false)
        }
    };
    let sp2 = space.clone();
    let dom = move |a: &Elem| sp2.dom_desc(a);
    let mut t = Target::new(name, sys, space.filter.clone(), space.carrier.clone(), approx, dom);
    if pointed {
        let sp3 = space.clone();
        t = t.with_emb_top(move |i: &Index, s: &State| point_of_atom(&sp3, i, s));
        if space.has_total_pt() {
            let sp4 = space.clone();
            t = t.with_proj_top(move |i: &Index, a: &Elem| {
                Ok(State::atom(sp4.pt_total(i, a)?.to_string()))
            });
        }
    }
    let sp5 = space.clone();
    t = t.with_elem_eq(move |a: &Elem, b: &Elem| sp5.elem_eq(a, b));
    Ok(t)
}

fn vlabel(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Skip => "skip",
        Verdict::UnknownAtBound => "unknown-at-bound",
    }
}

const X_TARGET: &str =
    "distinct elements have incompatible approximation families over the induced stages";
const X_COFINAL: &str = "distinct elements disagree at arbitrarily high shared stages";
const X_SHARED: &str = "distinct elements disagree at some shared stage";
const X_FAMILY: &str = "distinct elements have incompatible stage membership families";
const X_AGREE: &str = "all four separation readings agree";

/// Check whether distinct carrier elements are separated by the stage
/// structure, in four independent readings, and that the readings agree.
pub fn check_extensionality(space: &PerSpace, bound: &Index, fuel: u64) -> Result<LawReport> {
    let samples = space.carrier.elems(fuel);
    if samples.is_empty() {
        return input_err(format!("space {} has no sample elements", space.name));
    }
    let window = space.index.bump(bound, SCAN_SLACK);
    let wstages = space.index.enumerate_to(&window)?;
    let bstages = space.index.enumerate_to(bound)?;
    let mut report = LawReport::new(format!("{} separation", space.name), bound.to_string());

    // Reading 1: approximation families over the induced system.
    let t = induced_target(space, fuel)?;
    let tsys = t.sys.system();
    let mut exts: Vec<FamilyData> = Vec::new();
    for a in &samples {
        exts.push(t.ext(a, bound)?.data);
    }
    let mut x1 = (Verdict::Pass, None);
    'x1: for (xa, a) in samples.iter().enumerate() {
        for (xb, b) in samples.iter().enumerate().skip(xa + 1) {
            if exts[xa].entries.is_empty() || exts[xb].entries.is_empty() {
                continue;
            }
            if families_compatible(tsys, &exts[xa], &exts[xb])? {
                x1 = failv(format!(
                    "{a} and {b} share a consistent family over the induced stages"
                ));
                break 'x1;
            }
        }
    }

    // Readings 2 and 3: direct stage agreement.
    let mut x2 = (Verdict::Pass, None);
    let mut x3 = (Verdict::Pass, None);
    for (xa, a) in samples.iter().enumerate() {
        for b in samples.iter().skip(xa + 1) {
            let mut shared: Vec<&Index> = Vec::new();
            for i in &wstages {
                if space.in_dom(a, i)? && space.in_dom(b, i)? {
                    shared.push(i);
                }
            }
            if shared.is_empty() {
                continue;
            }
            if x3.0 == Verdict::Pass {
                let mut all = true;
                for i in &shared {
                    if !space.per(a, i, b)? {
                        all = false;
                        break;
                    }
                }
                if all {
                    x3 = failv(format!("{a} and {b} agree at every shared stage up to {window}"));
                }
            }
            if x2.0 == Verdict::Pass {
                let mut frontier_agree = true;
                for i in &shared {
                    let mut maximal = true;
                    for j in &shared {
                        if *j != *i && space.index.leq_unchecked(i, j) {
                            maximal = false;
                            break;
                        }
                    }
                    if !maximal {
                        continue;
                    }
                    if !space.per(a, i, b)? {
                        frontier_agree = false;
                        break;
                    }
                }
                if frontier_agree {
                    x2 = failv(format!(
                        "{a} and {b} agree at the highest shared stages below {window}"
                    ));
                }
            }
        }
    }

    // Reading 4: one-state membership families built straight from the
    // relation, compared over the induced system.
    let pointed = space.has_points();
    let mut mems: Vec<FamilyData> = Vec::new();
    for a in &samples {
        let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
        for i in &bstages {
            if !space.in_dom(a, i)? {
                continue;
            }
            let st = if pointed {
                Some(State::atom(space.pt(i, a)?.to_string()))
            } else {
                let mut found = None;
                for r in class_reps(space, &samples, i)? {
                    if space.per(a, i, &r)? {
                        found = Some(State::atom(format!("[{r}]")));
                        break;
                    }
                }
                found
            };
            if let Some(st) = st {
                entries.insert(i.clone(), vec![st]);
            }
        }
        mems.push(FamilyData::new(format!("mem({a})"), entries));
    }
    let mut x4 = (Verdict::Pass, None);
    'x4: for (xa, a) in samples.iter().enumerate() {
        if mems[xa].entries.is_empty() {
            continue;
        }
        for (xb, b) in samples.iter().enumerate().skip(xa + 1) {
            if mems[xb].entries.is_empty() {
                continue;
            }
            if families_compatible(tsys, &mems[xa], &mems[xb])? {
                x4 = failv(format!("{a} and {b} have compatible stage membership families"));
                break 'x4;
            }
        }
    }

    let verdicts = [x1.0, x2.0, x3.0, x4.0];
    let agree = if verdicts.contains(&Verdict::UnknownAtBound) {
        (Verdict::UnknownAtBound, Some("a reading is undecided at this bound".to_string()))
    } else if verdicts.iter().all(|v| *v == verdicts[0]) {
        (Verdict::Pass, None)
    } else {
        (
            Verdict::Fail,
            Some(format!(
                "readings split: families {}, cofinal {}, shared {}, membership {}",
                vlabel(x1.0),
                vlabel(x2.0),
                vlabel(x3.0),
                vlabel(x4.0)
            )),
        )
    };

    report.push("XTARGET", X_TARGET, x1.0, x1.1, None);
    report.push("XCOFINAL", X_COFINAL, x2.0, x2.1, None);
    report.push("XSHARED", X_SHARED, x3.0, x3.1, None);
    report.push("XFAMILY", X_FAMILY, x4.0, x4.1, None);
    report.push("XAGREE", X_AGREE, agree.0, agree.1, None);
    Ok(report)
}

type SeqFn = Rc<dyn Fn(&Index) -> Result<Option<Elem>>>;

/// One stage point per stage of a declared stage set.
#[derive(Clone)]
pub struct PointSequence {
    pub name: String,
    pub domain: SubsetDesc,
    at: SeqFn,
}

impl PointSequence {
    pub fn new(
        name: impl Into<String>,
        domain: SubsetDesc,
        at: impl Fn(&Index) -> Result<Option<Elem>> + 'static,
    ) -> PointSequence {
        PointSequence { name: name.into(), domain, at: Rc::new(at) }
    }

    /// A sequence holding exactly the given entries.
    pub fn from_entries(
        name: impl Into<String>,
        domain: SubsetDesc,
        entries: BTreeMap<Index, Elem>,
    ) -> PointSequence {
        PointSequence {
            name: name.into(),
            domain,
            at: Rc::new(move |i| Ok(entries.get(i).cloned())),
        }
    }

    pub fn at(&self, i: &Index) -> Result<Option<Elem>> {
        (self.at)(i)
    }
}

/// Outcome of a bounded limit search.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LimitSearch {
    Found(Elem),
    NoneAtBound,
}

fn materialize_sequence(
    space: &PerSpace,
    seq: &PointSequence,
    stages: &[Index],
) -> Result<Vec<(Index, Elem)>> {
    let mut live: Vec<(Index, Elem)> = Vec::new();
    let mut missing: Vec<Index> = Vec::new();
    for i in stages {
        match seq.at(i)? {
            Some(p) => {
                if seq.domain.member(&space.index, i) == Verdict3::False {
                    return input_err(format!(
                        "sequence {}: a point at undeclared stage {i}",
                        seq.name
                    ));
                }
                live.push((i.clone(), p));
            }
            None => {
                if seq.domain.member(&space.index, i) == Verdict3::True {
                    missing.push(i.clone());
                }
            }
        }
    }
    // Declared stages may run out above the materialized part, never inside it.
    for m in &missing {
        if live.iter().any(|(j, _)| space.index.leq_unchecked(m, j)) {
            return input_err(format!(
                "sequence {}: declared at {m} but holds nothing there",
                seq.name
            ));
        }
    }
    Ok(live)
}

/// Canonical image used for coherence checks: the total map when present,
/// the pointing map on the stage's domain otherwise.
fn point_probe(space: &PerSpace, i: &Index, a: &Elem) -> Result<Option<Elem>> {
    if space.has_total_pt() {
        return space.pt_total(i, a).map(Some);
    }
    if space.in_dom(a, i)? {
        return space.pt(i, a).map(Some);
    }
    Ok(None)
}

fn sequence_violation(space: &PerSpace, live: &[(Index, Elem)]) -> Result<Option<String>> {
    for (i, p) in live {
        if !holds_point(space, &space.points(i)?, p)? {
            return Ok(Some(format!("{p} is not a stage point at {i}")));
        }
    }
    for (i, p) in live {
        for (j, q) in live {
            if i == j || !space.index.leq_unchecked(i, j) {
                continue;
            }
            if let Some(r) = point_probe(space, i, q)? {
                if !space.elem_eq(&r, p)? {
                    return Ok(Some(format!(
                        "the point {q} at {j} tracks to {r} at {i}, not to {p}"
                    )));
                }
            }
        }
    }
    Ok(None)
}

/// Search the carrier samples for an element whose pointing matches `seq`
/// at every materialized stage, scanning slightly above the bound to weed
/// out boundary artifacts. A malformed sequence is an input error; when the
/// space separates its elements the found element is the unique one.
pub fn limit_element(
    space: &PerSpace,
    seq: &PointSequence,
    bound: &Index,
    fuel: u64,
) -> Result<LimitSearch> {
    if !space.has_points() {
        return input_err(format!("space {} has no stage points", space.name));
    }
    let window = space.index.bump(bound, SCAN_SLACK);
    let wstages = space.index.enumerate_to(&window)?;
    let live = materialize_sequence(space, seq, &wstages)?;
    if let Some(msg) = sequence_violation(space, &live)? {
        return input_err(format!("sequence {}: {msg}", seq.name));
    }
    if live.is_empty() {
        return input_err(format!("sequence {} holds nothing below {window}", seq.name));
    }
    'cand: for a in space.carrier.elems(fuel) {
        for (i, p) in &live {
            if !space.in_dom(&a, i)? {
                continue 'cand;
            }
            if !space.elem_eq(&space.pt(i, &a)?, p)? {
                continue 'cand;
            }
        }
        return Ok(LimitSearch::Found(a));
    }
    Ok(LimitSearch::NoneAtBound)
}

const B_SEQ: &str =
    "consistent stage families embed to coherent point sequences that track the samples";
const B_C1: &str = "every probe family is the approximation family of some sample element";
const B_C2: &str = "every probe sequence has a limit element among the samples";
const B_C3: &str = "every probe family is witnessed over the induced stages";
const B_AGREE: &str = "the three completeness readings agree";

/// Connect the family view and the sequence view of convergence for a
/// structure with carrier embeddings. Probes are the structure's dynamic
/// elements up to the bound plus any supplied sequences; completeness is
/// decided by sample search in all three readings so that the readings can
/// fail honestly, and together, on incomplete carriers.
pub fn check_convergence_bridge(
    t: &Target,
    bound: &Index,
    fuel: u64,
    extra: &[PointSequence],
) -> Result<LawReport> {
    if !t.has_emb_top() {
        return input_err(format!("target {} has no carrier embeddings", t.name));
    }
    let space = per_from_target(t);
    let sys = t.sys.system();
    let window = sys.index.bump(bound, SCAN_SLACK);
    let wstages = sys.index.enumerate_to(&window)?;
    let samples = t.carrier.elems(fuel);
    if samples.is_empty() {
        return input_err(format!("target {} has no sample elements", t.name));
    }
    let mut report = LawReport::new(format!("{} convergence", t.name), bound.to_string());

    struct Probe {
        name: String,
        seq: PointSequence,
        fam: FamilyData,
        live: Vec<(Index, Elem)>,
    }

    let dyns: Vec<ConsistentFamily> = enumerate_dynamic_elements(&t.sys, bound)?;
    let mut probes: Vec<Probe> = Vec::new();
    let mut bridge = (Verdict::Pass, None);
    'fam: for alpha in &dyns {
        let mut entries: BTreeMap<Index, Elem> = BTreeMap::new();
        for (i, states) in &alpha.data.entries {
            let mut img: Option<Elem> = None;
            for s in states {
                let p = t.emb_top(i, s)?;
                match &img {
                    None => img = Some(p),
                    Some(q) if *q != p => {
                        bridge = failv(format!(
                            "{}: states at {i} embed to both {q} and {p}",
                            alpha.name()
                        ));
                        break 'fam;
                    }
                    _ => {}
                }
            }
            if let Some(p) = img {
                entries.insert(i.clone(), p);
            }
        }
        let name = format!("seq({})", alpha.name());
        let seq = PointSequence::from_entries(name.clone(), alpha.domain.clone(), entries);
        let live = materialize_sequence(&space, &seq, &wstages)?;
        probes.push(Probe { name, seq, fam: alpha.data.clone(), live });
    }
    for seq in extra {
        let live = materialize_sequence(&space, seq, &wstages)?;
        if let Some(msg) = sequence_violation(&space, &live)? {
            return input_err(format!("sequence {}: {msg}", seq.name));
        }
        let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
        for (i, p) in &live {
            let mut state = None;
            for s in sys.stage(i)?.iter() {
                if t.emb_top(i, s)? == *p {
                    state = Some(s.clone());
                    break;
                }
            }
            match state {
                Some(s) => {
                    entries.insert(i.clone(), vec![s]);
                }
                None => {
                    return input_err(format!(
                        "sequence {}: {p} at {i} comes from no stage state",
                        seq.name
                    ))
                }
            }
        }
        probes.push(Probe {
            name: seq.name.clone(),
            seq: seq.clone(),
            fam: FamilyData::new(format!("fam({})", seq.name), entries),
            live,
        });
    }

    // Approximation families of the samples over the scan window, shared by
    // the checks below.
    let mut exts: Vec<FamilyData> = Vec::new();
    for a in &samples {
        exts.push(t.ext(a, &window)?.data);
    }

    // BRIDGE: derived sequences are coherent and, sample by sample, family
    // compatibility says the same as point tracking.
    if bridge.0 == Verdict::Pass {
        'bridge: for (k, alpha) in dyns.iter().enumerate() {
            let probe = &probes[k];
            if let Some(msg) = sequence_violation(&space, &probe.live)? {
                bridge = failv(format!("{}: {msg}", probe.name));
                break 'bridge;
            }
            for (xa, a) in samples.iter().enumerate() {
                let compat = !exts[xa].entries.is_empty()
                    && families_compatible(sys, &exts[xa], &alpha.data)?;
                let mut shared = 0usize;
                let mut tracks = true;
                for (i, p) in &probe.live {
                    if !space.in_dom(a, i)? {
                        continue;
                    }
                    shared += 1;
                    if !space.elem_eq(&space.pt(i, a)?, p)? {
                        tracks = false;
                        break;
                    }
                }
                let follows = shared > 0 && tracks;
                if compat != follows {
                    bridge = failv(format!(
                        "{a} against {}: family compatibility is {compat} but point tracking is {follows}",
                        probe.name
                    ));
                    break 'bridge;
                }
            }
        }
    }
    report.push("BRIDGE", B_SEQ, bridge.0, bridge.1, Some(format!("{} probes", probes.len())));

    // COMPL1: family reading, by sample search.
    let mut c1 = (Verdict::Pass, None);
    'c1: for probe in &probes {
        let mut witnessed = false;
        for ext in &exts {
            if ext.entries.is_empty() {
                continue;
            }
            if families_compatible(sys, ext, &probe.fam)? {
                witnessed = true;
                break;
            }
        }
        if !witnessed {
            c1 = failv(format!("no sample element approximates along {}", probe.name));
            break 'c1;
        }
    }
    report.push("COMPL1", B_C1, c1.0, c1.1, None);

    // COMPL2: sequence reading.
    let mut c2 = (Verdict::Pass, None);
    'c2: for probe in &probes {
        if limit_element(&space, &probe.seq, bound, fuel)? == LimitSearch::NoneAtBound {
            c2 = failv(format!("{} has no limit element below the bound", probe.name));
            break 'c2;
        }
    }
    report.push("COMPL2", B_C2, c2.0, c2.1, None);

    // COMPL3: family reading over the induced stages.
    let et = induced_target(&space, fuel)?;
    let esys = et.sys.system();
    let mut eexts: Vec<FamilyData> = Vec::new();
    for a in &samples {
        eexts.push(et.ext(a, &window)?.data);
    }
    let mut c3 = (Verdict::Pass, None);
    'c3: for probe in &probes {
        let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
        for (i, p) in &probe.live {
            entries.insert(i.clone(), vec![State::atom(p.to_string())]);
        }
        let pfam = FamilyData::new(probe.name.clone(), entries);
        let mut witnessed = false;
        for ext in &eexts {
            if ext.entries.is_empty() {
                continue;
            }
            if families_compatible(esys, ext, &pfam)? {
                witnessed = true;
                break;
            }
        }
        if !witnessed {
            c3 = failv(format!("no sample element matches {} over the induced stages", probe.name));
            break 'c3;
        }
    }
    report.push("COMPL3", B_C3, c3.0, c3.1, None);

    let agree = if [c1.0, c2.0, c3.0].contains(&Verdict::UnknownAtBound) {
        (Verdict::UnknownAtBound, Some("a reading is undecided at this bound".to_string()))
    } else if c1.0 == c2.0 && c2.0 == c3.0 {
        (Verdict::Pass, None)
    } else {
        (
            Verdict::Fail,
            Some(format!(
                "readings split: families {}, limits {}, induced {}",
                vlabel(c1.0),
                vlabel(c2.0),
                vlabel(c3.0)
            )),
        )
    };
    report.push("CAGREE", B_AGREE, agree.0, agree.1, None);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elem::DyadicPoint;
    use crate::gallery::{
        bool_perspace, bool_target, dyadic_perspace, dyadic_target, nat_perspace, nat_target,
    };

    fn nat(i: u64) -> Index {
        Index::Nat(i)
    }

    fn nat_fset() -> PerSpace {
        PerSpace::new(
            "nat classes",
            IndexPoset::NatPlus,
            FilterSpec::Upset(IndexPoset::NatPlus),
            Carrier::new(|fuel| (0..fuel).map(Elem::Nat).collect()),
            |a, i, b| {
                let (x, y) = (a.as_nat().unwrap_or(u64::MAX), b.as_nat().unwrap_or(u64::MAX));
                Ok(x == y && x < i.as_nat().unwrap_or(0))
            },
            |a| Ok(SubsetDesc::upset_of([Index::Nat(a.as_nat().unwrap_or(0) + 1)])),
        )
    }

    // The carrier where consecutive numbers are everywhere identified, so
    // the space is lawful but does not separate its elements.
    fn halved_space() -> PerSpace {
        PerSpace::new(
            "halved",
            IndexPoset::NatPlus,
            FilterSpec::Upset(IndexPoset::NatPlus),
            Carrier::new(|fuel| (0..fuel).map(Elem::Nat).collect()),
            |a, i, b| {
                let (x, y) = (a.as_nat().unwrap_or(u64::MAX), b.as_nat().unwrap_or(u64::MAX));
                Ok(x / 2 == y / 2 && x / 2 < i.as_nat().unwrap_or(0))
            },
            |a| Ok(SubsetDesc::upset_of([Index::Nat(a.as_nat().unwrap_or(0) / 2 + 1)])),
        )
        .with_points(
            |i| Ok((0..i.as_nat().unwrap_or(0)).map(|h| Elem::nat(2 * h)).collect()),
            |_, a| Ok(Elem::nat(2 * (a.as_nat().unwrap_or(0) / 2))),
        )
        .with_total_pt(|i, a| {
            let h = a.as_nat().unwrap_or(0) / 2;
            Ok(Elem::nat(2 * h.min(i.as_nat().unwrap_or(1) - 1)))
        })
    }

    #[test]
    fn nat_space_passes_every_law() {
        let r = check_perspace(&nat_perspace(), PerLevel::Perset, &nat(8), 8).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn dyadic_space_passes_every_law() {
        let r = check_perspace(&dyadic_perspace(), PerLevel::Perset, &nat(5), 6).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn bool_space_passes_every_law() {
        let r = check_perspace(&bool_perspace(), PerLevel::Perset, &Index::Unit, 0).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn requested_level_controls_which_laws_run() {
        let r = check_perspace(&nat_perspace(), PerLevel::Fset, &nat(5), 5).unwrap();
        assert_eq!(r.verdict_of("PER"), Some(Verdict::Pass));
        assert_eq!(r.verdict_of("PT1"), Some(Verdict::Skip));
        assert_eq!(r.verdict_of("EXTFACTS"), Some(Verdict::Skip));
        assert!(check_perspace(&nat_fset(), PerLevel::Pointed, &nat(5), 5).is_err());
    }

    #[test]
    fn target_route_agrees_with_the_direct_space() {
        let derived = per_from_target(&nat_target());
        let direct = nat_perspace();
        assert_eq!(derived.max_level(), PerLevel::Perset);
        for i in 1..=6u64 {
            let stage = nat(i);
            assert_eq!(derived.points(&stage).unwrap(), direct.points(&stage).unwrap());
            for n in 0..=6u64 {
                let a = Elem::nat(n);
                assert_eq!(
                    derived.pt_total(&stage, &a).unwrap(),
                    direct.pt_total(&stage, &a).unwrap()
                );
                if direct.in_dom(&a, &stage).unwrap() {
                    assert_eq!(derived.pt(&stage, &a).unwrap(), direct.pt(&stage, &a).unwrap());
                }
                for m in 0..=6u64 {
                    let b = Elem::nat(m);
                    assert_eq!(
                        derived.per(&a, &stage, &b).unwrap(),
                        direct.per(&a, &stage, &b).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn boolean_agreement_is_identity() {
        let s = per_from_target(&bool_target());
        let (t, f) = (Elem::Bool(true), Elem::Bool(false));
        assert!(s.per(&t, &Index::Unit, &t).unwrap());
        assert!(s.per(&f, &Index::Unit, &f).unwrap());
        assert!(!s.per(&t, &Index::Unit, &f).unwrap());
        assert_eq!(s.points(&Index::Unit).unwrap(), vec![f, t]);
    }

    #[test]
    fn dyadic_pointing_is_the_grid_point() {
        let s = per_from_target(&dyadic_target());
        let third = Elem::Dyadic(DyadicPoint::from_ratio(1, 3).unwrap());
        let grid = Elem::Dyadic(DyadicPoint::from_ratio(5, 16).unwrap());
        assert_eq!(s.pt_total(&nat(4), &third).unwrap(), grid);
        assert_eq!(s.pt(&nat(4), &third).unwrap(), grid);
        let direct = dyadic_perspace();
        for k in 0..=4u64 {
            assert_eq!(s.points(&nat(k)).unwrap(), direct.points(&nat(k)).unwrap());
        }
    }

    #[test]
    fn broken_canonicalization_fails_clause_three() {
        let broken = nat_fset()
            .with_points(
                |i| Ok((0..i.as_nat().unwrap_or(0)).map(Elem::nat).collect()),
                |_, a| Ok(a.clone()),
            )
            .with_total_pt(|_, _| Ok(Elem::nat(0)));
        let r = check_perspace(&broken, PerLevel::Perset, &nat(5), 5).unwrap();
        assert_eq!(r.verdict_of("CHAR"), Some(Verdict::Fail));
        let entry = r.laws.iter().find(|e| e.law == "CHAR").unwrap();
        let cx = entry.counterexample.as_deref().unwrap();
        assert!(cx.contains("clause 3"), "{cx}");
        assert!(cx.contains("at 2"), "{cx}");
    }

    #[test]
    fn internal_system_recovers_the_reference_system() {
        let ind = internal_system(&nat_perspace(), 8).unwrap();
        let f = ind.factor().expect("point systems carry embeddings").clone();
        let reference = crate::gallery::nat_system();
        for i in 1..=6u64 {
            assert_eq!(f.system.stage(&nat(i)).unwrap().len(), i as usize);
        }
        for hi in 1..=5u64 {
            for lo in 1..=hi {
                for n in 0..hi {
                    for m in 0..lo {
                        let got = f
                            .system
                            .descends((&nat(hi), &State::nat(n)), (&nat(lo), &State::nat(m)))
                            .unwrap();
                        let want = reference
                            .system
                            .descends((&nat(hi), &State::nat(n)), (&nat(lo), &State::nat(m)))
                            .unwrap();
                        assert_eq!(got, want, "descent of {n}@{hi} to {m}@{lo}");
                    }
                }
            }
        }
        assert_eq!(f.emb(&nat(3), &nat(5), &State::nat(2)).unwrap(), State::nat(2));
        assert_eq!(f.proj(&nat(5), &nat(3), &State::nat(4)).unwrap(), State::nat(2));
    }

    #[test]
    fn class_level_system_uses_overlap() {
        let ind = internal_system(&nat_fset(), 6).unwrap();
        assert!(ind.factor().is_none());
        let sys = ind.system();
        let stage3: Vec<String> = sys.stage(&nat(3)).unwrap().iter().map(|s| s.to_string()).collect();
        assert_eq!(stage3, vec!["[0]", "[1]", "[2]"]);
        assert!(sys
            .descends((&nat(5), &State::atom("[2]")), (&nat(3), &State::atom("[2]")))
            .unwrap());
        assert!(!sys
            .descends((&nat(5), &State::atom("[4]")), (&nat(3), &State::atom("[2]")))
            .unwrap());
    }

    #[test]
    fn nat_space_separates_its_elements() {
        let r = check_extensionality(&nat_perspace(), &nat(6), 6).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn doubled_carrier_is_lawful_but_not_separating() {
        let halved = halved_space();
        let laws = check_perspace(&halved, PerLevel::Perset, &nat(6), 7).unwrap();
        assert!(laws.all_passed(), "{}", laws.render_text());
        let r = check_extensionality(&halved, &nat(6), 7).unwrap();
        for id in ["XTARGET", "XCOFINAL", "XSHARED", "XFAMILY"] {
            assert_eq!(r.verdict_of(id), Some(Verdict::Fail), "{id}\n{}", r.render_text());
        }
        assert_eq!(r.verdict_of("XAGREE"), Some(Verdict::Pass));
    }

    #[test]
    fn singleton_carrier_is_separating() {
        let mut space = nat_perspace();
        space.carrier = Carrier::new(|_| vec![Elem::nat(0)]);
        let r = check_extensionality(&space, &nat(5), 0).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn tail_sequence_has_its_limit() {
        let seq = PointSequence::new(
            "tail-2",
            SubsetDesc::upset_of([nat(3)]),
            |i| Ok(if i.as_nat().unwrap_or(0) >= 3 { Some(Elem::nat(2)) } else { None }),
        );
        let got = limit_element(&nat_perspace(), &seq, &nat(6), 8).unwrap();
        assert_eq!(got, LimitSearch::Found(Elem::nat(2)));
    }

    #[test]
    fn diagonal_sequence_has_no_limit_element() {
        let seq = PointSequence::new(
            "diagonal",
            SubsetDesc::upset_of([nat(1)]),
            |i| Ok(Some(Elem::nat(i.as_nat().unwrap_or(1) - 1))),
        );
        let got = limit_element(&nat_perspace(), &seq, &nat(6), 6).unwrap();
        assert_eq!(got, LimitSearch::NoneAtBound);
    }

    #[test]
    fn constant_zero_path_is_its_own_limit() {
        let zero = Elem::Dyadic(DyadicPoint::from_ratio(0, 1).unwrap());
        let z = zero.clone();
        let seq =
            PointSequence::new("grid-0", SubsetDesc::upset_of([nat(0)]), move |_| Ok(Some(z.clone())));
        let got = limit_element(&dyadic_perspace(), &seq, &nat(5), 6).unwrap();
        assert_eq!(got, LimitSearch::Found(zero));
    }

    #[test]
    fn sequences_reject_points_from_nowhere() {
        let seq = PointSequence::new(
            "stray",
            SubsetDesc::upset_of([nat(3)]),
            |i| Ok(if i.as_nat().unwrap_or(0) >= 3 { Some(Elem::nat(7)) } else { None }),
        );
        assert!(limit_element(&nat_perspace(), &seq, &nat(4), 8).is_err());
    }

    #[test]
    fn bridge_holds_for_the_naturals() {
        let r = check_convergence_bridge(&nat_target(), &nat(6), 6, &[]).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn diagonal_probe_breaks_every_completeness_reading() {
        let diag = PointSequence::new(
            "diagonal",
            SubsetDesc::upset_of([nat(1)]),
            |i| Ok(Some(Elem::nat(i.as_nat().unwrap_or(1) - 1))),
        );
        let r = check_convergence_bridge(&nat_target(), &nat(6), 6, &[diag]).unwrap();
        assert_eq!(r.verdict_of("BRIDGE"), Some(Verdict::Pass), "{}", r.render_text());
        for id in ["COMPL1", "COMPL2", "COMPL3"] {
            assert_eq!(r.verdict_of(id), Some(Verdict::Fail), "{id}\n{}", r.render_text());
        }
        assert_eq!(r.verdict_of("CAGREE"), Some(Verdict::Pass));
    }

    #[test]
    fn single_stage_carrier_is_trivially_complete() {
        let r = check_convergence_bridge(&bool_target(), &Index::Unit, 0, &[]).unwrap();
        assert!(r.all_passed(), "{}", r.render_text());
    }

    #[test]
    fn embedded_points_track_descent() {
        let t = nat_target();
        let space = per_from_target(&t);
        let sys = t.sys.system();
        for hi in 1..=5u64 {
            for lo in 1..=hi {
                let (ih, il) = (nat(hi), nat(lo));
                for a in sys.stage(&ih).unwrap().iter() {
                    for b in sys.stage(&il).unwrap().iter() {
                        let desc = sys.descends((&ih, a), (&il, b)).unwrap();
                        let pa = t.emb_top(&ih, a).unwrap();
                        let pb = t.emb_top(&il, b).unwrap();
                        let tracked = space.in_dom(&pa, &il).unwrap()
                            && space.pt(&il, &pa).unwrap() == pb;
                        assert_eq!(desc, tracked, "{a}@{ih} vs {b}@{il}");
                    }
                }
                // consistency of two states is equality of their embeddings
                for a in sys.stage(&il).unwrap().iter() {
                    for b in sys.stage(&il).unwrap().iter() {
                        let cons = sys.stage_consistent(&il, a, b).unwrap();
                        let same =
                            t.emb_top(&il, a).unwrap() == t.emb_top(&il, b).unwrap();
                        assert_eq!(cons, same);
                    }
                }
            }
        }
    }
}
