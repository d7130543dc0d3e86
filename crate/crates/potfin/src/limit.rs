//! Carriers over a stage system: sets of elements approximated stage-wise,
//! consistent families of states, and the laws that make a carrier a limit.
//!
//! A target pairs a carrier of elements with an approximation relation
//! between elements and stage states. The checked laws are bounded: they
//! quantify over all stages below a bound and over a finite sample of
//! carrier elements. A target that is maximal, extensional, and complete
//! over its system is a limit; dynamic elements (maximal consistent
//! families) form the canonical one.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::elem::{Elem, FamilyData};
use crate::index::{image_on, FilterSpec, Index, SubsetDesc, Verdict3};
use crate::report::{LawReport, Verdict};
use crate::system::{FactorSystem, StageSystem, State, SystemRef};
use crate::{input_err, Error, Result};

/// An enumerable collection of carrier elements plus named extras; the law
/// suites sample from it.
#[derive(Clone)]
pub struct Carrier {
    enumerate: Rc<dyn Fn(u64) -> Vec<Elem>>,
    pub extra: Vec<Elem>,
}

impl Carrier {
    pub fn new(enumerate: impl Fn(u64) -> Vec<Elem> + 'static) -> Carrier {
        Carrier { enumerate: Rc::new(enumerate), extra: Vec::new() }
    }

    pub fn with_extra(mut self, extra: Vec<Elem>) -> Carrier {
        self.extra = extra;
        self
    }

    /// Elements available at the given fuel, sorted and deduplicated.
    pub fn elems(&self, fuel: u64) -> Vec<Elem> {
        let mut out = (self.enumerate)(fuel);
        out.extend(self.extra.iter().cloned());
        out.sort();
        out.dedup();
        out
    }
}

/// A consistent family: finitely many stages, each with the states the
/// family holds there, together with a description of its stage set.
#[derive(Clone, Debug)]
pub struct ConsistentFamily {
    pub data: FamilyData,
    pub domain: SubsetDesc,
}

impl ConsistentFamily {
    pub fn new(data: FamilyData, domain: SubsetDesc) -> ConsistentFamily {
        ConsistentFamily { data, domain }
    }

    pub fn name(&self) -> &str {
        &self.data.name
    }

    pub fn states_at(&self, i: &Index) -> &[State] {
        self.data.entries.get(i).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Do the two families stay consistent when merged? All cross pairs at
/// comparable stages must be linked by descent.
pub fn families_compatible(
    sys: &StageSystem,
    a: &FamilyData,
    b: &FamilyData,
) -> Result<bool> {
    for (i, sa) in &a.entries {
        for (j, sb) in &b.entries {
            if sys.index.leq_unchecked(j, i) {
                for x in sa {
                    for y in sb {
                        if !sys.descends((i, x), (j, y))? {
                            return Ok(false);
                        }
                    }
                }
            }
            if sys.index.leq_unchecked(i, j) {
                for y in sb {
                    for x in sa {
                        if !sys.descends((j, y), (i, x))? {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

fn state_compatible(
    sys: &StageSystem,
    fam: &FamilyData,
    j: &Index,
    b: &State,
) -> Result<bool> {
    for (i, sa) in &fam.entries {
        if sys.index.leq_unchecked(j, i) {
            for x in sa {
                if !sys.descends((i, x), (j, b))? {
                    return Ok(false);
                }
            }
        }
        if sys.index.leq_unchecked(i, j) {
            for x in sa {
                if !sys.descends((j, b), (i, x))? {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

const F_PAIRWISE: &str = "all states of the family at comparable stages are linked by descent";
const F_DOM_AGREE: &str = "the declared stage set matches where the family has states";
const F_LARGE: &str = "the family has states at indefinitely many stages";

/// Law suite for one family.
pub fn check_family(
    sys: &StageSystem,
    filter: &FilterSpec,
    fam: &ConsistentFamily,
    bound: &Index,
) -> Result<LawReport> {
    let mut report = LawReport::new(format!("family {}", fam.name()), bound.to_string());

    let mut entry = (Verdict::Pass, None);
    'pairs: for (i, sa) in &fam.data.entries {
        for (j, sb) in &fam.data.entries {
            if !sys.index.leq_unchecked(j, i) {
                continue;
            }
            for x in sa {
                for y in sb {
                    if !sys.descends((i, x), (j, y))? {
                        entry = (
                            Verdict::Fail,
                            Some(format!("{x} at {i} does not descend to {y} at {j}")),
                        );
                        break 'pairs;
                    }
                }
            }
        }
    }
    report.push("FAM_PAIRWISE", F_PAIRWISE, entry.0, entry.1, None);

    let mut entry = (Verdict::Pass, None);
    for i in sys.index.enumerate_to(bound)? {
        let has = !fam.states_at(&i).is_empty();
        match fam.domain.member(&sys.index, &i) {
            Verdict3::True if !has => {
                entry = (Verdict::Fail, Some(format!("declared at {i} but holds nothing there")));
                break;
            }
            Verdict3::False if has => {
                entry = (Verdict::Fail, Some(format!("holds states at {i} but is not declared there")));
                break;
            }
            Verdict3::Unknown => {
                entry = (Verdict::UnknownAtBound, Some(format!("declaration undecided at {i}")));
            }
            _ => {}
        }
    }
    report.push("FAM_DOM_AGREE", F_DOM_AGREE, entry.0, entry.1, None);

    let v = filter.contains(&fam.domain, bound)?;
    report.push("FAM_LARGE", F_LARGE, v.demanding_true(), None, Some(fam.domain.name.clone()));

    report.sort();
    Ok(report)
}

pub fn family_is_consistent(
    sys: &StageSystem,
    filter: &FilterSpec,
    fam: &ConsistentFamily,
    bound: &Index,
) -> Result<bool> {
    Ok(!check_family(sys, filter, fam, bound)?.has_failure())
}

/// The largest family below the bound that contains this one and stays
/// consistent. States are added at a stage only where some family stage at
/// or above it constrains the choice.
pub fn maximal_closure(
    sys: &StageSystem,
    fam: &ConsistentFamily,
    bound: &Index,
) -> Result<ConsistentFamily> {
    let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
    for j in sys.index.enumerate_to(bound)? {
        let constrained = fam
            .data
            .entries
            .keys()
            .any(|i| sys.index.leq_unchecked(&j, i));
        if !constrained {
            if let Some(own) = fam.data.entries.get(&j) {
                entries.insert(j.clone(), own.clone());
            }
            continue;
        }
        let mut states = Vec::new();
        for b in sys.stage(&j)?.iter() {
            if state_compatible(sys, &fam.data, &j, b)? {
                states.push(b.clone());
            }
        }
        if !states.is_empty() {
            entries.insert(j.clone(), states);
        }
    }
    let observed: Vec<Index> = entries.keys().cloned().collect();
    let closed = FamilyData::new(format!("{}^m", fam.name()), entries);
    if !families_compatible(sys, &closed, &closed)? {
        return input_err(format!(
            "closure of {} is not consistent; the family or the system is broken",
            fam.name()
        ));
    }
    let domain = SubsetDesc::union(
        &sys.index,
        &fam.domain,
        &SubsetDesc::explicit(format!("stages of {}^m", fam.name()), observed),
    );
    Ok(ConsistentFamily::new(closed, domain))
}

/// Canonical family generated by a set of top-stage states: saturate the
/// set to its consistency class at the top, then collect every state below
/// that the class descends to.
fn family_from_top(
    sys: &StageSystem,
    tops: &[State],
    bound: &Index,
    has_proj: bool,
) -> Result<ConsistentFamily> {
    let top_stage = sys.stage(bound)?;
    let mut class: Vec<State> = Vec::new();
    for c in top_stage.iter() {
        for t in tops {
            if sys.stage_consistent(bound, c, t)? {
                class.push(c.clone());
                break;
            }
        }
    }
    if class.is_empty() {
        return input_err("no top-stage states consistent with the given seed".to_string());
    }
    let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
    for j in sys.index.enumerate_to(bound)? {
        let mut states = Vec::new();
        for b in sys.stage(&j)?.iter() {
            let mut hit = false;
            for c in &class {
                if sys.descends((bound, c), (&j, b))? {
                    hit = true;
                    break;
                }
            }
            if hit {
                states.push(b.clone());
            }
        }
        if !states.is_empty() {
            entries.insert(j.clone(), states);
        }
    }
    let name = format!(
        "elem{{{} @ {bound}}}",
        class.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("|")
    );
    let observed: Vec<Index> = entries.keys().cloned().collect();
    let domain = upset_or_explicit(&sys.index, bound, &observed, has_proj)?;
    Ok(ConsistentFamily::new(FamilyData::new(name, entries), domain))
}

/// Describe an observed stage set: when it is exactly the bounded part of
/// the up-set of its minimal elements, claim that up-set (the claim is
/// justified for systems with projections, where descent reaches every
/// lower stage); otherwise stay with the explicit set.
fn upset_or_explicit(
    poset: &crate::index::IndexPoset,
    bound: &Index,
    observed: &[Index],
    claim_upset: bool,
) -> Result<SubsetDesc> {
    if claim_upset && !observed.is_empty() {
        let mins: Vec<Index> = observed
            .iter()
            .filter(|i| {
                !observed
                    .iter()
                    .any(|j| j != *i && poset.leq_unchecked(j, i))
            })
            .cloned()
            .collect();
        let upset = SubsetDesc::upset_of(mins);
        let matches = poset.enumerate_to(bound)?.iter().all(|i| {
            upset.member(poset, i).is_true() == observed.contains(i)
        });
        if matches {
            return Ok(upset);
        }
    }
    Ok(SubsetDesc::explicit("observed stages", observed.iter().cloned()))
}

/// All dynamic elements visible at the bound: one maximal consistent family
/// per consistency class of the top stage.
pub fn enumerate_dynamic_elements(
    sys: &SystemRef,
    bound: &Index,
) -> Result<Vec<ConsistentFamily>> {
    let s = sys.system();
    let top = s.stage(bound)?;
    let mut reps: Vec<State> = Vec::new();
    for c in top.iter() {
        let mut joined = false;
        for r in reps.iter() {
            if s.stage_consistent(bound, c, r)? {
                joined = true;
                break;
            }
        }
        if !joined {
            reps.push(c.clone());
        }
    }
    let has_proj = sys.factor().map(FactorSystem::has_proj).unwrap_or(false);
    let mut out = Vec::new();
    for r in &reps {
        out.push(family_from_top(s, std::slice::from_ref(r), bound, has_proj)?);
    }
    out.sort_by(|a, b| a.data.cmp(&b.data));
    out.dedup_by(|a, b| a.data == b.data);
    Ok(out)
}

/// Apply a consistent family of function tables to a consistent family of
/// arguments: collect `f(a)` over all stage-matched pairs. The domain of
/// the result is the image of the function stages under the argument
/// stages.
pub fn apply_consistent(
    space: &StageSystem,
    zeta: &ConsistentFamily,
    alpha: &ConsistentFamily,
    bound: &Index,
) -> Result<ConsistentFamily> {
    if !matches!(bound, Index::Pair(_, _)) {
        return input_err(format!("application needs a pair bound, got {bound}"));
    }
    let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
    for (ij, fs) in &zeta.data.entries {
        if !space.index.leq_unchecked(ij, bound) {
            continue;
        }
        let (i, j) = match ij {
            Index::Pair(i, j) => ((**i).clone(), (**j).clone()),
            _ => return input_err(format!("function family has non-pair stage {ij}")),
        };
        for a in alpha.states_at(&i) {
            for f in fs {
                let v = f.apply(a)?.clone();
                entries.entry(j.clone()).or_default().push(v);
            }
        }
    }
    if entries.is_empty() {
        return input_err(format!(
            "application of {} to {} has no stage-matched pairs below {bound}",
            zeta.name(),
            alpha.name()
        ));
    }
    let name = format!("{}({})", zeta.name(), alpha.name());
    let data = FamilyData::new(name, entries);
    let domain = image_on(&space.index, &zeta.domain, &alpha.domain, bound)?;
    let fam = ConsistentFamily::new(data, domain);
    Ok(fam)
}

type ApproxFn = Rc<dyn Fn(&Elem, &Index, &State) -> Result<bool>>;
type DomFn = Rc<dyn Fn(&Elem) -> Result<SubsetDesc>>;
type EmbTopFn = Rc<dyn Fn(&Index, &State) -> Result<Elem>>;
type ProjTopFn = Rc<dyn Fn(&Index, &Elem) -> Result<State>>;
type EqFn = Rc<dyn Fn(&Elem, &Elem) -> Result<bool>>;

/// A carrier of elements over a stage system, with the approximation
/// relation between elements and stage states, and optionally the
/// stage-to-carrier embeddings and carrier-to-stage projections.
#[derive(Clone)]
pub struct Target {
    pub name: String,
    pub sys: SystemRef,
    pub filter: FilterSpec,
    pub carrier: Carrier,
    approx: ApproxFn,
    dom: DomFn,
    emb_top: Option<EmbTopFn>,
    proj_top: Option<ProjTopFn>,
    eq: Option<EqFn>,
}

impl Target {
    pub fn new(
        name: impl Into<String>,
        sys: SystemRef,
        filter: FilterSpec,
        carrier: Carrier,
        approx: impl Fn(&Elem, &Index, &State) -> Result<bool> + 'static,
        dom: impl Fn(&Elem) -> Result<SubsetDesc> + 'static,
    ) -> Target {
        Target {
            name: name.into(),
            sys,
            filter,
            carrier,
            approx: Rc::new(approx),
            dom: Rc::new(dom),
            emb_top: None,
            proj_top: None,
            eq: None,
        }
    }

    pub fn with_emb_top(mut self, emb: impl Fn(&Index, &State) -> Result<Elem> + 'static) -> Target {
        self.emb_top = Some(Rc::new(emb));
        self
    }

    pub fn with_proj_top(
        mut self,
        proj: impl Fn(&Index, &Elem) -> Result<State> + 'static,
    ) -> Target {
        self.proj_top = Some(Rc::new(proj));
        self
    }

    /// Override element equality. Carriers whose elements can denote one
    /// thing in several shapes compare by observation; everything else
    /// keeps structural equality.
    pub fn with_elem_eq(
        mut self,
        eq: impl Fn(&Elem, &Elem) -> Result<bool> + 'static,
    ) -> Target {
        self.eq = Some(Rc::new(eq));
        self
    }

    /// Element equality as this carrier sees it.
    pub fn elem_eq(&self, a: &Elem, b: &Elem) -> Result<bool> {
        match &self.eq {
            Some(f) => f(a, b),
            None => Ok(a == b),
        }
    }

    pub fn approx(&self, a: &Elem, i: &Index, s: &State) -> Result<bool> {
        (self.approx)(a, i, s)
    }

    pub fn dom_desc(&self, a: &Elem) -> Result<SubsetDesc> {
        (self.dom)(a)
    }

    pub fn has_emb_top(&self) -> bool {
        self.emb_top.is_some()
    }

    pub fn has_proj_top(&self) -> bool {
        self.proj_top.is_some()
    }

    pub fn emb_top(&self, i: &Index, s: &State) -> Result<Elem> {
        match &self.emb_top {
            Some(f) => f(i, s),
            None => input_err(format!("target {} has no stage embeddings", self.name)),
        }
    }

    pub fn proj_top(&self, i: &Index, a: &Elem) -> Result<State> {
        match &self.proj_top {
            Some(f) => f(i, a),
            None => input_err(format!("target {} has no stage projections", self.name)),
        }
    }

    /// The approximation family of an element, materialized below the bound.
    pub fn ext(&self, a: &Elem, bound: &Index) -> Result<ConsistentFamily> {
        let sys = self.sys.system();
        let mut entries: BTreeMap<Index, Vec<State>> = BTreeMap::new();
        for i in sys.index.enumerate_to(bound)? {
            let mut states = Vec::new();
            for s in sys.stage(&i)?.iter() {
                if self.approx(a, &i, s)? {
                    states.push(s.clone());
                }
            }
            if !states.is_empty() {
                entries.insert(i, states);
            }
        }
        Ok(ConsistentFamily::new(
            FamilyData::new(format!("ext({a})"), entries),
            self.dom_desc(a)?,
        ))
    }
}

/// The canonical limit: dynamic elements of the system as carrier, with
/// membership as approximation.
pub fn elem_target(sys: &SystemRef, filter: FilterSpec, bound: &Index) -> Result<Target> {
    let elems = enumerate_dynamic_elements(sys, bound)?;
    let carrier_elems: Vec<Elem> = elems.iter().map(|f| Elem::Fam(f.data.clone())).collect();
    let domains: BTreeMap<String, SubsetDesc> =
        elems.iter().map(|f| (f.name().to_string(), f.domain.clone())).collect();

    let ce = carrier_elems.clone();
    let carrier = Carrier::new(move |_| ce.clone());

    let approx = |a: &Elem, i: &Index, s: &State| -> Result<bool> {
        match a {
            Elem::Fam(fam) => Ok(fam.entries.get(i).map(|v| v.contains(s)).unwrap_or(false)),
            _ => input_err(format!("{a} is not a stage family")),
        }
    };

    let doms = domains.clone();
    let dom = move |a: &Elem| -> Result<SubsetDesc> {
        match a {
            Elem::Fam(fam) => doms
                .get(&fam.name)
                .cloned()
                .ok_or_else(|| Error::Input(format!("unknown family {}", fam.name))),
            _ => input_err(format!("{a} is not a stage family")),
        }
    };

    let mut target = Target::new(
        format!("elem({})", sys.name()),
        sys.clone(),
        filter,
        carrier,
        approx,
        dom,
    );

    if let Some(f) = sys.factor() {
        let fsys = f.clone();
        let has_proj = f.has_proj();
        let b = bound.clone();
        target = target.with_emb_top(move |i: &Index, s: &State| -> Result<Elem> {
            // The element generated by the whole embedding orbit of s; its
            // top representative determines the family.
            let top = fsys.emb(i, &b, s)?;
            let fam = family_from_top(&fsys.system, std::slice::from_ref(&top), &b, has_proj)?;
            Ok(Elem::Fam(fam.data))
        });
        if f.has_proj() {
            let fsys = f.clone();
            target = target.with_proj_top(move |i: &Index, a: &Elem| -> Result<State> {
                let fam = match a {
                    Elem::Fam(fam) => fam,
                    _ => return input_err(format!("{a} is not a stage family")),
                };
                if let Some(s) = fam.entries.get(i).and_then(|v| v.first()) {
                    return Ok(s.clone());
                }
                // Below the family's first stage: project any higher
                // approximation down, all choices agree up to consistency.
                for (h, states) in &fam.entries {
                    if fsys.system.index.leq_unchecked(i, h) {
                        if let Some(s) = states.first() {
                            return fsys.proj(h, i, s);
                        }
                    }
                }
                input_err(format!("{} holds nothing at or above {i}", fam.name))
            });
        }
    }

    Ok(target)
}

const T_DOM: &str = "every element is approximated at indefinitely many stages, matching its declared stage set";
const T_PRE: &str = "two approximations of one element at comparable stages are linked by descent";
const T_EMB: &str = "stage states embed into the carrier compatibly with stage embeddings, descent, and consistency";
const T_PROJ: &str = "carrier projections track approximations and cohere across stages";
const T_PROJ_DEF: &str = "projecting via any high enough approximation is well defined up to consistency";
const T_PROJ_PROP: &str = "projecting an embedded state agrees with the stage projection";
const T_EP_TOP: &str = "projecting an embedded state at its own stage returns it up to consistency";
const T_MAX: &str = "the approximation family of every element is maximal";
const T_EXT: &str = "distinct elements have incompatible approximation families";
const T_COMPL: &str = "every dynamic element is the approximation family of some element";

/// Check the target laws on all stages below `bound`, sampling carrier
/// elements at the given fuel.
pub fn check_target(target: &Target, bound: &Index, fuel: u64) -> Result<LawReport> {
    let sys = target.sys.system();
    let stages = sys.index.enumerate_to(bound)?;
    let samples = target.carrier.elems(fuel);
    let mut report = LawReport::new(target.name.clone(), bound.to_string());
    if samples.is_empty() {
        return input_err(format!("target {} has no sample elements", target.name));
    }

    // Approximation families of all samples, computed once.
    let mut exts: Vec<ConsistentFamily> = Vec::new();
    for a in &samples {
        exts.push(target.ext(a, bound)?);
    }

    // TDOM
    let mut entry = (Verdict::Pass, None);
    'dom: for (a, ext) in samples.iter().zip(&exts) {
        let desc = &ext.domain;
        for i in &stages {
            let has = !ext.states_at(i).is_empty();
            match desc.member(&sys.index, i) {
                Verdict3::True if !has => {
                    entry = (Verdict::Fail, Some(format!("{a}: declared at {i}, no approximation there")));
                    break 'dom;
                }
                Verdict3::False if has => {
                    entry = (Verdict::Fail, Some(format!("{a}: approximated at undeclared stage {i}")));
                    break 'dom;
                }
                Verdict3::Unknown => {
                    entry = (Verdict::UnknownAtBound, Some(format!("{a}: declaration undecided at {i}")));
                }
                _ => {}
            }
        }
        match target.filter.contains(desc, bound)? {
            Verdict3::True => {}
            Verdict3::False => {
                entry = (Verdict::Fail, Some(format!("{a}: stage set {} is not filter-large", desc.name)));
                break 'dom;
            }
            Verdict3::Unknown => {
                entry = (Verdict::UnknownAtBound, Some(format!("{a}: stage set {}", desc.name)));
            }
        }
    }
    report.push("TDOM", T_DOM, entry.0, entry.1, Some(format!("{} samples", samples.len())));

    // TPRE
    let mut entry = (Verdict::Pass, None);
    'pre: for (a, ext) in samples.iter().zip(&exts) {
        for (i, sa) in &ext.data.entries {
            for (j, sb) in &ext.data.entries {
                if !sys.index.leq_unchecked(j, i) {
                    continue;
                }
                for x in sa {
                    for y in sb {
                        if !sys.descends((i, x), (j, y))? {
                            entry = (
                                Verdict::Fail,
                                Some(format!("{a}: {x} at {i} does not descend to {y} at {j}")),
                            );
                            break 'pre;
                        }
                    }
                }
            }
        }
    }
    report.push("TPRE", T_PRE, entry.0, entry.1, None);

    // TEMB
    let entry = if target.has_emb_top() {
        check_temb(target, bound, &stages)?
    } else {
        (Verdict::Skip, None)
    };
    report.push("TEMB", T_EMB, entry.0, entry.1, None);

    // TPROJ
    let entry = if target.has_proj_top() {
        check_tproj(target, bound, &stages, &samples, &exts)?
    } else {
        (Verdict::Skip, None)
    };
    report.push("TPROJ", T_PROJ, entry.0, entry.1, None);

    // TPROJ_DEF and TPROJ_PROP need stage projections on the system.
    let fproj = target.sys.factor().filter(|f| f.has_proj()).cloned();
    let entry = match &fproj {
        Some(f) => check_tproj_def(target, f, &stages, &samples, &exts)?,
        None => (Verdict::Skip, None),
    };
    report.push("TPROJ_DEF", T_PROJ_DEF, entry.0, entry.1, None);

    let entry = match &fproj {
        Some(f) if target.has_emb_top() && target.has_proj_top() => {
            check_tproj_prop(target, f, &stages)?
        }
        _ => (Verdict::Skip, None),
    };
    report.push("TPROJ_PROP", T_PROJ_PROP, entry.0, entry.1, None);

    let entry = if target.has_emb_top() && target.has_proj_top() {
        check_tep_top(target, &stages)?
    } else {
        (Verdict::Skip, None)
    };
    report.push("TEP_TOP", T_EP_TOP, entry.0, entry.1, None);

    // TMAX
    let mut entry = (Verdict::Pass, None);
    'max: for (a, ext) in samples.iter().zip(&exts) {
        for j in &stages {
            let present = ext.states_at(j);
            let anchored = ext.data.entries.keys().any(|i| sys.index.leq_unchecked(j, i));
            for b in sys.stage(j)?.iter() {
                if present.contains(b) {
                    continue;
                }
                if state_compatible(sys, &ext.data, j, b)? {
                    if anchored {
                        entry = (
                            Verdict::Fail,
                            Some(format!("{a}: {b} at {j} extends the family consistently")),
                        );
                        break 'max;
                    }
                    entry = (
                        Verdict::UnknownAtBound,
                        Some(format!("{a}: {b} at {j} is unconstrained below the bound")),
                    );
                }
            }
        }
    }
    report.push("TMAX", T_MAX, entry.0, entry.1, None);

    // TEXT
    let mut entry = (Verdict::Pass, None);
    'ext: for (x, (a, ea)) in samples.iter().zip(&exts).enumerate() {
        for (b, eb) in samples.iter().zip(&exts).skip(x + 1) {
            if ea.data.entries.is_empty() || eb.data.entries.is_empty() {
                continue;
            }
            if families_compatible(sys, &ea.data, &eb.data)? {
                entry = (
                    Verdict::Fail,
                    Some(format!("{a} and {b} are distinct but share a consistent family")),
                );
                break 'ext;
            }
        }
    }
    report.push("TEXT", T_EXT, entry.0, entry.1, None);

    // TCOMPL. With carrier embeddings the limit element of a dynamic
    // element is constructed directly from its top state; without them the
    // samples are searched.
    let mut entry = (Verdict::Pass, None);
    let dyn_elems = enumerate_dynamic_elements(&target.sys, bound)?;
    'compl: for alpha in &dyn_elems {
        if target.has_emb_top() {
            let c = alpha.states_at(bound).first().cloned().ok_or_else(|| {
                Error::Input(format!("{} holds nothing at the bound", alpha.name()))
            })?;
            let a = target.emb_top(bound, &c)?;
            let ea = target.ext(&a, bound)?;
            if ea.data.entries.is_empty()
                || !families_compatible(sys, &ea.data, &alpha.data)?
            {
                entry = (
                    Verdict::Fail,
                    Some(format!(
                        "embedding the top state {c} of {} yields no limit element for it",
                        alpha.name()
                    )),
                );
                break 'compl;
            }
            continue;
        }
        let mut found = false;
        for ext in &exts {
            if !ext.data.entries.is_empty()
                && families_compatible(sys, &ext.data, &alpha.data)?
            {
                found = true;
                break;
            }
        }
        if !found {
            entry = (
                Verdict::Fail,
                Some(format!("{} has no limit element among the samples", alpha.name())),
            );
            break 'compl;
        }
    }
    report.push(
        "TCOMPL",
        T_COMPL,
        entry.0,
        entry.1,
        Some(format!("{} dynamic elements", dyn_elems.len())),
    );

    report.sort();
    Ok(report)
}

type Outcome = (Verdict, Option<String>);

fn check_temb(target: &Target, bound: &Index, stages: &[Index]) -> Result<Outcome> {
    let sys = target.sys.system();
    let factor = match target.sys.factor() {
        Some(f) => f,
        None => return Ok((Verdict::Skip, Some("no stage embeddings".into()))),
    };
    for i in stages {
        for j in stages {
            if !sys.index.leq_unchecked(i, j) {
                continue;
            }
            for a in sys.stage(i)?.iter() {
                // Coherence: embedding via a higher stage is the same element.
                let direct = target.emb_top(i, a)?;
                let via = target.emb_top(j, &factor.emb(i, j, a)?)?;
                if !target.elem_eq(&direct, &via)? {
                    return Ok((
                        Verdict::Fail,
                        Some(format!("{a} at {i}: carrier embedding differs when routed through {j}")),
                    ));
                }
                // Descent into approximation.
                for b in sys.stage(i)?.iter() {
                    if sys.descends((j, &factor.emb(i, j, a)?), (i, b))?
                        && !target.approx(&target.emb_top(j, &factor.emb(i, j, a)?)?, i, b)?
                    {
                        return Ok((
                            Verdict::Fail,
                            Some(format!(
                                "{a} embedded from {i} to {j} descends to {b}, its carrier element is not approximated by it"
                            )),
                        ));
                    }
                }
            }
            let _ = bound;
        }
        // Consistency collapse within one stage.
        let states = sys.stage(i)?;
        for a in states.iter() {
            for b in states.iter() {
                if sys.stage_consistent(i, a, b)?
                    && !target.elem_eq(&target.emb_top(i, a)?, &target.emb_top(i, b)?)?
                {
                    return Ok((
                        Verdict::Fail,
                        Some(format!("consistent {a} and {b} at {i} embed to distinct elements")),
                    ));
                }
            }
        }
    }
    Ok((Verdict::Pass, None))
}

fn check_tproj(
    target: &Target,
    _bound: &Index,
    stages: &[Index],
    samples: &[Elem],
    exts: &[ConsistentFamily],
) -> Result<Outcome> {
    let sys = target.sys.system();
    let factor_proj = target.sys.factor().filter(|f| f.has_proj()).cloned();
    for (a, ext) in samples.iter().zip(exts) {
        for i in stages {
            // The projection family is total: an error here is a failure.
            let p = match target.proj_top(i, a) {
                Ok(p) => p,
                Err(e) => return Ok((Verdict::Fail, Some(format!("{a} at {i}: {e}")))),
            };
            if sys.state_pos(i, &p)?.is_none() {
                return Ok((
                    Verdict::Fail,
                    Some(format!("{a} projects at {i} to {p}, not a state there")),
                ));
            }
            // Tracking: the projection at a higher stage descends to every
            // approximation at or below it.
            for (j, sb) in &ext.data.entries {
                if !sys.index.leq_unchecked(j, i) {
                    continue;
                }
                for s in sb {
                    if !sys.descends((i, &p), (j, s))? {
                        return Ok((
                            Verdict::Fail,
                            Some(format!(
                                "{a}: projection {p} at {i} does not descend to approximation {s} at {j}"
                            )),
                        ));
                    }
                }
            }
            // Coherence with the stage projections.
            if let Some(f) = &factor_proj {
                for j in stages {
                    if !sys.index.leq_unchecked(j, i) {
                        continue;
                    }
                    let via = f.proj(i, j, &p)?;
                    let direct = target.proj_top(j, a)?;
                    if !sys.stage_consistent(j, &via, &direct)? {
                        return Ok((
                            Verdict::Fail,
                            Some(format!(
                                "{a}: projecting at {i} then down to {j} is inconsistent with projecting at {j}"
                            )),
                        ));
                    }
                }
            }
        }
    }
    Ok((Verdict::Pass, None))
}

fn check_tproj_def(
    target: &Target,
    factor: &FactorSystem,
    stages: &[Index],
    samples: &[Elem],
    exts: &[ConsistentFamily],
) -> Result<Outcome> {
    let sys = target.sys.system();
    for (a, ext) in samples.iter().zip(exts) {
        for i in stages {
            let highers: Vec<(&Index, &Vec<State>)> = ext
                .data
                .entries
                .iter()
                .filter(|(h, _)| sys.index.leq_unchecked(i, h))
                .collect();
            let mut down: Option<(State, Index)> = None;
            for (h, states) in &highers {
                for s in states.iter() {
                    let p = factor.proj(h, i, s)?;
                    if let Some((q, hq)) = &down {
                        if !sys.stage_consistent(i, &p, q)? {
                            return Ok((
                                Verdict::Fail,
                                Some(format!(
                                    "{a}: projecting to {i} via {h} and via {hq} disagree beyond consistency"
                                )),
                            ));
                        }
                    } else {
                        down = Some((p, (*h).clone()));
                    }
                }
            }
            if let (Some((q, _)), true) = (&down, target.has_proj_top()) {
                let direct = target.proj_top(i, a)?;
                if !sys.stage_consistent(i, q, &direct)? {
                    return Ok((
                        Verdict::Fail,
                        Some(format!(
                            "{a}: the declared projection at {i} is inconsistent with projecting an approximation down"
                        )),
                    ));
                }
            }
        }
    }
    Ok((Verdict::Pass, None))
}

fn check_tproj_prop(
    target: &Target,
    factor: &FactorSystem,
    stages: &[Index],
) -> Result<Outcome> {
    let sys = target.sys.system();
    for i in stages {
        for h in stages {
            if !sys.index.leq_unchecked(i, h) {
                continue;
            }
            for s in sys.stage(h)?.iter() {
                let lhs = target.proj_top(i, &target.emb_top(h, s)?)?;
                let rhs = factor.proj(h, i, s)?;
                if !sys.stage_consistent(i, &lhs, &rhs)? {
                    return Ok((
                        Verdict::Fail,
                        Some(format!(
                            "{s} at {h}: projecting its carrier element to {i} disagrees with the stage projection"
                        )),
                    ));
                }
            }
        }
    }
    Ok((Verdict::Pass, None))
}

fn check_tep_top(target: &Target, stages: &[Index]) -> Result<Outcome> {
    let sys = target.sys.system();
    for i in stages {
        for s in sys.stage(i)?.iter() {
            let back = target.proj_top(i, &target.emb_top(i, s)?)?;
            if !sys.stage_consistent(i, &back, s)? {
                return Ok((
                    Verdict::Fail,
                    Some(format!("{s} at {i} embeds and projects back to inconsistent {back}")),
                ));
            }
        }
    }
    Ok((Verdict::Pass, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::nat_system;

    fn nat_ref() -> SystemRef {
        SystemRef::Factor(nat_system())
    }

    #[test]
    fn dynamic_elements_of_nat_are_the_numerals() {
        let elems = enumerate_dynamic_elements(&nat_ref(), &Index::Nat(5)).unwrap();
        assert_eq!(elems.len(), 5);
        for (n, fam) in elems.iter().enumerate() {
            // Numeral n lives at stages n+1 and above.
            let n = n as u64;
            for i in 1..=5u64 {
                let states = fam.states_at(&Index::Nat(i));
                if i > n {
                    assert_eq!(states, &[State::nat(n)], "numeral {n} at stage {i}");
                } else {
                    assert!(states.is_empty());
                }
            }
            assert!(
                fam.domain.member(&crate::index::IndexPoset::NatPlus, &Index::Nat(n + 1)).is_true()
            );
        }
    }

    #[test]
    fn numeral_families_are_consistent_and_large() {
        let sys = nat_ref();
        let filter = FilterSpec::Upset(crate::index::IndexPoset::NatPlus);
        for fam in enumerate_dynamic_elements(&sys, &Index::Nat(6)).unwrap() {
            let report = check_family(sys.system(), &filter, &fam, &Index::Nat(6)).unwrap();
            assert!(report.all_passed(), "{}:\n{}", fam.name(), report.render_text());
        }
    }

    #[test]
    fn closure_recovers_the_full_numeral_family() {
        let sys = nat_system();
        let partial = ConsistentFamily::new(
            FamilyData::new(
                "two-at-five",
                BTreeMap::from([(Index::Nat(5), vec![State::nat(2)])]),
            ),
            SubsetDesc::explicit("just 5", [Index::Nat(5)]),
        );
        let closed = maximal_closure(&sys.system, &partial, &Index::Nat(5)).unwrap();
        for i in 3..=5u64 {
            assert_eq!(closed.states_at(&Index::Nat(i)), &[State::nat(2)]);
        }
        for i in 1..=2u64 {
            assert!(closed.states_at(&Index::Nat(i)).is_empty());
        }
    }

    #[test]
    fn incompatible_families_are_detected() {
        let sys = nat_system();
        let two = FamilyData::new(
            "two",
            BTreeMap::from([(Index::Nat(4), vec![State::nat(2)])]),
        );
        let three = FamilyData::new(
            "three",
            BTreeMap::from([(Index::Nat(5), vec![State::nat(3)])]),
        );
        assert!(!families_compatible(&sys.system, &two, &three).unwrap());
        assert!(families_compatible(&sys.system, &two, &two).unwrap());
    }

    #[test]
    fn elem_target_is_a_limit() {
        let sys = nat_ref();
        let filter = FilterSpec::Upset(crate::index::IndexPoset::NatPlus);
        let target = elem_target(&sys, filter, &Index::Nat(5)).unwrap();
        let report = check_target(&target, &Index::Nat(5), 10).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    /// Function-stage family `(i,j) -> { table of f truncated to i }`, living
    /// on the staircase `j >= row(i)`; entries materialized below the bound.
    fn fn_family(
        name: &str,
        bound: u64,
        row: impl Fn(u64) -> u64 + Copy + 'static,
        f: impl Fn(u64, u64) -> u64,
    ) -> ConsistentFamily {
        let mut entries = BTreeMap::new();
        for i in 1..=bound {
            for j in row(i).max(1)..=bound {
                let table = State::table(
                    (0..i).map(|n| (State::nat(n), State::nat(f(n, j)))),
                )
                .unwrap();
                entries.insert(Index::pair(Index::Nat(i), Index::Nat(j)), vec![table]);
            }
        }
        ConsistentFamily::new(
            FamilyData::new(name, entries),
            SubsetDesc::rows_upset(format!("j >= row(i) for {name}"), move |l| {
                Index::Nat(row(l.as_nat().unwrap_or(0)))
            }),
        )
    }

    fn numeral_family(n: u64, bound: u64) -> ConsistentFamily {
        let entries = (n + 1..=bound)
            .map(|i| (Index::Nat(i), vec![State::nat(n)]))
            .collect();
        ConsistentFamily::new(
            FamilyData::new(format!("numeral {n}"), entries),
            SubsetDesc::upset_of([Index::Nat(n + 1)]),
        )
    }

    #[test]
    fn applying_the_identity_family_returns_the_argument() {
        let space = crate::system::function_space(&nat_system(), &nat_system()).unwrap();
        let bound = Index::pair(Index::Nat(4), Index::Nat(4));
        // Identity tables fit whenever the output stage holds the inputs.
        let id = fn_family("id", 4, |i| i, |n, _| n);
        let two = numeral_family(2, 4);
        let out = apply_consistent(&space.system, &id, &two, &bound).unwrap();
        for j in 3..=4u64 {
            assert_eq!(out.states_at(&Index::Nat(j)), &[State::nat(2)]);
        }
        assert!(out.states_at(&Index::Nat(2)).is_empty());
        let nat = nat_system();
        assert!(families_compatible(&nat.system, &out.data, &two.data).unwrap());
    }

    #[test]
    fn applying_the_successor_family_steps_the_numeral() {
        let space = crate::system::function_space(&nat_system(), &nat_system()).unwrap();
        let bound = Index::pair(Index::Nat(5), Index::Nat(5));
        // Successor tables fit whenever the output stage holds input+1.
        let succ = fn_family("succ", 5, |i| i + 1, |n, _| n + 1);
        let two = numeral_family(2, 5);
        let out = apply_consistent(&space.system, &succ, &two, &bound).unwrap();
        for j in 4..=5u64 {
            assert_eq!(out.states_at(&Index::Nat(j)), &[State::nat(3)]);
        }
        let nat = nat_system();
        let filter = FilterSpec::Upset(crate::index::IndexPoset::NatPlus);
        let three = numeral_family(3, 5);
        assert!(families_compatible(&nat.system, &out.data, &three.data).unwrap());
        assert!(family_is_consistent(&nat.system, &filter, &out, &Index::Nat(5)).unwrap());
    }

    #[test]
    fn function_families_are_consistent_in_the_function_space() {
        let space = crate::system::function_space(&nat_system(), &nat_system()).unwrap();
        let bound = Index::pair(Index::Nat(3), Index::Nat(3));
        let id = fn_family("id", 3, |i| i, |n, _| n);
        let filter = FilterSpec::product(
            FilterSpec::Upset(crate::index::IndexPoset::NatPlus),
            FilterSpec::Upset(crate::index::IndexPoset::NatPlus),
        );
        let report = check_family(&space.system, &filter, &id, &bound).unwrap();
        assert_eq!(report.verdict_of("FAM_PAIRWISE"), Some(Verdict::Pass));
    }
}
