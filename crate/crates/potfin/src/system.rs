//! Stage systems: families of finite state sets over a directed index poset,
//! linked by a descent relation from higher stages to lower ones.
//!
//! A bare system only has the descent relation. A factor-style system adds
//! stage-to-stage embeddings (upward) and optionally projections (downward).
//! Everything a law suite needs is computed inside a [`ConsistencySession`],
//! which materializes the descent relation and the derived consistency
//! relation for all stages below a bound, so the law loops are table lookups.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::index::{Index, IndexPoset, SCAN_SLACK};
use crate::report::{LawReport, Verdict};
use crate::{input_err, Error, Result};

/// A state of some stage: either an atom or a finite table, used for
/// function-space stages. Table keys are unique and sorted, so structural
/// equality is extensional equality of the tables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum State {
    Atom(String),
    Table(Vec<(State, State)>),
}

impl State {
    pub fn atom(s: impl Into<String>) -> State {
        State::Atom(s.into())
    }

    pub fn nat(n: u64) -> State {
        State::Atom(n.to_string())
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            State::Atom(s) => s.parse().ok(),
            State::Table(_) => None,
        }
    }

    /// Build a table state; keys are sorted and must be unique.
    pub fn table(entries: impl IntoIterator<Item = (State, State)>) -> Result<State> {
        let mut v: Vec<(State, State)> = entries.into_iter().collect();
        v.sort();
        for w in v.windows(2) {
            if w[0].0 == w[1].0 {
                return input_err(format!("duplicate table key {}", w[0].0));
            }
        }
        Ok(State::Table(v))
    }

    /// Look a key up in a table state.
    pub fn apply(&self, key: &State) -> Result<&State> {
        match self {
            State::Table(entries) => entries
                .binary_search_by(|(k, _)| k.cmp(key))
                .map(|pos| &entries[pos].1)
                .map_err(|_| Error::Input(format!("no table entry for {key} in {self}"))),
            State::Atom(_) => input_err(format!("cannot apply atom {self}")),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Atom(s) => f.write_str(s),
            State::Table(entries) => {
                f.write_str("{")?;
                for (n, (k, v)) in entries.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k} -> {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

type StagesFn = Rc<dyn Fn(&Index) -> Result<Vec<State>>>;
type PmapFn = Rc<dyn Fn(&Index, &State, &Index, &State) -> Result<bool>>;
type MoveFn = Rc<dyn Fn(&Index, &Index, &State) -> Result<State>>;

/// A family of finite stage sets with a descent relation.
///
/// `descends((i', a'), (i, a))` asks whether the higher state `a'` descends
/// to the lower state `a`; it is only defined for `i <= i'` and is reflexive
/// within a stage when the system is lawful.
#[derive(Clone)]
pub struct StageSystem {
    pub name: String,
    pub index: IndexPoset,
    stages_fn: StagesFn,
    pmap: PmapFn,
    cache: Rc<RefCell<HashMap<Index, Rc<Vec<State>>>>>,
}

impl fmt::Debug for StageSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StageSystem({})", self.name)
    }
}

impl StageSystem {
    pub fn new(
        name: impl Into<String>,
        index: IndexPoset,
        stages: impl Fn(&Index) -> Result<Vec<State>> + 'static,
        pmap: impl Fn(&Index, &State, &Index, &State) -> Result<bool> + 'static,
    ) -> StageSystem {
        StageSystem {
            name: name.into(),
            index,
            stages_fn: Rc::new(stages),
            pmap: Rc::new(pmap),
            cache: Rc::new(RefCell::new(HashMap::new())),
        }
    }

    /// The state set at stage `i`, sorted, memoized. Stages must be nonempty.
    pub fn stage(&self, i: &Index) -> Result<Rc<Vec<State>>> {
        if !self.index.contains(i) {
            return input_err(format!("{}: no stage at index {i}", self.name));
        }
        if let Some(hit) = self.cache.borrow().get(i) {
            return Ok(hit.clone());
        }
        let mut v = (self.stages_fn)(i)?;
        v.sort();
        v.dedup();
        if v.is_empty() {
            return input_err(format!("{}: stage {i} is empty", self.name));
        }
        let rc = Rc::new(v);
        self.cache.borrow_mut().insert(i.clone(), rc.clone());
        Ok(rc)
    }

    /// Position of a state within its sorted stage, if it is one.
    pub fn state_pos(&self, i: &Index, a: &State) -> Result<Option<usize>> {
        Ok(self.stage(i)?.binary_search(a).ok())
    }

    pub fn descends(&self, hi: (&Index, &State), lo: (&Index, &State)) -> Result<bool> {
        if !self.index.leq(lo.0, hi.0)? {
            return input_err(format!(
                "{}: descent asked from stage {} to non-lower stage {}",
                self.name, hi.0, lo.0
            ));
        }
        (self.pmap)(hi.0, hi.1, lo.0, lo.1)
    }

    /// Consistency of two states of the same stage, witnessed within a
    /// small scan window above the stage. Exact for lawful systems, where a
    /// within-stage witness always suffices.
    pub fn stage_consistent(&self, i: &Index, a: &State, b: &State) -> Result<bool> {
        let ceiling = self.index.bump(i, SCAN_SLACK);
        for k in self.index.enumerate_to(&ceiling)? {
            if !self.index.leq_unchecked(i, &k) {
                continue;
            }
            for c in self.stage(&k)?.iter() {
                if (self.pmap)(&k, c, i, a)? && (self.pmap)(&k, c, i, b)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// A stage system with embeddings upward and, optionally, projections
/// downward. Without projections the system is the embeddings-only variant.
#[derive(Clone)]
pub struct FactorSystem {
    pub system: StageSystem,
    emb: MoveFn,
    proj: Option<MoveFn>,
}

impl fmt::Debug for FactorSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FactorSystem({})", self.system.name)
    }
}

impl FactorSystem {
    pub fn new(
        system: StageSystem,
        emb: impl Fn(&Index, &Index, &State) -> Result<State> + 'static,
    ) -> FactorSystem {
        FactorSystem { system, emb: Rc::new(emb), proj: None }
    }

    pub fn with_proj(
        mut self,
        proj: impl Fn(&Index, &Index, &State) -> Result<State> + 'static,
    ) -> FactorSystem {
        self.proj = Some(Rc::new(proj));
        self
    }

    pub fn has_proj(&self) -> bool {
        self.proj.is_some()
    }

    /// Embed a state of stage `from` into stage `to >= from`.
    pub fn emb(&self, from: &Index, to: &Index, a: &State) -> Result<State> {
        if !self.system.index.leq(from, to)? {
            return input_err(format!(
                "{}: embedding asked from {from} to non-higher {to}",
                self.system.name
            ));
        }
        (self.emb)(from, to, a)
    }

    /// Project a state of stage `from` down onto stage `to <= from`.
    pub fn proj(&self, from: &Index, to: &Index, a: &State) -> Result<State> {
        if !self.system.index.leq(to, from)? {
            return input_err(format!(
                "{}: projection asked from {from} to non-lower {to}",
                self.system.name
            ));
        }
        match &self.proj {
            Some(p) => p(from, to, a),
            None => input_err(format!("{}: no projections", self.system.name)),
        }
    }
}

/// Either a bare stage system or one with embeddings/projections.
#[derive(Clone, Debug)]
pub enum SystemRef {
    Stage(StageSystem),
    Factor(FactorSystem),
}

impl SystemRef {
    pub fn system(&self) -> &StageSystem {
        match self {
            SystemRef::Stage(s) => s,
            SystemRef::Factor(f) => &f.system,
        }
    }

    pub fn factor(&self) -> Option<&FactorSystem> {
        match self {
            SystemRef::Stage(_) => None,
            SystemRef::Factor(f) => Some(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.system().name
    }
}

/// Two states, at arbitrary stages, are consistent iff some state at a stage
/// above both descends to both. The search is bounded: witnesses are sought
/// at stages below `bound` only.
pub fn consistency_witness(
    sys: &StageSystem,
    a: (&Index, &State),
    b: (&Index, &State),
    bound: &Index,
) -> Result<Option<(Index, State)>> {
    for k in sys.index.enumerate_to(bound)? {
        if !sys.index.leq_unchecked(a.0, &k) || !sys.index.leq_unchecked(b.0, &k) {
            continue;
        }
        for c in sys.stage(&k)?.iter() {
            if sys.descends((&k, c), a)? && sys.descends((&k, c), b)? {
                return Ok(Some((k, c.clone())));
            }
        }
    }
    Ok(None)
}

pub fn consistent(
    sys: &StageSystem,
    a: (&Index, &State),
    b: (&Index, &State),
    bound: &Index,
) -> Result<bool> {
    Ok(consistency_witness(sys, a, b, bound)?.is_some())
}

/// Materialized descent and consistency tables for all stages below a bound.
///
/// Holding a session keeps every law check a table lookup; the tables are
/// built once, in time proportional to the size of the descent relation.
pub struct ConsistencySession {
    pub bound: Index,
    stages: Vec<Index>,
    states: BTreeMap<Index, Rc<Vec<State>>>,
    /// Key `(hi, lo)` with `lo <= hi` in the poset: matrix `[hi_idx][lo_idx]`.
    rel: HashMap<(Index, Index), Vec<Vec<bool>>>,
    /// Key `(s, t)` canonical by `Ord`: consistent index pairs, oriented
    /// `(idx at s, idx at t)`.
    cons: HashMap<(Index, Index), HashSet<(usize, usize)>>,
    poset: IndexPoset,
}

impl ConsistencySession {
    pub fn new(sys: &StageSystem, bound: &Index) -> Result<ConsistencySession> {
        let poset = sys.index.clone();
        let stages = poset.enumerate_to(bound)?;
        let mut states = BTreeMap::new();
        for i in &stages {
            states.insert(i.clone(), sys.stage(i)?);
        }

        let mut rel: HashMap<(Index, Index), Vec<Vec<bool>>> = HashMap::new();
        for hi in &stages {
            let his = &states[hi];
            for lo in &stages {
                if !poset.leq_unchecked(lo, hi) {
                    continue;
                }
                let los = &states[lo];
                let mut m = vec![vec![false; los.len()]; his.len()];
                for (ci, c) in his.iter().enumerate() {
                    for (ai, a) in los.iter().enumerate() {
                        m[ci][ai] = sys.descends((hi, c), (lo, a))?;
                    }
                }
                rel.insert((hi.clone(), lo.clone()), m);
            }
        }

        let mut cons: HashMap<(Index, Index), HashSet<(usize, usize)>> = HashMap::new();
        for i in &stages {
            for j in &stages {
                if i <= j {
                    cons.insert((i.clone(), j.clone()), HashSet::new());
                }
            }
        }
        for k in &stages {
            let ks = &states[k];
            let lows: Vec<&Index> =
                stages.iter().filter(|i| poset.leq_unchecked(i, k)).collect();
            #[allow(clippy::needless_range_loop)]
            for ci in 0..ks.len() {
                // Down-sets of the witness candidate, one per lower stage.
                let downs: Vec<(&Index, Vec<usize>)> = lows
                    .iter()
                    .map(|i| {
                        let row = &rel[&((*k).clone(), (*i).clone())][ci];
                        let hits = row
                            .iter()
                            .enumerate()
                            .filter_map(|(ai, hit)| hit.then_some(ai))
                            .collect();
                        (*i, hits)
                    })
                    .collect();
                for (i, di) in &downs {
                    for (j, dj) in &downs {
                        if i > j {
                            continue;
                        }
                        let set = cons.get_mut(&((*i).clone(), (*j).clone())).unwrap();
                        for &ai in di {
                            for &bj in dj {
                                set.insert((ai, bj));
                                if i == j {
                                    set.insert((bj, ai));
                                }
                            }
                        }
                    }
                }
            }
        }

        Ok(ConsistencySession { bound: bound.clone(), stages, states, rel, cons, poset })
    }

    pub fn stages(&self) -> &[Index] {
        &self.stages
    }

    pub fn states(&self, i: &Index) -> &Rc<Vec<State>> {
        &self.states[i]
    }

    /// Descent by stage and position; `None` when the stages are not
    /// comparable in the required direction.
    pub fn rel_idx(&self, hi: &Index, ci: usize, lo: &Index, ai: usize) -> Option<bool> {
        self.rel.get(&(hi.clone(), lo.clone())).map(|m| m[ci][ai])
    }

    pub fn consistent_idx(&self, i: &Index, ai: usize, j: &Index, bj: usize) -> bool {
        if i <= j {
            self.cons[&(i.clone(), j.clone())].contains(&(ai, bj))
        } else {
            self.cons[&(j.clone(), i.clone())].contains(&(bj, ai))
        }
    }

    pub fn poset(&self) -> &IndexPoset {
        &self.poset
    }
}

/// The laws a stage system can be checked against. The embedding and
/// projection laws only apply to systems that have those maps.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SystemLaw {
    Fun,
    Factor,
    Stab,
    Emb,
    Proj,
    EpPair,
    EmbCoh,
    ProjCoh,
    PSurj,
}

impl SystemLaw {
    pub fn id(self) -> &'static str {
        match self {
            SystemLaw::Fun => "FUN",
            SystemLaw::Factor => "FACTOR",
            SystemLaw::Stab => "STAB",
            SystemLaw::Emb => "EMB",
            SystemLaw::Proj => "PROJ",
            SystemLaw::EpPair => "EP_PAIR",
            SystemLaw::EmbCoh => "EMB_COH",
            SystemLaw::ProjCoh => "PROJ_COH",
            SystemLaw::PSurj => "PSURJ",
        }
    }

    pub fn anchor(self) -> &'static str {
        match self {
            SystemLaw::Fun => "within a stage, consistency, descent, and equality coincide",
            SystemLaw::Factor => "across comparable stages, consistency coincides with descent",
            SystemLaw::Stab => "descent transfers along same-stage consistency",
            SystemLaw::Emb => {
                "embeddings preserve consistency, fix their own stage up to consistency, and compose up to consistency"
            }
            SystemLaw::Proj => {
                "projections preserve consistency, fix their own stage up to consistency, and compose up to consistency"
            }
            SystemLaw::EpPair => "projecting an embedded state gives it back up to consistency",
            SystemLaw::EmbCoh => "embedding the higher state of a descent keeps the descent",
            SystemLaw::ProjCoh => {
                "projecting the higher state of a descent to an intermediate stage keeps the descent"
            }
            SystemLaw::PSurj => "descent is a partial surjection onto every lower stage",
        }
    }

    pub fn parse(s: &str) -> Result<SystemLaw> {
        SystemLaw::all()
            .into_iter()
            .find(|l| l.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown law {s:?}")))
    }

    pub fn all() -> Vec<SystemLaw> {
        vec![
            SystemLaw::Fun,
            SystemLaw::Factor,
            SystemLaw::Stab,
            SystemLaw::Emb,
            SystemLaw::Proj,
            SystemLaw::EpPair,
            SystemLaw::EmbCoh,
            SystemLaw::ProjCoh,
            SystemLaw::PSurj,
        ]
    }

    pub fn applicable(self, sys: &SystemRef) -> bool {
        match self {
            SystemLaw::Fun | SystemLaw::Factor | SystemLaw::Stab => true,
            SystemLaw::Emb | SystemLaw::EmbCoh | SystemLaw::PSurj => sys.factor().is_some(),
            SystemLaw::Proj | SystemLaw::EpPair | SystemLaw::ProjCoh => {
                sys.factor().map(FactorSystem::has_proj).unwrap_or(false)
            }
        }
    }
}

struct LawRun {
    sess: ConsistencySession,
    /// Embedding maps by position: `emb_maps[(from, to)][from_idx]` is the
    /// position of the embedded state, `None` when it leaves the stage set.
    emb_maps: HashMap<(Index, Index), Vec<Option<usize>>>,
    proj_maps: HashMap<(Index, Index), Vec<Option<usize>>>,
}

type LawOutcome = (Verdict, Option<String>);

fn pass() -> LawOutcome {
    (Verdict::Pass, None)
}

fn fail(msg: String) -> LawOutcome {
    (Verdict::Fail, Some(msg))
}

impl LawRun {
    fn new(sys: &SystemRef, bound: &Index) -> Result<LawRun> {
        let sess = ConsistencySession::new(sys.system(), bound)?;
        let mut emb_maps = HashMap::new();
        let mut proj_maps = HashMap::new();
        if let Some(f) = sys.factor() {
            for from in sess.stages() {
                for to in sess.stages() {
                    if !sess.poset().leq_unchecked(from, to) {
                        continue;
                    }
                    let mut ups = Vec::new();
                    for a in sess.states(from).iter() {
                        let e = f.emb(from, to, a)?;
                        ups.push(sess.states(to).binary_search(&e).ok());
                    }
                    emb_maps.insert((from.clone(), to.clone()), ups);
                    if f.has_proj() {
                        let mut downs = Vec::new();
                        for a in sess.states(to).iter() {
                            let p = f.proj(to, from, a)?;
                            downs.push(sess.states(from).binary_search(&p).ok());
                        }
                        proj_maps.insert((to.clone(), from.clone()), downs);
                    }
                }
            }
        }
        Ok(LawRun { sess, emb_maps, proj_maps })
    }

    fn show(&self, i: &Index, idx: usize) -> String {
        format!("{} at {i}", self.sess.states(i)[idx])
    }

    /// Comparable stage pairs `(hi, lo)` with `lo <= hi`.
    fn pairs_down(&self) -> Vec<(Index, Index)> {
        let mut out = Vec::new();
        for hi in self.sess.stages() {
            for lo in self.sess.stages() {
                if self.sess.poset().leq_unchecked(lo, hi) {
                    out.push((hi.clone(), lo.clone()));
                }
            }
        }
        out
    }

    /// Comparable stage triples `lo <= mid <= hi`.
    fn triples_up(&self) -> Vec<(Index, Index, Index)> {
        let mut out = Vec::new();
        for lo in self.sess.stages() {
            for mid in self.sess.stages() {
                if !self.sess.poset().leq_unchecked(lo, mid) {
                    continue;
                }
                for hi in self.sess.stages() {
                    if self.sess.poset().leq_unchecked(mid, hi) {
                        out.push((lo.clone(), mid.clone(), hi.clone()));
                    }
                }
            }
        }
        out
    }

    fn check_fun(&self) -> LawOutcome {
        for i in self.sess.stages() {
            let n = self.sess.states(i).len();
            for a in 0..n {
                for b in 0..n {
                    let cons = self.sess.consistent_idx(i, a, i, b);
                    let desc = self.sess.rel_idx(i, a, i, b).unwrap();
                    let eq = a == b;
                    if cons != eq || desc != eq {
                        return fail(format!(
                            "{} / {}: consistent={cons}, descends={desc}, equal={eq}",
                            self.show(i, a),
                            self.show(i, b)
                        ));
                    }
                }
            }
        }
        pass()
    }

    fn check_factor(&self) -> LawOutcome {
        for (hi, lo) in self.pairs_down() {
            for a in 0..self.sess.states(&hi).len() {
                for b in 0..self.sess.states(&lo).len() {
                    let cons = self.sess.consistent_idx(&hi, a, &lo, b);
                    let desc = self.sess.rel_idx(&hi, a, &lo, b).unwrap();
                    if cons != desc {
                        return fail(format!(
                            "{} / {}: consistent={cons} but descends={desc}",
                            self.show(&hi, a),
                            self.show(&lo, b)
                        ));
                    }
                }
            }
        }
        pass()
    }

    fn check_stab(&self) -> LawOutcome {
        for (hi, lo) in self.pairs_down() {
            let nl = self.sess.states(&lo).len();
            for c in 0..self.sess.states(&hi).len() {
                for a in 0..nl {
                    if !self.sess.rel_idx(&hi, c, &lo, a).unwrap() {
                        continue;
                    }
                    for b in 0..nl {
                        if self.sess.consistent_idx(&lo, a, &lo, b)
                            && !self.sess.rel_idx(&hi, c, &lo, b).unwrap()
                        {
                            return fail(format!(
                                "{} descends to {} which is consistent with {}, but not to the latter",
                                self.show(&hi, c),
                                self.show(&lo, a),
                                self.show(&lo, b)
                            ));
                        }
                    }
                }
            }
        }
        pass()
    }

    fn move_of(
        &self,
        maps: &HashMap<(Index, Index), Vec<Option<usize>>>,
        from: &Index,
        to: &Index,
        idx: usize,
    ) -> std::result::Result<usize, LawOutcome> {
        match maps[&(from.clone(), to.clone())][idx] {
            Some(out) => Ok(out),
            None => Err(fail(format!(
                "{} maps from {from} to {to} outside the stage set",
                self.show(from, idx)
            ))),
        }
    }

    /// The three map axioms, shared by embeddings and projections: identity
    /// stays consistent, consistency is preserved, composition holds up to
    /// consistency. `maps` must be keyed `(from, to)` in movement direction.
    fn check_move_axioms(
        &self,
        maps: &HashMap<(Index, Index), Vec<Option<usize>>>,
        upward: bool,
    ) -> LawOutcome {
        // Identity at each stage.
        for i in self.sess.stages() {
            for a in 0..self.sess.states(i).len() {
                let e = match self.move_of(maps, i, i, a) {
                    Ok(e) => e,
                    Err(out) => return out,
                };
                if !self.sess.consistent_idx(i, e, i, a) {
                    return fail(format!(
                        "{} moved within its own stage is not consistent with itself",
                        self.show(i, a)
                    ));
                }
            }
        }
        // Consistency preservation along each comparable pair.
        for (hi, lo) in self.pairs_down() {
            let (from, to) = if upward { (&lo, &hi) } else { (&hi, &lo) };
            let n = self.sess.states(from).len();
            for a in 0..n {
                for b in 0..n {
                    if !self.sess.consistent_idx(from, a, from, b) {
                        continue;
                    }
                    let (ea, eb) = match (self.move_of(maps, from, to, a), self.move_of(maps, from, to, b)) {
                        (Ok(x), Ok(y)) => (x, y),
                        (Err(out), _) | (_, Err(out)) => return out,
                    };
                    if !self.sess.consistent_idx(to, ea, to, eb) {
                        return fail(format!(
                            "consistent {} / {} map to inconsistent states at {to}",
                            self.show(from, a),
                            self.show(from, b)
                        ));
                    }
                }
            }
        }
        // Composition up to consistency.
        for (lo, mid, hi) in self.triples_up() {
            let (first, second, direct) = if upward {
                ((&lo, &mid), (&mid, &hi), (&lo, &hi))
            } else {
                ((&hi, &mid), (&mid, &lo), (&hi, &lo))
            };
            let n = self.sess.states(first.0).len();
            for a in 0..n {
                let step = self
                    .move_of(maps, first.0, first.1, a)
                    .and_then(|m| self.move_of(maps, second.0, second.1, m));
                let whole = self.move_of(maps, direct.0, direct.1, a);
                let (two, one) = match (step, whole) {
                    (Ok(x), Ok(y)) => (x, y),
                    (Err(out), _) | (_, Err(out)) => return out,
                };
                if !self.sess.consistent_idx(direct.1, two, direct.1, one) {
                    return fail(format!(
                        "{} moved {} -> {} -> {} differs from the direct move beyond consistency",
                        self.show(first.0, a),
                        first.0,
                        first.1,
                        second.1
                    ));
                }
            }
        }
        pass()
    }

    fn check_ep_pair(&self) -> LawOutcome {
        for (hi, lo) in self.pairs_down() {
            for a in 0..self.sess.states(&lo).len() {
                let round = self
                    .move_of(&self.emb_maps, &lo, &hi, a)
                    .and_then(|e| self.move_of(&self.proj_maps, &hi, &lo, e));
                let back = match round {
                    Ok(b) => b,
                    Err(out) => return out,
                };
                if !self.sess.consistent_idx(&lo, back, &lo, a) {
                    return fail(format!(
                        "{} embedded to {hi} and projected back lands on {}",
                        self.show(&lo, a),
                        self.show(&lo, back)
                    ));
                }
            }
        }
        pass()
    }

    fn check_emb_coh(&self) -> LawOutcome {
        for (lo, mid, hi) in self.triples_up() {
            let nm = self.sess.states(&mid).len();
            let nl = self.sess.states(&lo).len();
            for m in 0..nm {
                for a in 0..nl {
                    if !self.sess.rel_idx(&mid, m, &lo, a).unwrap() {
                        continue;
                    }
                    let e = match self.move_of(&self.emb_maps, &mid, &hi, m) {
                        Ok(e) => e,
                        Err(out) => return out,
                    };
                    if !self.sess.rel_idx(&hi, e, &lo, a).unwrap() {
                        return fail(format!(
                            "{} descends to {}, but embedded to {hi} it no longer does",
                            self.show(&mid, m),
                            self.show(&lo, a)
                        ));
                    }
                }
            }
        }
        pass()
    }

    fn check_proj_coh(&self) -> LawOutcome {
        for (lo, mid, hi) in self.triples_up() {
            let nh = self.sess.states(&hi).len();
            let nl = self.sess.states(&lo).len();
            for c in 0..nh {
                for a in 0..nl {
                    if !self.sess.rel_idx(&hi, c, &lo, a).unwrap() {
                        continue;
                    }
                    let p = match self.move_of(&self.proj_maps, &hi, &mid, c) {
                        Ok(p) => p,
                        Err(out) => return out,
                    };
                    if !self.sess.rel_idx(&mid, p, &lo, a).unwrap() {
                        return fail(format!(
                            "{} descends to {}, but projected to {mid} it no longer does",
                            self.show(&hi, c),
                            self.show(&lo, a)
                        ));
                    }
                }
            }
        }
        pass()
    }

    fn check_psurj(&self) -> LawOutcome {
        for (hi, lo) in self.pairs_down() {
            let nl = self.sess.states(&lo).len();
            for c in 0..self.sess.states(&hi).len() {
                let downs: Vec<usize> = (0..nl)
                    .filter(|&a| self.sess.rel_idx(&hi, c, &lo, a).unwrap())
                    .collect();
                if downs.len() > 1 {
                    return fail(format!(
                        "{} descends to both {} and {}",
                        self.show(&hi, c),
                        self.show(&lo, downs[0]),
                        self.show(&lo, downs[1])
                    ));
                }
            }
            for a in 0..nl {
                let hit = (0..self.sess.states(&hi).len())
                    .any(|c| self.sess.rel_idx(&hi, c, &lo, a).unwrap());
                if !hit {
                    return fail(format!(
                        "nothing at {hi} descends to {}",
                        self.show(&lo, a)
                    ));
                }
            }
        }
        pass()
    }

    fn run(&self, law: SystemLaw) -> LawOutcome {
        match law {
            SystemLaw::Fun => self.check_fun(),
            SystemLaw::Factor => self.check_factor(),
            SystemLaw::Stab => self.check_stab(),
            SystemLaw::Emb => self.check_move_axioms(&self.emb_maps, true),
            SystemLaw::Proj => self.check_move_axioms(&self.proj_maps, false),
            SystemLaw::EpPair => self.check_ep_pair(),
            SystemLaw::EmbCoh => self.check_emb_coh(),
            SystemLaw::ProjCoh => self.check_proj_coh(),
            SystemLaw::PSurj => self.check_psurj(),
        }
    }
}

/// Check the listed laws (all applicable ones when `laws` is empty) against
/// every stage below `bound`.
pub fn check_system_laws(
    sys: &SystemRef,
    laws: &[SystemLaw],
    bound: &Index,
) -> Result<LawReport> {
    let chosen: Vec<SystemLaw> = if laws.is_empty() {
        SystemLaw::all().into_iter().filter(|l| l.applicable(sys)).collect()
    } else {
        for l in laws {
            if !l.applicable(sys) {
                return input_err(format!(
                    "law {} needs maps that system {} does not have",
                    l.id(),
                    sys.name()
                ));
            }
        }
        laws.to_vec()
    };
    let run = LawRun::new(sys, bound)?;
    let mut report = LawReport::new(sys.name(), bound.to_string());
    for law in chosen {
        let (verdict, cex) = run.run(law);
        report.push(law.id(), law.anchor(), verdict, cex, None);
    }
    report.sort();
    Ok(report)
}

pub(crate) fn default_state_cap() -> u64 {
    match std::env::var("POTFIN_CAP") {
        Ok(v) => v.parse().unwrap_or(1_000_000),
        Err(_) => 1_000_000,
    }
}

/// The function-space system `[M -> N]`: at stage `i->j` the states are the
/// total consistency-preserving tables from stage `i` of `M` to stage `j` of
/// `N`, ordered by the product of the index posets.
pub fn function_space(m: &FactorSystem, n: &FactorSystem) -> Result<FactorSystem> {
    function_space_with_cap(m, n, default_state_cap())
}

pub fn function_space_with_cap(
    m: &FactorSystem,
    n: &FactorSystem,
    cap: u64,
) -> Result<FactorSystem> {
    if !m.has_proj() || !n.has_proj() {
        return input_err("function spaces need projections on both sides".to_string());
    }
    let name = format!("[{} -> {}]", m.system.name, n.system.name);
    let index = IndexPoset::product(m.system.index.clone(), n.system.index.clone());

    let split = |ij: &Index| -> Result<(Index, Index)> {
        match ij {
            Index::Pair(i, j) => Ok(((**i).clone(), (**j).clone())),
            _ => input_err(format!("function-space stage must be a pair, got {ij}")),
        }
    };

    let (ms, ns) = (m.system.clone(), n.system.clone());
    let stages = move |ij: &Index| -> Result<Vec<State>> {
        let (i, j) = split(ij)?;
        let dom = ms.stage(&i)?;
        let cod = ns.stage(&j)?;
        let count = (cod.len() as u128).checked_pow(dom.len() as u32);
        match count {
            Some(c) if c <= cap as u128 => {}
            _ => {
                return Err(Error::Resource(format!(
                    "stage {ij} of [{} -> {}] has {}^{} tables, over the cap of {cap}",
                    ms.name,
                    ns.name,
                    cod.len(),
                    dom.len()
                )))
            }
        }
        // Consistency matrices of the two stages drive the preservation
        // filter over all assignments.
        let mut cons_dom = vec![vec![false; dom.len()]; dom.len()];
        for (x, a) in dom.iter().enumerate() {
            for (y, b) in dom.iter().enumerate() {
                cons_dom[x][y] = ms.stage_consistent(&i, a, b)?;
            }
        }
        let mut cons_cod = vec![vec![false; cod.len()]; cod.len()];
        for (x, a) in cod.iter().enumerate() {
            for (y, b) in cod.iter().enumerate() {
                cons_cod[x][y] = ns.stage_consistent(&j, a, b)?;
            }
        }
        let mut out = Vec::new();
        let mut digits = vec![0usize; dom.len()];
        'odometer: loop {
            let preserving = (0..dom.len()).all(|x| {
                (0..dom.len()).all(|y| !cons_dom[x][y] || cons_cod[digits[x]][digits[y]])
            });
            if preserving {
                let table = State::table(
                    dom.iter()
                        .enumerate()
                        .map(|(x, a)| (a.clone(), cod[digits[x]].clone())),
                )?;
                out.push(table);
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d < cod.len() {
                    continue 'odometer;
                }
                *d = 0;
            }
            break;
        }
        Ok(out)
    };

    let (ms, ns) = (m.system.clone(), n.system.clone());
    let pmap = move |hi: &Index, f1: &State, lo: &Index, f0: &State| -> Result<bool> {
        let (i1, j1) = split(hi)?;
        let (i0, j0) = split(lo)?;
        for a1 in ms.stage(&i1)?.iter() {
            for a0 in ms.stage(&i0)?.iter() {
                if !ms.descends((&i1, a1), (&i0, a0))? {
                    continue;
                }
                if !ns.descends((&j1, f1.apply(a1)?), (&j0, f0.apply(a0)?))? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };

    let system = StageSystem::new(name, index, stages, pmap);

    let (m2, n2) = (m.clone(), n.clone());
    let emb = move |from: &Index, to: &Index, f: &State| -> Result<State> {
        let (i0, j0) = match from {
            Index::Pair(a, b) => ((**a).clone(), (**b).clone()),
            _ => return input_err(format!("bad stage {from}")),
        };
        let (i1, j1) = match to {
            Index::Pair(a, b) => ((**a).clone(), (**b).clone()),
            _ => return input_err(format!("bad stage {to}")),
        };
        let dom = m2.system.stage(&i1)?;
        State::table(
            dom.iter()
                .map(|a1| {
                    let down = m2.proj(&i1, &i0, a1)?;
                    let val = n2.emb(&j0, &j1, f.apply(&down)?)?;
                    Ok((a1.clone(), val))
                })
                .collect::<Result<Vec<_>>>()?,
        )
    };

    let (m3, n3) = (m.clone(), n.clone());
    let proj = move |from: &Index, to: &Index, f: &State| -> Result<State> {
        let (i1, j1) = match from {
            Index::Pair(a, b) => ((**a).clone(), (**b).clone()),
            _ => return input_err(format!("bad stage {from}")),
        };
        let (i0, j0) = match to {
            Index::Pair(a, b) => ((**a).clone(), (**b).clone()),
            _ => return input_err(format!("bad stage {to}")),
        };
        let dom = m3.system.stage(&i0)?;
        State::table(
            dom.iter()
                .map(|a0| {
                    let up = m3.emb(&i0, &i1, a0)?;
                    let val = n3.proj(&j1, &j0, f.apply(&up)?)?;
                    Ok((a0.clone(), val))
                })
                .collect::<Result<Vec<_>>>()?,
        )
    };

    Ok(FactorSystem::new(system, emb).with_proj(proj))
}

/// Which optional equations a homomorphism claims to satisfy; the law suite
/// verifies exactly the claimed ones.
#[derive(Clone, Copy, Default, Debug)]
pub struct HomClaims {
    pub strong: bool,
    pub emb: bool,
    pub proj: bool,
    pub injective: bool,
    pub surjective: bool,
}

pub type IndexMapFn = Rc<dyn Fn(&Index) -> Result<Index>>;
pub type StateMapFn = Rc<dyn Fn(&Index, &State) -> Result<State>>;

/// A stage-wise map between two systems: an index map plus one state map per
/// stage.
#[derive(Clone)]
pub struct SystemHom {
    pub name: String,
    pub index_map: IndexMapFn,
    pub state_map: StateMapFn,
    pub claims: HomClaims,
}

impl SystemHom {
    pub fn new(
        name: impl Into<String>,
        index_map: impl Fn(&Index) -> Result<Index> + 'static,
        state_map: impl Fn(&Index, &State) -> Result<State> + 'static,
        claims: HomClaims,
    ) -> SystemHom {
        SystemHom {
            name: name.into(),
            index_map: Rc::new(index_map),
            state_map: Rc::new(state_map),
            claims,
        }
    }
}

const H_MONO: &str = "the index map is monotone";
const H_TOTAL: &str = "each stage maps into the stage at the mapped index";
const H_STEP: &str = "descent is preserved";
const H_STRONG: &str = "descent is reflected";
const H_EMB: &str = "embeddings commute with the map";
const H_PROJ: &str = "projections commute with the map";
const H_INJ: &str = "each stage map is injective";
const H_SURJ: &str = "each stage map is onto the target stage";

/// Check a homomorphism from `m` to `n` on all stages below `bound`.
pub fn check_hom(
    m: &SystemRef,
    n: &SystemRef,
    hom: &SystemHom,
    bound: &Index,
) -> Result<LawReport> {
    let ms = m.system();
    let ns = n.system();
    let stages = ms.index.enumerate_to(bound)?;
    let mut report = LawReport::new(
        format!("{}: {} -> {}", hom.name, ms.name, ns.name),
        bound.to_string(),
    );

    let mut mapped: BTreeMap<Index, Index> = BTreeMap::new();
    for i in &stages {
        let j = (hom.index_map)(i)?;
        if !ns.index.contains(&j) {
            return input_err(format!("index map sends {i} outside the target order"));
        }
        mapped.insert(i.clone(), j.clone());
    }

    let mut entry = (Verdict::Pass, None);
    'mono: for i in &stages {
        for i2 in &stages {
            if ms.index.leq_unchecked(i, i2) && !ns.index.leq_unchecked(&mapped[i], &mapped[i2]) {
                entry = fail(format!("{i} <= {i2} but {} !<= {}", mapped[i], mapped[i2]));
                break 'mono;
            }
        }
    }
    report.push("HOM_MONO", H_MONO, entry.0, entry.1, None);

    // Image positions per stage, also used by the later laws.
    let mut images: BTreeMap<Index, Vec<Option<usize>>> = BTreeMap::new();
    let mut entry = (Verdict::Pass, None);
    'total: for i in &stages {
        let tgt = ns.stage(&mapped[i])?;
        let mut row = Vec::new();
        for a in ms.stage(i)?.iter() {
            let v = (hom.state_map)(i, a)?;
            let pos = tgt.binary_search(&v).ok();
            if pos.is_none() {
                entry = fail(format!("{a} at {i} maps to {v}, not a state at {}", mapped[i]));
                images.insert(i.clone(), row);
                break 'total;
            }
            row.push(pos);
        }
        images.insert(i.clone(), row);
    }
    let total_ok = entry.0 == Verdict::Pass;
    report.push("HOM_TOTAL", H_TOTAL, entry.0, entry.1, None);

    if !total_ok {
        // The remaining laws all evaluate images.
        for (id, anchor) in [
            ("HOM_STEP", H_STEP),
            ("HOM_STRONG", H_STRONG),
            ("HOM_EMB", H_EMB),
            ("HOM_PROJ", H_PROJ),
            ("HOM_INJ", H_INJ),
            ("HOM_SURJ", H_SURJ),
        ] {
            report.push(id, anchor, Verdict::Skip, None, Some("stage map is not total".into()));
        }
        report.sort();
        return Ok(report);
    }

    let mut step = (Verdict::Pass, None);
    let mut strong = (Verdict::Pass, None);
    'step: for hi in &stages {
        for lo in &stages {
            if !ms.index.leq_unchecked(lo, hi) {
                continue;
            }
            if !ns.index.leq_unchecked(&mapped[lo], &mapped[hi]) {
                continue; // already reported by HOM_MONO
            }
            for (ci, c) in ms.stage(hi)?.iter().enumerate() {
                for (ai, a) in ms.stage(lo)?.iter().enumerate() {
                    let src = ms.descends((hi, c), (lo, a))?;
                    let hc = &ns.stage(&mapped[hi])?[images[hi][ci].unwrap()];
                    let ha = &ns.stage(&mapped[lo])?[images[lo][ai].unwrap()];
                    let dst = ns.descends((&mapped[hi], hc), (&mapped[lo], ha))?;
                    if src && !dst {
                        step = fail(format!("{c} at {hi} descends to {a} at {lo}, images do not"));
                        break 'step;
                    }
                    if hom.claims.strong && dst && !src && strong.0 == Verdict::Pass {
                        strong = fail(format!(
                            "images of {c} at {hi} and {a} at {lo} descend, sources do not"
                        ));
                    }
                }
            }
        }
    }
    report.push("HOM_STEP", H_STEP, step.0, step.1, None);
    if hom.claims.strong {
        report.push("HOM_STRONG", H_STRONG, strong.0, strong.1, None);
    } else {
        report.push("HOM_STRONG", H_STRONG, Verdict::Skip, None, Some("not claimed".into()));
    }

    let mut entry = match (m.factor(), n.factor()) {
        _ if !hom.claims.emb => (Verdict::Skip, None),
        (Some(_), Some(_)) => (Verdict::Pass, None),
        _ => (Verdict::Skip, None),
    };
    if hom.claims.emb {
        if let (Some(mf), Some(nf)) = (m.factor(), n.factor()) {
            'emb: for lo in &stages {
                for hi in &stages {
                    if !ms.index.leq_unchecked(lo, hi) {
                        continue;
                    }
                    for a in ms.stage(lo)?.iter() {
                        let lhs = (hom.state_map)(hi, &mf.emb(lo, hi, a)?)?;
                        let rhs = nf.emb(&mapped[lo], &mapped[hi], &(hom.state_map)(lo, a)?)?;
                        if lhs != rhs {
                            entry = fail(format!(
                                "embedding {a} from {lo} to {hi} then mapping gives {lhs}, mapping then embedding gives {rhs}"
                            ));
                            break 'emb;
                        }
                    }
                }
            }
        }
    }
    report.push("HOM_EMB", H_EMB, entry.0, entry.1, None);

    let mut entry = match (m.factor().filter(|f| f.has_proj()), n.factor().filter(|f| f.has_proj()))
    {
        _ if !hom.claims.proj => (Verdict::Skip, None),
        (Some(_), Some(_)) => (Verdict::Pass, None),
        _ => (Verdict::Skip, None),
    };
    if hom.claims.proj {
        if let (Some(mf), Some(nf)) =
            (m.factor().filter(|f| f.has_proj()), n.factor().filter(|f| f.has_proj()))
        {
            'proj: for lo in &stages {
                for hi in &stages {
                    if !ms.index.leq_unchecked(lo, hi) {
                        continue;
                    }
                    for a in ms.stage(hi)?.iter() {
                        let lhs = (hom.state_map)(lo, &mf.proj(hi, lo, a)?)?;
                        let rhs = nf.proj(&mapped[hi], &mapped[lo], &(hom.state_map)(hi, a)?)?;
                        if lhs != rhs {
                            entry = fail(format!(
                                "projecting {a} from {hi} to {lo} then mapping gives {lhs}, mapping then projecting gives {rhs}"
                            ));
                            break 'proj;
                        }
                    }
                }
            }
        }
    }
    report.push("HOM_PROJ", H_PROJ, entry.0, entry.1, None);

    let mut entry = if hom.claims.injective { (Verdict::Pass, None) } else { (Verdict::Skip, None) };
    if hom.claims.injective {
        'inj: for i in &stages {
            let row = &images[i];
            for x in 0..row.len() {
                for y in x + 1..row.len() {
                    if row[x] == row[y] {
                        entry = fail(format!(
                            "{} and {} at {i} have the same image",
                            ms.stage(i)?[x],
                            ms.stage(i)?[y]
                        ));
                        break 'inj;
                    }
                }
            }
        }
    }
    report.push("HOM_INJ", H_INJ, entry.0, entry.1, None);

    let mut entry = if hom.claims.surjective { (Verdict::Pass, None) } else { (Verdict::Skip, None) };
    if hom.claims.surjective {
        'surj: for i in &stages {
            let tgt = ns.stage(&mapped[i])?;
            let hit: HashSet<usize> = images[i].iter().filter_map(|p| *p).collect();
            for t in 0..tgt.len() {
                if !hit.contains(&t) {
                    entry = fail(format!("{} at {} has no preimage at {i}", tgt[t], mapped[i]));
                    break 'surj;
                }
            }
        }
    }
    report.push("HOM_SURJ", H_SURJ, entry.0, entry.1, None);

    report.sort();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Truncated naturals: stage i holds 0..i-1, descent is numeric equality
    /// where defined, embeddings are inclusions, projections clamp.
    fn mini_nat() -> FactorSystem {
        let system = StageSystem::new(
            "nat",
            IndexPoset::NatPlus,
            |i| {
                let n = i.as_nat().unwrap();
                Ok((0..n).map(State::nat).collect())
            },
            |_, a, lo, b| {
                let (x, y) = (a.as_nat().unwrap(), b.as_nat().unwrap());
                Ok(x == y && y < lo.as_nat().unwrap())
            },
        );
        FactorSystem::new(system, |_, _, a| Ok(a.clone())).with_proj(|_, to, a| {
            let n = a.as_nat().unwrap();
            Ok(State::nat(n.min(to.as_nat().unwrap() - 1)))
        })
    }

    fn bound(n: u64) -> Index {
        Index::Nat(n)
    }

    #[test]
    fn mini_nat_passes_all_laws() {
        let sys = SystemRef::Factor(mini_nat());
        let report = check_system_laws(&sys, &[], &bound(6)).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
        assert_eq!(report.laws.len(), 9);
    }

    #[test]
    fn consistency_on_mini_nat() {
        let sys = mini_nat();
        let two_at_3 = State::nat(2);
        let two_at_5 = State::nat(2);
        assert!(consistent(
            &sys.system,
            (&bound(3), &two_at_3),
            (&bound(5), &two_at_5),
            &bound(8)
        )
        .unwrap());
        assert!(!consistent(
            &sys.system,
            (&bound(3), &State::nat(2)),
            (&bound(5), &State::nat(3)),
            &bound(8)
        )
        .unwrap());
    }

    #[test]
    fn broken_reflexivity_fails_fun() {
        let system = StageSystem::new(
            "norefl",
            IndexPoset::NatPlus,
            |i| Ok((0..i.as_nat().unwrap()).map(State::nat).collect()),
            |hi, a, lo, b| {
                // Misses reflexivity at the top state of each stage.
                let (x, y) = (a.as_nat().unwrap(), b.as_nat().unwrap());
                Ok(x == y && y < lo.as_nat().unwrap() && !(hi == lo && x + 1 == hi.as_nat().unwrap()))
            },
        );
        let report =
            check_system_laws(&SystemRef::Stage(system), &[SystemLaw::Fun], &bound(4)).unwrap();
        assert_eq!(report.verdict_of("FUN"), Some(Verdict::Fail));
    }

    #[test]
    fn constant_embedding_fails_coherence() {
        let good = mini_nat();
        let system = good.system.clone();
        let broken = FactorSystem::new(system, |_, _, _| Ok(State::nat(0)))
            .with_proj(move |from, to, a| good.proj(from, to, a));
        let report = check_system_laws(
            &SystemRef::Factor(broken),
            &[SystemLaw::EmbCoh],
            &bound(5),
        )
        .unwrap();
        assert_eq!(report.verdict_of("EMB_COH"), Some(Verdict::Fail));
    }

    #[test]
    fn requesting_emb_law_on_bare_system_is_an_input_error() {
        let sys = SystemRef::Stage(mini_nat().system);
        let err = check_system_laws(&sys, &[SystemLaw::Emb], &bound(3)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn function_space_stage_counts_match_closed_form() {
        let nat = mini_nat();
        let space = function_space(&nat, &nat).unwrap();
        // Stage counts for a standard system: |cod|^|dom| tables, since
        // same-stage consistency is equality and every table preserves it.
        let s22 = space.system.stage(&Index::pair(bound(2), bound(2))).unwrap();
        assert_eq!(s22.len(), 4);
        let s33 = space.system.stage(&Index::pair(bound(3), bound(3))).unwrap();
        assert_eq!(s33.len(), 27);
    }

    #[test]
    fn function_space_projection_clamps_pointwise() {
        let nat = mini_nat();
        let space = function_space(&nat, &nat).unwrap();
        let succ = State::table([
            (State::nat(0), State::nat(1)),
            (State::nat(1), State::nat(2)),
            (State::nat(2), State::nat(0)),
        ])
        .unwrap();
        let down = space
            .proj(
                &Index::pair(bound(3), bound(3)),
                &Index::pair(bound(2), bound(2)),
                &succ,
            )
            .unwrap();
        let want = State::table([
            (State::nat(0), State::nat(1)),
            (State::nat(1), State::nat(1)),
        ])
        .unwrap();
        assert_eq!(down, want);
    }

    #[test]
    fn function_space_passes_laws_at_small_bound() {
        let nat = mini_nat();
        let space = function_space(&nat, &nat).unwrap();
        let b = Index::pair(bound(3), bound(3));
        let report = check_system_laws(&SystemRef::Factor(space), &[], &b).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn function_space_cap_is_a_resource_error() {
        let nat = mini_nat();
        let space = function_space_with_cap(&nat, &nat, 10).unwrap();
        let err = space.system.stage(&Index::pair(bound(3), bound(3))).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn shift_hom_passes_claimed_laws() {
        let nat = mini_nat();
        let sys = SystemRef::Factor(nat);
        let hom = SystemHom::new(
            "shift",
            |i| Ok(Index::Nat(i.as_nat().unwrap() + 1)),
            |_, a| Ok(a.clone()),
            HomClaims { strong: true, emb: true, injective: true, ..Default::default() },
        );
        let report = check_hom(&sys, &sys, &hom, &bound(5)).unwrap();
        assert!(!report.has_failure(), "{}", report.render_text());
        assert_eq!(report.verdict_of("HOM_SURJ"), Some(Verdict::Skip));
    }

    #[test]
    fn false_surjectivity_claim_fails() {
        let nat = mini_nat();
        let sys = SystemRef::Factor(nat);
        let hom = SystemHom::new(
            "shift",
            |i| Ok(Index::Nat(i.as_nat().unwrap() + 1)),
            |_, a| Ok(a.clone()),
            HomClaims { surjective: true, ..Default::default() },
        );
        let report = check_hom(&sys, &sys, &hom, &bound(5)).unwrap();
        assert_eq!(report.verdict_of("HOM_SURJ"), Some(Verdict::Fail));
    }

    #[test]
    fn stage_states_are_sorted_and_deduped() {
        let sys = StageSystem::new(
            "dup",
            IndexPoset::NatPlus,
            |_| Ok(vec![State::nat(1), State::nat(0), State::nat(1)]),
            |_, a, _, b| Ok(a == b),
        );
        let s = sys.stage(&bound(1)).unwrap();
        assert_eq!(s.as_slice(), &[State::nat(0), State::nat(1)]);
    }
}
