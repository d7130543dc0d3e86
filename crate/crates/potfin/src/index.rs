//! Directed index sets, finite descriptions of index subsets, and the
//! "indefinitely many" filters over them.
//!
//! Stage indices live in a directed preorder: the naturals, the positive
//! naturals, the one-point order, or binary products with the componentwise
//! order. Subsets of an index set are first-class finite descriptions
//! (explicit sets, up-sets, staircases, bounded predicates), so filter
//! membership can be decided structurally and reported as a three-way
//! verdict instead of silently guessing beyond the bound.

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use crate::report::{LawReport, Verdict};
use crate::{input_err, Result};

/// How many successor steps past a bound the deciders scan when they need to
/// look for counterexamples above a candidate.
pub const SCAN_SLACK: u64 = 2;

/// A stage index.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Index {
    /// The single index of the one-point order, written `*`.
    Unit,
    Nat(u64),
    /// A product index `l->r`.
    Pair(Box<Index>, Box<Index>),
}

impl Index {
    pub fn pair(l: Index, r: Index) -> Index {
        Index::Pair(Box::new(l), Box::new(r))
    }

    pub fn nat(n: u64) -> Index {
        Index::Nat(n)
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            Index::Nat(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&Index, &Index)> {
        match self {
            Index::Pair(l, r) => Some((l, r)),
            _ => None,
        }
    }

    /// Largest `Nat` component anywhere inside, 0 if there is none.
    /// Used to derive enumeration fuel from a bound.
    pub fn max_nat(&self) -> u64 {
        match self {
            Index::Unit => 0,
            Index::Nat(n) => *n,
            Index::Pair(l, r) => l.max_nat().max(r.max_nat()),
        }
    }

    /// Parse the `Display` form back: `*`, `7`, `2->3`, `(1->2)->3`.
    pub fn parse(s: &str) -> Result<Index> {
        fn split_arrow(s: &str) -> Option<(&str, &str)> {
            let bytes = s.as_bytes();
            let mut depth = 0usize;
            let mut i = 0;
            while i < bytes.len() {
                match bytes[i] {
                    b'(' => depth += 1,
                    b')' => depth = depth.saturating_sub(1),
                    b'-' if depth == 0 && i + 1 < bytes.len() && bytes[i + 1] == b'>' => {
                        return Some((&s[..i], &s[i + 2..]));
                    }
                    _ => {}
                }
                i += 1;
            }
            None
        }
        let s = s.trim();
        if let Some((l, r)) = split_arrow(s) {
            return Ok(Index::pair(Index::parse(l)?, Index::parse(r)?));
        }
        if let Some(inner) = s.strip_prefix('(') {
            if let Some(inner) = inner.strip_suffix(')') {
                return Index::parse(inner);
            }
        }
        if s == "*" {
            return Ok(Index::Unit);
        }
        match s.parse::<u64>() {
            Ok(n) => Ok(Index::Nat(n)),
            Err(_) => input_err(format!("cannot parse index {s:?}")),
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Unit => f.write_str("*"),
            Index::Nat(n) => write!(f, "{n}"),
            Index::Pair(l, r) => {
                if matches!(**l, Index::Pair(..)) {
                    write!(f, "({l})->{r}")
                } else {
                    write!(f, "{l}->{r}")
                }
            }
        }
    }
}

/// A directed index poset with a decidable order, joins, and a finite
/// enumerable prefix below every bound.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum IndexPoset {
    /// 0, 1, 2, ...
    Nat,
    /// 1, 2, 3, ...
    NatPlus,
    /// The one-point order.
    Trivial,
    /// Binary product, componentwise order.
    Product(Box<IndexPoset>, Box<IndexPoset>),
}

impl IndexPoset {
    pub fn product(l: IndexPoset, r: IndexPoset) -> IndexPoset {
        IndexPoset::Product(Box::new(l), Box::new(r))
    }

    pub fn contains(&self, i: &Index) -> bool {
        match (self, i) {
            (IndexPoset::Nat, Index::Nat(_)) => true,
            (IndexPoset::NatPlus, Index::Nat(n)) => *n >= 1,
            (IndexPoset::Trivial, Index::Unit) => true,
            (IndexPoset::Product(pl, pr), Index::Pair(l, r)) => pl.contains(l) && pr.contains(r),
            _ => false,
        }
    }

    fn check_member(&self, i: &Index) -> Result<()> {
        if self.contains(i) {
            Ok(())
        } else {
            input_err(format!("index {i} is not in the poset {self:?}"))
        }
    }

    pub fn leq(&self, i: &Index, j: &Index) -> Result<bool> {
        self.check_member(i)?;
        self.check_member(j)?;
        Ok(self.leq_unchecked(i, j))
    }

    pub(crate) fn leq_unchecked(&self, i: &Index, j: &Index) -> bool {
        match (self, i, j) {
            (IndexPoset::Nat | IndexPoset::NatPlus, Index::Nat(a), Index::Nat(b)) => a <= b,
            (IndexPoset::Trivial, Index::Unit, Index::Unit) => true,
            (IndexPoset::Product(pl, pr), Index::Pair(il, ir), Index::Pair(jl, jr)) => {
                pl.leq_unchecked(il, jl) && pr.leq_unchecked(ir, jr)
            }
            _ => false,
        }
    }

    /// Least upper bound. All shipped posets have true joins.
    pub fn join(&self, i: &Index, j: &Index) -> Result<Index> {
        self.check_member(i)?;
        self.check_member(j)?;
        Ok(self.join_unchecked(i, j))
    }

    pub(crate) fn join_unchecked(&self, i: &Index, j: &Index) -> Index {
        match (self, i, j) {
            (IndexPoset::Nat | IndexPoset::NatPlus, Index::Nat(a), Index::Nat(b)) => {
                Index::Nat(*a.max(b))
            }
            (IndexPoset::Trivial, Index::Unit, Index::Unit) => Index::Unit,
            (IndexPoset::Product(pl, pr), Index::Pair(il, ir), Index::Pair(jl, jr)) => Index::pair(
                pl.join_unchecked(il, jl),
                pr.join_unchecked(ir, jr),
            ),
            _ => unreachable!("join on checked members"),
        }
    }

    /// Least index of the poset.
    pub fn min_index(&self) -> Index {
        match self {
            IndexPoset::Nat => Index::Nat(0),
            IndexPoset::NatPlus => Index::Nat(1),
            IndexPoset::Trivial => Index::Unit,
            IndexPoset::Product(l, r) => Index::pair(l.min_index(), r.min_index()),
        }
    }

    /// Step `i` upward `steps` times (each Nat component +steps).
    pub fn bump(&self, i: &Index, steps: u64) -> Index {
        match (self, i) {
            (IndexPoset::Nat | IndexPoset::NatPlus, Index::Nat(n)) => Index::Nat(n + steps),
            (IndexPoset::Trivial, Index::Unit) => Index::Unit,
            (IndexPoset::Product(pl, pr), Index::Pair(l, r)) => {
                Index::pair(pl.bump(l, steps), pr.bump(r, steps))
            }
            _ => i.clone(),
        }
    }

    /// All indices below the bound, sorted. The bound itself is included and
    /// is the unique maximum of the enumerated prefix.
    pub fn enumerate_to(&self, bound: &Index) -> Result<Vec<Index>> {
        self.check_member(bound)?;
        Ok(self.enumerate_unchecked(bound))
    }

    fn enumerate_unchecked(&self, bound: &Index) -> Vec<Index> {
        match (self, bound) {
            (IndexPoset::Nat, Index::Nat(b)) => (0..=*b).map(Index::Nat).collect(),
            (IndexPoset::NatPlus, Index::Nat(b)) => (1..=*b).map(Index::Nat).collect(),
            (IndexPoset::Trivial, Index::Unit) => vec![Index::Unit],
            (IndexPoset::Product(pl, pr), Index::Pair(bl, br)) => {
                let ls = pl.enumerate_unchecked(bl);
                let rs = pr.enumerate_unchecked(br);
                let mut out = Vec::with_capacity(ls.len() * rs.len());
                for l in &ls {
                    for r in &rs {
                        out.push(Index::pair(l.clone(), r.clone()));
                    }
                }
                out.sort();
                out
            }
            _ => unreachable!("enumerate on checked bound"),
        }
    }

    /// Whether the whole poset is finite (so a scan can be exhaustive).
    pub fn is_finite(&self) -> bool {
        match self {
            IndexPoset::Nat | IndexPoset::NatPlus => false,
            IndexPoset::Trivial => true,
            IndexPoset::Product(l, r) => l.is_finite() && r.is_finite(),
        }
    }

    /// A bound index whose Nat components are all `fuel`.
    pub fn uniform_bound(&self, fuel: u64) -> Index {
        match self {
            IndexPoset::Nat => Index::Nat(fuel),
            IndexPoset::NatPlus => Index::Nat(fuel.max(1)),
            IndexPoset::Trivial => Index::Unit,
            IndexPoset::Product(l, r) => Index::pair(l.uniform_bound(fuel), r.uniform_bound(fuel)),
        }
    }
}

/// Three-way answer for membership questions that may be undecidable below a
/// bound. `Unknown` is never treated as pass by any law suite.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict3 {
    True,
    False,
    Unknown,
}

impl Verdict3 {
    pub fn from_bool(b: bool) -> Verdict3 {
        if b {
            Verdict3::True
        } else {
            Verdict3::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Verdict3::True
    }

    /// Report verdict for a law that demanded `True`.
    pub fn demanding_true(self) -> Verdict {
        match self {
            Verdict3::True => Verdict::Pass,
            Verdict3::False => Verdict::Fail,
            Verdict3::Unknown => Verdict::UnknownAtBound,
        }
    }
}

impl std::fmt::Display for Verdict3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict3::True => "true",
            Verdict3::False => "false",
            Verdict3::Unknown => "unknown",
        })
    }
}

type PredFn = Rc<dyn Fn(&Index) -> Verdict3>;
type RowFn = Rc<dyn Fn(&Index) -> Vec<Index>>;

#[derive(Clone)]
enum DescKind {
    Explicit(BTreeSet<Index>),
    /// Union of up-sets of the listed generators. Upward closed by
    /// construction.
    UpsetOf(Vec<Index>),
    /// Over a product order: `{ l->r : r >= g for some g in rows(l) }`, a
    /// staircase. Each column is a finite union of up-sets of the right
    /// factor by construction, which keeps staircases closed under union
    /// and intersection.
    RowsUpset(RowFn),
    Pred {
        fun: PredFn,
        /// Caller-asserted upward closure; lets the up-set witness search
        /// decide membership from a single point.
        upward_closed: bool,
        /// A certified generator `w` with the whole up-set of `w` inside.
        upset_witness: Option<Index>,
    },
}

/// A finite description of a subset of an index poset.
///
/// Descriptions, not raw sets, are what the filters judge: the kind of the
/// description determines how much can be decided below a bound.
#[derive(Clone)]
pub struct SubsetDesc {
    pub name: String,
    kind: DescKind,
}

impl fmt::Debug for SubsetDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetDesc({})", self.name)
    }
}

impl SubsetDesc {
    pub fn explicit(name: impl Into<String>, members: impl IntoIterator<Item = Index>) -> Self {
        SubsetDesc { name: name.into(), kind: DescKind::Explicit(members.into_iter().collect()) }
    }

    pub fn empty() -> Self {
        Self::explicit("{}", [])
    }

    pub fn upset_of(gens: impl IntoIterator<Item = Index>) -> Self {
        let gens: Vec<Index> = gens.into_iter().collect();
        let name = match gens.as_slice() {
            [g] => format!("up({g})"),
            _ => format!(
                "up({})",
                gens.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(", ")
            ),
        };
        SubsetDesc { name, kind: DescKind::UpsetOf(gens) }
    }

    /// The staircase `{ l->r : r >= row(l) }` over a product order.
    pub fn rows_upset(name: impl Into<String>, row: impl Fn(&Index) -> Index + 'static) -> Self {
        SubsetDesc {
            name: name.into(),
            kind: DescKind::RowsUpset(Rc::new(move |l| vec![row(l)])),
        }
    }

    /// Staircase with any number of generators per row. An empty row claims
    /// no membership at that left index.
    pub fn rows_upset_many(
        name: impl Into<String>,
        rows: impl Fn(&Index) -> Vec<Index> + 'static,
    ) -> Self {
        SubsetDesc { name: name.into(), kind: DescKind::RowsUpset(Rc::new(rows)) }
    }

    /// Staircase form of this description, when it has one. Up-set unions
    /// over a product order convert exactly: the column at `l` is generated
    /// by the right parts of generators whose left part is below `l`.
    fn to_rows(&self) -> Option<RowFn> {
        match &self.kind {
            DescKind::RowsUpset(rows) => Some(rows.clone()),
            DescKind::UpsetOf(gens) => {
                let mut pairs = Vec::new();
                for g in gens {
                    match g {
                        Index::Pair(l, r) => pairs.push(((**l).clone(), (**r).clone())),
                        _ => return None,
                    }
                }
                Some(Rc::new(move |l| {
                    pairs
                        .iter()
                        .filter(|(gl, _)| plain_leq(gl, l))
                        .map(|(_, gr)| gr.clone())
                        .collect()
                }))
            }
            _ => None,
        }
    }

    /// A predicate decidable everywhere.
    pub fn pred(name: impl Into<String>, fun: impl Fn(&Index) -> bool + 'static) -> Self {
        SubsetDesc {
            name: name.into(),
            kind: DescKind::Pred {
                fun: Rc::new(move |i| Verdict3::from_bool(fun(i))),
                upward_closed: false,
                upset_witness: None,
            },
        }
    }

    /// A predicate only decidable below `eval_bound` (w.r.t. `poset` order);
    /// membership beyond answers `Unknown`.
    pub fn pred_bounded(
        name: impl Into<String>,
        poset: IndexPoset,
        eval_bound: Index,
        fun: impl Fn(&Index) -> bool + 'static,
    ) -> Self {
        SubsetDesc {
            name: name.into(),
            kind: DescKind::Pred {
                fun: Rc::new(move |i| {
                    if poset.leq_unchecked(i, &eval_bound) {
                        Verdict3::from_bool(fun(i))
                    } else {
                        Verdict3::Unknown
                    }
                }),
                upward_closed: false,
                upset_witness: None,
            },
        }
    }

    fn pred3(name: String, fun: PredFn, upward_closed: bool, upset_witness: Option<Index>) -> Self {
        SubsetDesc { name, kind: DescKind::Pred { fun, upward_closed, upset_witness } }
    }

    /// Assert upward closure of this description (the law suite re-checks the
    /// assertion on the enumerated range).
    pub fn asserted_upward_closed(mut self) -> Self {
        if let DescKind::Pred { upward_closed, .. } = &mut self.kind {
            *upward_closed = true;
        }
        self
    }

    pub fn member(&self, poset: &IndexPoset, i: &Index) -> Verdict3 {
        if !poset.contains(i) {
            return Verdict3::False;
        }
        match &self.kind {
            DescKind::Explicit(s) => Verdict3::from_bool(s.contains(i)),
            DescKind::UpsetOf(gens) => {
                Verdict3::from_bool(gens.iter().any(|g| poset.leq_unchecked(g, i)))
            }
            DescKind::RowsUpset(rows) => match (i, poset) {
                (Index::Pair(l, r), IndexPoset::Product(_, pr)) => Verdict3::from_bool(
                    rows(l).iter().any(|g| pr.contains(g) && pr.leq_unchecked(g, r)),
                ),
                _ => Verdict3::False,
            },
            DescKind::Pred { fun, .. } => fun(i),
        }
    }

    /// `Some(true)` when upward closure is known by construction or asserted.
    pub fn upward_closed(&self) -> Option<bool> {
        match &self.kind {
            DescKind::UpsetOf(_) => Some(true),
            DescKind::Pred { upward_closed: true, .. } => Some(true),
            _ => None,
        }
    }

    /// A generator whose whole up-set is certified to lie inside.
    pub fn upset_witness(&self) -> Option<Index> {
        match &self.kind {
            DescKind::UpsetOf(gens) => gens.first().cloned(),
            DescKind::Pred { upset_witness, .. } => upset_witness.clone(),
            _ => None,
        }
    }

    fn is_explicit(&self) -> bool {
        matches!(self.kind, DescKind::Explicit(_))
    }

    /// Members below the bound, materialized.
    pub fn materialize(&self, poset: &IndexPoset, bound: &Index) -> Result<Vec<Index>> {
        let mut out = Vec::new();
        for i in poset.enumerate_to(bound)? {
            if self.member(poset, &i).is_true() {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Intersection. Exact up-set form when both sides are up-set unions
    /// (the shipped posets are lattices), exact staircase form when both
    /// sides have one, otherwise a conjunction predicate.
    pub fn intersect(poset: &IndexPoset, a: &SubsetDesc, b: &SubsetDesc) -> SubsetDesc {
        let name = format!("({} ∩ {})", a.name, b.name);
        if let (DescKind::UpsetOf(ga), DescKind::UpsetOf(gb)) = (&a.kind, &b.kind) {
            let mut gens = Vec::new();
            for x in ga {
                for y in gb {
                    gens.push(poset.join_unchecked(x, y));
                }
            }
            return SubsetDesc { name, kind: DescKind::UpsetOf(gens) };
        }
        if let IndexPoset::Product(_, pr) = poset {
            if let (Some(ra), Some(rb)) = (a.to_rows(), b.to_rows()) {
                let pr = (**pr).clone();
                return SubsetDesc {
                    name,
                    kind: DescKind::RowsUpset(Rc::new(move |l| {
                        let (ga, gb) = (ra(l), rb(l));
                        let mut out = Vec::with_capacity(ga.len() * gb.len());
                        for x in &ga {
                            for y in &gb {
                                out.push(pr.join_unchecked(x, y));
                            }
                        }
                        out
                    })),
                };
            }
        }
        let witness = match (a.upset_witness(), b.upset_witness()) {
            (Some(x), Some(y)) => Some(poset.join_unchecked(&x, &y)),
            _ => None,
        };
        let uc = a.upward_closed() == Some(true) && b.upward_closed() == Some(true);
        let (pa, pb, pp) = (a.clone(), b.clone(), poset.clone());
        SubsetDesc::pred3(
            name,
            Rc::new(move |i| match (pa.member(&pp, i), pb.member(&pp, i)) {
                (Verdict3::False, _) | (_, Verdict3::False) => Verdict3::False,
                (Verdict3::True, Verdict3::True) => Verdict3::True,
                _ => Verdict3::Unknown,
            }),
            uc,
            witness,
        )
    }

    /// Union, kept structural for up-set unions and staircases.
    pub fn union(poset: &IndexPoset, a: &SubsetDesc, b: &SubsetDesc) -> SubsetDesc {
        let name = format!("({} ∪ {})", a.name, b.name);
        if let (DescKind::UpsetOf(ga), DescKind::UpsetOf(gb)) = (&a.kind, &b.kind) {
            let mut gens = ga.clone();
            gens.extend(gb.iter().cloned());
            return SubsetDesc { name, kind: DescKind::UpsetOf(gens) };
        }
        if matches!(poset, IndexPoset::Product(..)) {
            if let (Some(ra), Some(rb)) = (a.to_rows(), b.to_rows()) {
                return SubsetDesc {
                    name,
                    kind: DescKind::RowsUpset(Rc::new(move |l| {
                        let mut out = ra(l);
                        out.extend(rb(l));
                        out
                    })),
                };
            }
        }
        let witness = a.upset_witness().or_else(|| b.upset_witness());
        let uc = a.upward_closed() == Some(true) && b.upward_closed() == Some(true);
        let (pa, pb, pp) = (a.clone(), b.clone(), poset.clone());
        SubsetDesc::pred3(
            name,
            Rc::new(move |i| match (pa.member(&pp, i), pb.member(&pp, i)) {
                (Verdict3::True, _) | (_, Verdict3::True) => Verdict3::True,
                (Verdict3::False, Verdict3::False) => Verdict3::False,
                _ => Verdict3::Unknown,
            }),
            uc,
            witness,
        )
    }

    /// The column `{ r : l->r inside }` of a product-order subset at `l`.
    /// Structural for the structural kinds.
    pub fn slice_right(&self, l: &Index) -> SubsetDesc {
        let name = format!("{}[{l}]", self.name);
        match &self.kind {
            DescKind::Explicit(s) => SubsetDesc::explicit(
                name,
                s.iter().filter_map(|i| match i {
                    Index::Pair(il, ir) if **il == *l => Some((**ir).clone()),
                    _ => None,
                }),
            ),
            DescKind::UpsetOf(gens) => {
                // Column of a union of boxes: up-sets of the right parts of
                // generators whose left part is below l. Needs the left
                // order; generators of product up-sets are pairs, and the
                // left comparison is componentwise on Nat/Unit parts.
                let mut rgens = Vec::new();
                for g in gens {
                    if let Index::Pair(gl, gr) = g {
                        if plain_leq(gl, l) {
                            rgens.push((**gr).clone());
                        }
                    }
                }
                SubsetDesc { name, kind: DescKind::UpsetOf(rgens) }
            }
            DescKind::RowsUpset(rows) => SubsetDesc::upset_of(rows(l)),
            DescKind::Pred { fun, .. } => {
                let fun = fun.clone();
                let l = l.clone();
                SubsetDesc::pred3(
                    name,
                    Rc::new(move |r| fun(&Index::pair(l.clone(), r.clone()))),
                    false,
                    None,
                )
            }
        }
    }
}

/// Structural order on bare indices (componentwise on equal shapes), used
/// where the owning poset is not at hand.
fn plain_leq(i: &Index, j: &Index) -> bool {
    match (i, j) {
        (Index::Nat(a), Index::Nat(b)) => a <= b,
        (Index::Unit, Index::Unit) => true,
        (Index::Pair(il, ir), Index::Pair(jl, jr)) => plain_leq(il, jl) && plain_leq(ir, jr),
        _ => false,
    }
}

/// Which subsets of an index set count as "indefinitely many" indices.
#[derive(Clone, Debug)]
pub enum FilterSpec {
    /// Sets containing a whole up-set.
    Upset(IndexPoset),
    /// Over a product order: the set is in iff the set of left indices whose
    /// column is in the right filter is itself in the left filter.
    Product(Box<FilterSpec>, Box<FilterSpec>),
    /// Accepts everything, the empty set included. Violates the filter laws
    /// on purpose; exists so the law suite has something to catch.
    AcceptAll(IndexPoset),
}

impl FilterSpec {
    pub fn product(l: FilterSpec, r: FilterSpec) -> FilterSpec {
        FilterSpec::Product(Box::new(l), Box::new(r))
    }

    /// The natural filter for a poset: product filters over product orders,
    /// up-set filters elsewhere.
    pub fn default_for(poset: &IndexPoset) -> FilterSpec {
        match poset {
            IndexPoset::Product(l, r) => {
                FilterSpec::product(Self::default_for(l), Self::default_for(r))
            }
            p => FilterSpec::Upset(p.clone()),
        }
    }

    pub fn base_poset(&self) -> IndexPoset {
        match self {
            FilterSpec::Upset(p) | FilterSpec::AcceptAll(p) => p.clone(),
            FilterSpec::Product(l, r) => IndexPoset::product(l.base_poset(), r.base_poset()),
        }
    }

    /// Decide whether the described subset is filter-large, scanning
    /// witnesses below `bound` and counterexamples up to `bound` plus two
    /// successor steps.
    pub fn contains(&self, desc: &SubsetDesc, bound: &Index) -> Result<Verdict3> {
        match self {
            FilterSpec::AcceptAll(_) => Ok(Verdict3::True),
            FilterSpec::Upset(poset) => upset_filter_contains(poset, desc, bound),
            FilterSpec::Product(fl, fr) => {
                let (bl, br) = match bound {
                    Index::Pair(l, r) => ((**l).clone(), (**r).clone()),
                    _ => return input_err(format!("product filter needs a pair bound, got {bound}")),
                };
                // Staircase route: a generated column contains a whole
                // up-set, which every filter accepts, so the good-column set
                // is exactly where the rows are nonempty. That fact is
                // independent of the bound; deriving the outer set from
                // bounded column checks instead would refute columns whose
                // generators merely sit above the bound.
                if let Some(rows) = desc.to_rows() {
                    let outer = SubsetDesc::pred3(
                        format!("{{l : column of {} at l is generated}}", desc.name),
                        Rc::new(move |l| Verdict3::from_bool(!rows(l).is_empty())),
                        true,
                        None,
                    );
                    return fl.contains(&outer, &bl);
                }
                let fr2 = fr.clone();
                let desc2 = desc.clone();
                let br2 = br.clone();
                let uc = desc.upward_closed() == Some(true);
                let outer = SubsetDesc::pred3(
                    format!("{{l : column of {} at l is filter-large}}", desc.name),
                    Rc::new(move |l| {
                        fr2.contains(&desc2.slice_right(l), &br2).unwrap_or(Verdict3::Unknown)
                    }),
                    uc,
                    None,
                );
                fl.contains(&outer, &bl)
            }
        }
    }

    /// Law suite for this filter. `samples` are descriptions over the base
    /// poset; for product filters `left_subsets` feed the image law.
    pub fn check_laws(
        &self,
        bound: &Index,
        samples: &FilterSamples,
    ) -> Result<LawReport> {
        check_filter_laws(self, bound, samples)
    }
}

fn upset_filter_contains(
    poset: &IndexPoset,
    desc: &SubsetDesc,
    bound: &Index,
) -> Result<Verdict3> {
    let scan_hi = poset.bump(bound, SCAN_SLACK);
    let scan = poset.enumerate_to(&scan_hi)?;

    // Certified witness first; trust it only after it survives the scan.
    if let Some(w) = desc.upset_witness() {
        if poset.contains(&w) && poset.leq_unchecked(&w, bound) {
            let lied = scan
                .iter()
                .filter(|j| poset.leq_unchecked(&w, j))
                .any(|j| desc.member(poset, j) == Verdict3::False);
            if !lied {
                return Ok(Verdict3::True);
            }
        }
    }

    let mut saw_unknown = false;
    for cand in poset.enumerate_to(bound)? {
        match upset_below(poset, desc, &cand, &scan) {
            Verdict3::True => return Ok(Verdict3::True),
            Verdict3::Unknown => saw_unknown = true,
            Verdict3::False => {}
        }
    }
    Ok(if saw_unknown { Verdict3::Unknown } else { Verdict3::False })
}

/// Is the whole up-set of `cand` inside the description?
fn upset_below(
    poset: &IndexPoset,
    desc: &SubsetDesc,
    cand: &Index,
    scan: &[Index],
) -> Verdict3 {
    if desc.upward_closed() == Some(true) {
        return desc.member(poset, cand);
    }
    if desc.is_explicit() && !poset.is_finite() {
        // A finite set cannot contain an infinite up-set.
        return Verdict3::False;
    }
    let mut saw_unknown = false;
    for j in scan.iter().filter(|j| poset.leq_unchecked(cand, j)) {
        match desc.member(poset, j) {
            Verdict3::False => return Verdict3::False,
            Verdict3::Unknown => saw_unknown = true,
            Verdict3::True => {}
        }
    }
    if poset.is_finite() && !saw_unknown {
        Verdict3::True
    } else {
        Verdict3::Unknown
    }
}

/// The image `{ r : some l in left with l->r inside }` of a product-order
/// subset under a left subset, materialized below the bound and decidable
/// lazily beyond it. Carries a certified witness when the shapes allow one.
pub fn image_on(
    poset: &IndexPoset,
    h: &SubsetDesc,
    left: &SubsetDesc,
    bound: &Index,
) -> Result<SubsetDesc> {
    let (pl, _pr) = match poset {
        IndexPoset::Product(l, r) => (l.clone(), r.clone()),
        _ => return input_err("image_on needs a product poset".to_string()),
    };
    let (bl, _br) = match bound {
        Index::Pair(l, r) => ((**l).clone(), (**r).clone()),
        _ => return input_err(format!("image_on needs a pair bound, got {bound}")),
    };

    // Certified witness: a staircase over a left up-set keeps the whole
    // up-set of row(w) in the image; a box generator a->b contributes up(b)
    // as soon as some left member is above a.
    // Certified witness: with a left up-set generator w, the image contains
    // the whole column at every l above w, and a generated column is a union
    // of up-sets. Scan for the first generated column at or above w.
    let witness = match (h.to_rows(), left.upset_witness()) {
        (Some(rows), Some(w)) => pl
            .enumerate_unchecked(&pl.bump(&bl, SCAN_SLACK))
            .into_iter()
            .filter(|l| pl.contains(&w) && pl.leq_unchecked(&w, l))
            .find_map(|l| rows(&l).into_iter().next()),
        _ => None,
    };

    let lefts: Vec<Index> = pl
        .enumerate_to(&pl.bump(&bl, SCAN_SLACK))?
        .into_iter()
        .filter(|l| left.member(&pl, l).is_true())
        .collect();
    let h2 = h.clone();
    let poset2 = poset.clone();
    let name = format!("{}[{}]", h.name, left.name);
    Ok(SubsetDesc::pred3(
        name,
        Rc::new(move |r| {
            let mut saw_unknown = false;
            for l in &lefts {
                match h2.member(&poset2, &Index::pair(l.clone(), r.clone())) {
                    Verdict3::True => return Verdict3::True,
                    Verdict3::Unknown => saw_unknown = true,
                    Verdict3::False => {}
                }
            }
            if saw_unknown {
                Verdict3::Unknown
            } else {
                Verdict3::False
            }
        }),
        false,
        witness,
    ))
}

/// Sample material for the filter law suite.
#[derive(Default)]
pub struct FilterSamples {
    /// Descriptions over the filter's base poset.
    pub subsets: Vec<SubsetDesc>,
    /// For product filters: descriptions over the left factor, used to
    /// exercise the image law.
    pub left_subsets: Vec<SubsetDesc>,
}

impl FilterSamples {
    pub fn new(subsets: Vec<SubsetDesc>) -> Self {
        FilterSamples { subsets, left_subsets: Vec::new() }
    }

    pub fn with_left(mut self, left: Vec<SubsetDesc>) -> Self {
        self.left_subsets = left;
        self
    }
}

const A_UPSETS: &str = "every up-set is filter-large";
const A_PROPER: &str = "the empty set is not filter-large";
const A_UPCLOSED: &str = "supersets of filter-large sets are filter-large";
const A_CAP: &str = "intersections of filter-large sets are filter-large";
const A_COFIN: &str = "filter-large sets are cofinal below the bound";
const A_IMAGE: &str = "images of filter-large product sets under filter-large left sets are filter-large";

fn check_filter_laws(
    filter: &FilterSpec,
    bound: &Index,
    samples: &FilterSamples,
) -> Result<LawReport> {
    let poset = filter.base_poset();
    let mut report = LawReport::new(format!("filter over {poset:?}"), bound.to_string());
    report.laws.reserve(8);

    // FILT_UPSETS
    let mut entry = (Verdict::Pass, None);
    for i in poset.enumerate_to(bound)? {
        let v = filter.contains(&SubsetDesc::upset_of([i.clone()]), bound)?;
        if !v.is_true() {
            entry = (v.demanding_true(), Some(format!("up({i}) not recognized as filter-large")));
            break;
        }
    }
    report.push("FILT_UPSETS", A_UPSETS, entry.0, entry.1, None);

    // FILT_PROPER
    let v = filter.contains(&SubsetDesc::empty(), bound)?;
    let (verdict, cex) = match v {
        Verdict3::False => (Verdict::Pass, None),
        Verdict3::True => (Verdict::Fail, Some("the empty set was accepted".to_string())),
        Verdict3::Unknown => (Verdict::UnknownAtBound, None),
    };
    report.push("FILT_PROPER", A_PROPER, verdict, cex, None);

    // Member samples, classified once.
    let mut larges: Vec<&SubsetDesc> = Vec::new();
    let mut any_unknown = false;
    for s in &samples.subsets {
        match filter.contains(s, bound)? {
            Verdict3::True => larges.push(s),
            Verdict3::Unknown => any_unknown = true,
            Verdict3::False => {}
        }
    }

    // FILT_UPCLOSED: union with anything keeps membership.
    let mut entry = (Verdict::Pass, None);
    'up: for a in &larges {
        for b in &samples.subsets {
            let u = SubsetDesc::union(&poset, a, b);
            match filter.contains(&u, bound)? {
                Verdict3::True => {}
                Verdict3::False => {
                    entry = (Verdict::Fail, Some(format!("{} lost membership under union with {}", a.name, b.name)));
                    break 'up;
                }
                Verdict3::Unknown => {
                    entry = (Verdict::UnknownAtBound, Some(format!("{} ∪ {}", a.name, b.name)));
                }
            }
        }
    }
    report.push("FILT_UPCLOSED", A_UPCLOSED, entry.0, entry.1, None);

    // FILT_CAP
    let mut entry = (Verdict::Pass, None);
    'cap: for a in &larges {
        for b in &larges {
            let cap = SubsetDesc::intersect(&poset, a, b);
            match filter.contains(&cap, bound)? {
                Verdict3::True => {}
                Verdict3::False => {
                    entry = (Verdict::Fail, Some(format!("{} ∩ {} is not filter-large", a.name, b.name)));
                    break 'cap;
                }
                Verdict3::Unknown => {
                    entry = (Verdict::UnknownAtBound, Some(format!("{} ∩ {}", a.name, b.name)));
                }
            }
        }
    }
    report.push("FILT_CAP", A_CAP, entry.0, entry.1, None);

    // COFIN: every large sample reaches above every index below the bound.
    let scan_hi = poset.bump(bound, SCAN_SLACK);
    let scan = poset.enumerate_to(&scan_hi)?;
    let mut entry = (Verdict::Pass, None);
    'cofin: for a in &larges {
        for j in poset.enumerate_to(bound)? {
            let reached = scan
                .iter()
                .filter(|k| poset.leq_unchecked(&j, k))
                .any(|k| a.member(&poset, k).is_true());
            if !reached {
                entry = (Verdict::Fail, Some(format!("{} has nothing above {j}", a.name)));
                break 'cofin;
            }
        }
    }
    report.push("COFIN", A_COFIN, entry.0, entry.1, None);

    // D (product filters only): image of a large set under a large left set.
    if let FilterSpec::Product(fl, _) = filter {
        let (bl, _) = match bound {
            Index::Pair(l, r) => ((**l).clone(), (**r).clone()),
            _ => unreachable!("product bound checked by contains"),
        };
        let mut entry = (Verdict::Pass, None);
        let mut checked = 0usize;
        'dee: for h in &larges {
            for lft in &samples.left_subsets {
                if !fl.contains(lft, &bl)?.is_true() {
                    continue;
                }
                let img = image_on(&poset, h, lft, bound)?;
                // The image lives in the right factor.
                let fr = match filter {
                    FilterSpec::Product(_, r) => r,
                    _ => unreachable!(),
                };
                let br = match bound {
                    Index::Pair(_, r) => (**r).clone(),
                    _ => unreachable!(),
                };
                checked += 1;
                match fr.contains(&img, &br)? {
                    Verdict3::True => {}
                    Verdict3::False => {
                        entry = (
                            Verdict::Fail,
                            Some(format!("image {} is not filter-large", img.name)),
                        );
                        break 'dee;
                    }
                    Verdict3::Unknown => {
                        entry = (Verdict::UnknownAtBound, Some(img.name.clone()));
                    }
                }
            }
        }
        if checked == 0 && entry.0 == Verdict::Pass {
            entry = (Verdict::Skip, None);
        }
        report.push("D", A_IMAGE, entry.0, entry.1, None);
    }

    let details = format!(
        "{} samples, {} filter-large{}",
        samples.subsets.len(),
        larges.len(),
        if any_unknown { ", some unknown-at-bound" } else { "" }
    );
    if let Some(first) = report.laws.first_mut() {
        first.details = Some(details);
    }
    report.sort();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn natplus() -> IndexPoset {
        IndexPoset::NatPlus
    }

    fn np_pair() -> IndexPoset {
        IndexPoset::product(IndexPoset::NatPlus, IndexPoset::NatPlus)
    }

    #[test]
    fn leq_and_join_on_nats() {
        let p = natplus();
        assert!(p.leq(&Index::Nat(3), &Index::Nat(5)).unwrap());
        assert!(!p.leq(&Index::Nat(5), &Index::Nat(3)).unwrap());
        assert_eq!(p.join(&Index::Nat(3), &Index::Nat(5)).unwrap(), Index::Nat(5));
        assert!(p.leq(&Index::Nat(0), &Index::Nat(1)).is_err());
    }

    #[test]
    fn product_order_is_componentwise() {
        let p = np_pair();
        let a = Index::pair(Index::Nat(2), Index::Nat(3));
        let b = Index::pair(Index::Nat(4), Index::Nat(1));
        assert!(!p.leq(&a, &b).unwrap());
        assert!(!p.leq(&b, &a).unwrap());
        assert_eq!(p.join(&a, &b).unwrap(), Index::pair(Index::Nat(4), Index::Nat(3)));
    }

    #[test]
    fn trivial_order() {
        let p = IndexPoset::Trivial;
        assert!(p.leq(&Index::Unit, &Index::Unit).unwrap());
        assert_eq!(p.join(&Index::Unit, &Index::Unit).unwrap(), Index::Unit);
        assert_eq!(p.enumerate_to(&Index::Unit).unwrap(), vec![Index::Unit]);
    }

    #[test]
    fn enumerate_prefix_has_unique_max() {
        let p = np_pair();
        let bound = Index::pair(Index::Nat(3), Index::Nat(2));
        let all = p.enumerate_to(&bound).unwrap();
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(|i| p.leq(i, &bound).unwrap()));
        assert!(all.contains(&bound));
    }

    #[test]
    fn index_display_parse_round_trip() {
        for s in ["*", "7", "2->3", "(1->2)->3", "1->2->3"] {
            let i = Index::parse(s).unwrap();
            let j = Index::parse(&i.to_string()).unwrap();
            assert_eq!(i, j);
        }
        // -> is right-associative through parse of the display form
        let i = Index::parse("(1->2)->3").unwrap();
        assert_eq!(
            i,
            Index::pair(Index::pair(Index::Nat(1), Index::Nat(2)), Index::Nat(3))
        );
    }

    #[test]
    fn upset_membership_is_true_for_upsets() {
        let f = FilterSpec::Upset(natplus());
        let v = f.contains(&SubsetDesc::upset_of([Index::Nat(3)]), &Index::Nat(20)).unwrap();
        assert_eq!(v, Verdict3::True);
    }

    #[test]
    fn evens_are_cofinal_but_not_filter_large() {
        let f = FilterSpec::Upset(natplus());
        let evens = SubsetDesc::pred("evens", |i| i.as_nat().map(|n| n % 2 == 0).unwrap_or(false));
        let v = f.contains(&evens, &Index::Nat(20)).unwrap();
        assert_eq!(v, Verdict3::False);
    }

    #[test]
    fn empty_set_is_rejected() {
        let f = FilterSpec::Upset(natplus());
        assert_eq!(f.contains(&SubsetDesc::empty(), &Index::Nat(10)).unwrap(), Verdict3::False);
    }

    #[test]
    fn diagonal_staircase_is_product_filter_large() {
        let f = FilterSpec::product(
            FilterSpec::Upset(natplus()),
            FilterSpec::Upset(natplus()),
        );
        let diag = SubsetDesc::rows_upset("diag", |l| l.clone());
        let bound = Index::pair(Index::Nat(8), Index::Nat(8));
        assert_eq!(f.contains(&diag, &bound).unwrap(), Verdict3::True);
    }

    #[test]
    fn diagonal_is_not_upset_filter_large() {
        // Against the plain up-set filter over the product order, the
        // staircase contains no box, so the verdict is definitively false.
        let f = FilterSpec::Upset(np_pair());
        let diag = SubsetDesc::rows_upset("diag", |l| l.clone());
        let bound = Index::pair(Index::Nat(6), Index::Nat(6));
        assert_eq!(f.contains(&diag, &bound).unwrap(), Verdict3::False);
    }

    #[test]
    fn bounded_predicates_go_unknown() {
        let f = FilterSpec::Upset(natplus());
        let mystery = SubsetDesc::pred_bounded(
            "mystery",
            natplus(),
            Index::Nat(30),
            |_| true,
        );
        assert_eq!(f.contains(&mystery, &Index::Nat(10)).unwrap(), Verdict3::Unknown);
    }

    #[test]
    fn image_of_diagonal_under_upset_is_upset() {
        let p = np_pair();
        let diag = SubsetDesc::rows_upset("diag", |l| l.clone());
        let left = SubsetDesc::upset_of([Index::Nat(3)]);
        let bound = Index::pair(Index::Nat(10), Index::Nat(10));
        let img = image_on(&p, &diag, &left, &bound).unwrap();
        let got = img.materialize(&natplus(), &Index::Nat(10)).unwrap();
        let want = SubsetDesc::upset_of([Index::Nat(3)])
            .materialize(&natplus(), &Index::Nat(10))
            .unwrap();
        assert_eq!(got, want);
        // and it carries a certified witness, so the filter accepts it
        let f = FilterSpec::Upset(natplus());
        assert_eq!(f.contains(&img, &Index::Nat(10)).unwrap(), Verdict3::True);
    }

    #[test]
    fn image_of_empty_is_empty() {
        let p = np_pair();
        let diag = SubsetDesc::rows_upset("diag", |l| l.clone());
        let bound = Index::pair(Index::Nat(8), Index::Nat(8));
        let img = image_on(&p, &diag, &SubsetDesc::empty(), &bound).unwrap();
        assert!(img.materialize(&natplus(), &Index::Nat(8)).unwrap().is_empty());
    }

    #[test]
    fn filter_laws_pass_for_upset_filter() {
        let f = FilterSpec::Upset(natplus());
        let samples = FilterSamples::new(vec![
            SubsetDesc::upset_of([Index::Nat(1)]),
            SubsetDesc::upset_of([Index::Nat(5)]),
            SubsetDesc::pred("evens", |i| i.as_nat().map(|n| n % 2 == 0).unwrap_or(false)),
            SubsetDesc::explicit("{1,2,3}", [Index::Nat(1), Index::Nat(2), Index::Nat(3)]),
        ]);
        let report = f.check_laws(&Index::Nat(12), &samples).unwrap();
        assert!(!report.has_failure(), "{}", report.render_text());
    }

    #[test]
    fn product_filter_laws_pass_with_image_condition() {
        let f = FilterSpec::product(FilterSpec::Upset(natplus()), FilterSpec::Upset(natplus()));
        let samples = FilterSamples::new(vec![
            SubsetDesc::rows_upset("diag", |l| l.clone()),
            SubsetDesc::upset_of([Index::pair(Index::Nat(2), Index::Nat(3))]),
        ])
        .with_left(vec![
            SubsetDesc::upset_of([Index::Nat(1)]),
            SubsetDesc::upset_of([Index::Nat(3)]),
        ]);
        let bound = Index::pair(Index::Nat(8), Index::Nat(8));
        let report = f.check_laws(&bound, &samples).unwrap();
        assert!(!report.has_failure(), "{}", report.render_text());
        assert_eq!(report.verdict_of("D"), Some(Verdict::Pass));
    }

    #[test]
    fn broken_filter_fails_properness() {
        let f = FilterSpec::AcceptAll(natplus());
        let report = f.check_laws(&Index::Nat(8), &FilterSamples::default()).unwrap();
        assert_eq!(report.verdict_of("FILT_PROPER"), Some(Verdict::Fail));
    }
}
