//! Carrier elements: the values a limit target or a PER-set ranges over.
//!
//! Stage systems hold finite approximations; carriers hold the described
//! objects themselves: naturals, booleans, infinite binary expansions,
//! materialized stage families, and finitely described functions. Every
//! variant is ordered and hashable so sets of elements are deterministic.

use std::collections::BTreeMap;
use std::fmt;

use crate::index::Index;
use crate::system::State;
use crate::{input_err, Result};

/// An infinite binary expansion `0.b1 b2 b3 ...` with an eventually periodic
/// tail, kept in canonical form: the period is primitive and the prefix is
/// as short as possible. Two expansions are equal iff they agree bitwise.
///
/// This is a path in the binary interval tree, not a real number: the
/// expansions `0.1(0)` and `0.0(1)` denote different paths.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DyadicPoint {
    prefix: Vec<bool>,
    period: Vec<bool>,
}

impl DyadicPoint {
    /// Canonicalize: shrink the period to its primitive root, then absorb
    /// the prefix tail into period rotations while the last bits agree.
    pub fn new(prefix: impl Into<Vec<bool>>, period: impl Into<Vec<bool>>) -> Result<DyadicPoint> {
        let mut prefix = prefix.into();
        let mut period = period.into();
        if period.is_empty() {
            return input_err("expansion period must be nonempty".to_string());
        }
        'shrink: for d in 1..=period.len() / 2 {
            if period.len() % d != 0 {
                continue;
            }
            let root = &period[..d];
            if period.chunks(d).all(|c| c == root) {
                period.truncate(d);
                break 'shrink;
            }
        }
        while let Some(&last) = prefix.last() {
            if last != *period.last().unwrap() {
                break;
            }
            prefix.pop();
            period.rotate_right(1);
        }
        Ok(DyadicPoint { prefix, period })
    }

    /// The expansion of `p/q` for `0 <= p < q`, by long division.
    pub fn from_ratio(p: u64, q: u64) -> Result<DyadicPoint> {
        if q == 0 || p >= q {
            return input_err(format!("{p}/{q} is not in the unit interval"));
        }
        if q > u64::MAX / 2 {
            return input_err(format!("denominator {q} too large"));
        }
        let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
        let mut bits: Vec<bool> = Vec::new();
        let mut r = p;
        loop {
            if let Some(&at) = seen.get(&r) {
                let period = bits.split_off(at);
                return DyadicPoint::new(bits, period);
            }
            seen.insert(r, bits.len());
            r *= 2;
            if r >= q {
                bits.push(true);
                r -= q;
            } else {
                bits.push(false);
            }
        }
    }

    /// Bit `k` of the expansion (bit 0 is the first bit after the point).
    pub fn bit(&self, k: usize) -> bool {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.period[(k - self.prefix.len()) % self.period.len()]
        }
    }

    /// The index `n` of the depth-`i` interval `[n/2^i, (n+1)/2^i)` the
    /// expansion passes through.
    pub fn interval_at(&self, i: u64) -> Result<u64> {
        if i > 63 {
            return input_err(format!("interval depth {i} too large"));
        }
        let mut n = 0u64;
        for k in 0..i {
            n = (n << 1) | self.bit(k as usize) as u64;
        }
        Ok(n)
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0.")?;
        for &b in &self.prefix {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str("(")?;
        for &b in &self.period {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

/// A materialized stage family: finitely many stages, each holding the
/// states the family assigns there. Used as the carrier element when the
/// described objects are themselves built out of stage data.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FamilyData {
    pub name: String,
    pub entries: BTreeMap<Index, Vec<State>>,
}

impl FamilyData {
    pub fn new(name: impl Into<String>, entries: BTreeMap<Index, Vec<State>>) -> FamilyData {
        let mut entries = entries;
        for states in entries.values_mut() {
            states.sort();
            states.dedup();
        }
        FamilyData { name: name.into(), entries }
    }
}

impl fmt::Display for FamilyData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fam {} [", self.name)?;
        for (n, (i, states)) in self.entries.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{i}:")?;
            for (m, s) in states.iter().enumerate() {
                if m > 0 {
                    f.write_str("|")?;
                }
                write!(f, " {s}")?;
            }
        }
        f.write_str("]")
    }
}

/// A finite description of a function used as a carrier element. Evaluation
/// is structural; descriptions that cannot be evaluated on a given argument
/// are input errors, not silent defaults.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum FnDesc {
    /// Finite table over the points of one stage, with an optional default
    /// for arguments that only match up to that stage's resolution.
    Table { stage: Index, entries: Vec<(Elem, Elem)>, default: Option<Box<Elem>> },
    /// `f(k) = prefix[k]` for small `k`, the tail value beyond.
    EventuallyConst { prefix: Vec<Elem>, tail: Box<Elem> },
    Const(Box<Elem>),
    Identity,
    Succ,
    /// The universal quantifier on described predicates: true iff the
    /// argument function is true everywhere.
    Forall,
    Compose(Box<FnDesc>, Box<FnDesc>),
}

impl FnDesc {
    pub fn constant(e: Elem) -> FnDesc {
        FnDesc::Const(Box::new(e))
    }

    pub fn eventually(prefix: Vec<Elem>, tail: Elem) -> FnDesc {
        FnDesc::EventuallyConst { prefix, tail: Box::new(tail) }
    }

    pub fn compose(outer: FnDesc, inner: FnDesc) -> FnDesc {
        FnDesc::Compose(Box::new(outer), Box::new(inner))
    }

    pub fn table(
        stage: Index,
        entries: impl IntoIterator<Item = (Elem, Elem)>,
        default: Option<Elem>,
    ) -> FnDesc {
        let mut entries: Vec<(Elem, Elem)> = entries.into_iter().collect();
        entries.sort();
        entries.dedup();
        FnDesc::Table { stage, entries, default: default.map(Box::new) }
    }
}

impl fmt::Display for FnDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FnDesc::Table { stage, entries, default } => {
                write!(f, "table@{stage} {{")?;
                for (n, (k, v)) in entries.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k} -> {v}")?;
                }
                f.write_str("}")?;
                if let Some(d) = default {
                    write!(f, " else {d}")?;
                }
                Ok(())
            }
            FnDesc::EventuallyConst { prefix, tail } => {
                f.write_str("evc [")?;
                for (n, e) in prefix.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "] then {tail}")
            }
            FnDesc::Const(e) => write!(f, "const {e}"),
            FnDesc::Identity => f.write_str("id"),
            FnDesc::Succ => f.write_str("succ"),
            FnDesc::Forall => f.write_str("forall"),
            FnDesc::Compose(outer, inner) => write!(f, "({outer} . {inner})"),
        }
    }
}

/// A carrier element.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Elem {
    Nat(u64),
    Bool(bool),
    Dyadic(DyadicPoint),
    Fam(FamilyData),
    Fn(FnDesc),
}

impl Elem {
    pub fn nat(n: u64) -> Elem {
        Elem::Nat(n)
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            Elem::Nat(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Elem::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_dyadic(&self) -> Option<&DyadicPoint> {
        match self {
            Elem::Dyadic(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_fn(&self) -> Option<&FnDesc> {
        match self {
            Elem::Fn(f) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Nat(n) => write!(f, "{n}"),
            Elem::Bool(b) => write!(f, "{b}"),
            Elem::Dyadic(d) => write!(f, "{d}"),
            Elem::Fam(fam) => write!(f, "{fam}"),
            Elem::Fn(desc) => write!(f, "{desc}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn one_third_is_pure_period() {
        let d = DyadicPoint::from_ratio(1, 3).unwrap();
        assert_eq!(d, DyadicPoint::new(bits(""), bits("01")).unwrap());
        assert_eq!(d.to_string(), "0.(01)");
    }

    #[test]
    fn terminating_expansions_keep_their_prefix() {
        let half = DyadicPoint::from_ratio(1, 2).unwrap();
        assert_eq!(half.to_string(), "0.1(0)");
        let quarter = DyadicPoint::from_ratio(1, 4).unwrap();
        assert_eq!(quarter.to_string(), "0.01(0)");
    }

    #[test]
    fn canonical_form_absorbs_rotations_and_repeats() {
        let a = DyadicPoint::new(bits("01"), bits("01")).unwrap();
        let b = DyadicPoint::from_ratio(1, 3).unwrap();
        assert_eq!(a, b);
        let c = DyadicPoint::new(bits(""), bits("0101")).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn paths_differ_even_when_the_real_number_agrees() {
        let from_above = DyadicPoint::new(bits("1"), bits("0")).unwrap();
        let from_below = DyadicPoint::new(bits("0"), bits("1")).unwrap();
        assert_ne!(from_above, from_below);
        assert_eq!(from_above.interval_at(1).unwrap(), 1);
        assert_eq!(from_below.interval_at(1).unwrap(), 0);
    }

    #[test]
    fn one_third_passes_through_the_expected_intervals() {
        let d = DyadicPoint::from_ratio(1, 3).unwrap();
        // Independent check: the depth-i interval index is floor(p*2^i/q).
        for i in 0..=20u64 {
            assert_eq!(d.interval_at(i).unwrap(), (1u64 << i) / 3, "depth {i}");
        }
    }

    #[test]
    fn interval_indices_match_rational_arithmetic() {
        for q in 1..40u64 {
            for p in 0..q {
                let d = DyadicPoint::from_ratio(p, q).unwrap();
                for i in 0..=16u64 {
                    let want = ((p as u128) << i) / q as u128;
                    assert_eq!(d.interval_at(i).unwrap() as u128, want, "{p}/{q} depth {i}");
                }
            }
        }
    }

    #[test]
    fn fn_desc_display_is_stable() {
        let evc = FnDesc::eventually(vec![Elem::nat(1), Elem::nat(2)], Elem::nat(0));
        assert_eq!(evc.to_string(), "evc [1, 2] then 0");
        let comp = FnDesc::compose(FnDesc::Succ, FnDesc::Identity);
        assert_eq!(comp.to_string(), "(succ . id)");
    }
}
