//! Ready-made systems and spaces: truncated naturals, dyadic interval
//! splittings of the unit interval, and booleans. These are the worked
//! examples everything else is exercised against.

use crate::elem::{DyadicPoint, Elem};
use crate::index::{FilterSpec, Index, IndexPoset, SubsetDesc};
use crate::limit::{Carrier, Target};
use crate::perset::PerSpace;
use crate::system::{FactorSystem, StageSystem, State, SystemRef};
use crate::{input_err, Result};

/// Truncated naturals: stage `i >= 1` holds `0..i-1`. A higher number
/// descends to itself where it still fits, embeddings are inclusions,
/// projections clamp to the top of the lower stage.
pub fn nat_system() -> FactorSystem {
    let system = StageSystem::new(
        "nat",
        IndexPoset::NatPlus,
        |i| {
            let n = i.as_nat().expect("NatPlus index");
            Ok((0..n).map(State::nat).collect())
        },
        |_, a, lo, b| {
            let x = state_nat(a)?;
            let y = state_nat(b)?;
            Ok(x == y && y < lo.as_nat().expect("NatPlus index"))
        },
    );
    FactorSystem::new(system, |_, _, a| Ok(a.clone())).with_proj(|_, to, a| {
        let n = state_nat(a)?;
        Ok(State::nat(n.min(to.as_nat().expect("NatPlus index") - 1)))
    })
}

fn state_nat(a: &State) -> Result<u64> {
    a.as_nat().ok_or_else(|| crate::Error::Input(format!("expected a numeral state, got {a}")))
}

/// The dyadic splittings of the unit interval: stage `i` holds the `2^i`
/// intervals `[n/2^i, (n+1)/2^i)`, written `n/2^i`. A finer interval
/// descends to the coarser one containing it; embedding picks the leftmost
/// refinement, projection takes the enclosing interval.
pub fn dyadic_system() -> FactorSystem {
    let system = StageSystem::new(
        "dyadic",
        IndexPoset::Nat,
        |i| {
            let depth = i.as_nat().expect("Nat index");
            if depth > 20 {
                return Err(crate::Error::Resource(format!(
                    "dyadic stage {depth} has 2^{depth} intervals"
                )));
            }
            Ok((0..1u64 << depth).map(|n| interval_state(n, depth)).collect())
        },
        |hi, a, lo, b| {
            let shift = hi.as_nat().expect("Nat") - lo.as_nat().expect("Nat");
            Ok(interval_num(a)? >> shift == interval_num(b)?)
        },
    );
    FactorSystem::new(system, |from, to, a| {
        let shift = to.as_nat().expect("Nat") - from.as_nat().expect("Nat");
        Ok(interval_state(interval_num(a)? << shift, to.as_nat().expect("Nat")))
    })
    .with_proj(|from, to, a| {
        let shift = from.as_nat().expect("Nat") - to.as_nat().expect("Nat");
        Ok(interval_state(interval_num(a)? >> shift, to.as_nat().expect("Nat")))
    })
}

fn interval_state(n: u64, depth: u64) -> State {
    State::atom(format!("{n}/{}", 1u64 << depth))
}

fn interval_num(a: &State) -> Result<u64> {
    let s = match a {
        State::Atom(s) => s,
        State::Table(_) => return input_err(format!("expected an interval state, got {a}")),
    };
    let (num, _) = s
        .split_once('/')
        .ok_or_else(|| crate::Error::Input(format!("expected an interval state, got {a}")))?;
    num.parse().map_err(|_| crate::Error::Input(format!("bad interval state {a}")))
}

/// Booleans over the one-point index: one stage, two states, descent is
/// equality.
pub fn bool_system() -> FactorSystem {
    let system = StageSystem::new(
        "bool",
        IndexPoset::Trivial,
        |_| Ok(vec![State::atom("false"), State::atom("true")]),
        |_, a, _, b| Ok(a == b),
    );
    FactorSystem::new(system, |_, _, a| Ok(a.clone())).with_proj(|_, _, a| Ok(a.clone()))
}

fn elem_nat(a: &Elem) -> Result<u64> {
    a.as_nat().ok_or_else(|| crate::Error::Input(format!("expected a number, got {a}")))
}

/// The naturals as the carrier over the truncated-naturals system: `n` is
/// approximated by itself at every stage that can hold it. Fuel: how many
/// numbers the sample enumeration yields.
pub fn nat_target() -> Target {
    Target::new(
        "N",
        SystemRef::Factor(nat_system()),
        FilterSpec::Upset(IndexPoset::NatPlus),
        Carrier::new(|fuel| (0..fuel).map(Elem::Nat).collect()),
        |a, i, s| {
            let n = elem_nat(a)?;
            Ok(state_nat(s)? == n && n < i.as_nat().unwrap_or(0))
        },
        |a| Ok(SubsetDesc::upset_of([Index::Nat(elem_nat(a)? + 1)])),
    )
    .with_emb_top(|_, s| Ok(Elem::Nat(state_nat(s)?)))
    .with_proj_top(|i, a| {
        let n = elem_nat(a)?;
        Ok(State::nat(n.min(i.as_nat().unwrap_or(1) - 1)))
    })
}

/// Binary expansion paths as the carrier over the dyadic system: a path is
/// approximated at depth `i` by the interval its first `i` bits select.
/// Fuel: sample all reduced fractions with denominator up to the fuel.
pub fn dyadic_target() -> Target {
    Target::new(
        "paths",
        SystemRef::Factor(dyadic_system()),
        FilterSpec::Upset(IndexPoset::Nat),
        Carrier::new(|fuel| {
            let mut out = Vec::new();
            for q in 1..=fuel.max(1) {
                for p in 0..q {
                    if let Ok(d) = DyadicPoint::from_ratio(p, q) {
                        out.push(Elem::Dyadic(d));
                    }
                }
            }
            out
        }),
        |a, i, s| {
            let d = a.as_dyadic().ok_or_else(|| {
                crate::Error::Input(format!("expected an expansion path, got {a}"))
            })?;
            Ok(interval_num(s)? == d.interval_at(i.as_nat().unwrap_or(0))?)
        },
        |_| Ok(SubsetDesc::upset_of([Index::Nat(0)])),
    )
    .with_emb_top(|i, s| {
        // The leftmost path through the interval: its left endpoint.
        let depth = i.as_nat().unwrap_or(0);
        let n = interval_num(s)?;
        Ok(Elem::Dyadic(DyadicPoint::from_ratio(n, 1u64 << depth)?))
    })
    .with_proj_top(|i, a| {
        let d = a
            .as_dyadic()
            .ok_or_else(|| crate::Error::Input(format!("expected an expansion path, got {a}")))?;
        let depth = i.as_nat().unwrap_or(0);
        Ok(interval_state(d.interval_at(depth)?, depth))
    })
}

/// The booleans as carrier over the boolean system.
pub fn bool_target() -> Target {
    Target::new(
        "B",
        SystemRef::Factor(bool_system()),
        FilterSpec::default_for(&IndexPoset::Trivial),
        Carrier::new(|_| vec![Elem::Bool(false), Elem::Bool(true)]),
        |a, _, s| {
            let b = a
                .as_bool()
                .ok_or_else(|| crate::Error::Input(format!("expected a boolean, got {a}")))?;
            Ok(*s == State::atom(if b { "true" } else { "false" }))
        },
        |_| Ok(SubsetDesc::upset_of([Index::Unit])),
    )
    .with_emb_top(|_, s| Ok(Elem::Bool(*s == State::atom("true"))))
    .with_proj_top(|_, a| {
        let b = a
            .as_bool()
            .ok_or_else(|| crate::Error::Input(format!("expected a boolean, got {a}")))?;
        Ok(State::atom(if b { "true" } else { "false" }))
    })
}

/// The naturals as a staged relation space: two numbers agree at stage `i`
/// when they are equal and below `i`. Stage points are `0..i-1`, pointing
/// is the identity on the domain, canonicalization clamps to the stage top.
/// The pointing map and the canonicalization map are deliberately distinct
/// formulas that coincide on stage domains.
pub fn nat_perspace() -> PerSpace {
    PerSpace::new(
        "N staged",
        IndexPoset::NatPlus,
        FilterSpec::Upset(IndexPoset::NatPlus),
        Carrier::new(|fuel| (0..fuel).map(Elem::Nat).collect()),
        |a, i, b| Ok(elem_nat(a)? == elem_nat(b)? && elem_nat(a)? < i.as_nat().unwrap_or(0)),
        |a| Ok(SubsetDesc::upset_of([Index::Nat(elem_nat(a)? + 1)])),
    )
    .with_points(
        |i| Ok((0..i.as_nat().unwrap_or(0)).map(Elem::nat).collect()),
        |_, a| Ok(a.clone()),
    )
    .with_total_pt(|i, a| Ok(Elem::nat(elem_nat(a)?.min(i.as_nat().unwrap_or(1) - 1))))
}

/// Binary expansion paths as a staged relation space: two paths agree at
/// depth `i` when they pass through the same depth-`i` interval. The stage
/// points are the grid paths `n/2^i`, and both pointing maps send a path to
/// the grid path of its interval.
pub fn dyadic_perspace() -> PerSpace {
    let grid = |i: &Index, a: &Elem| -> Result<Elem> {
        let d = elem_dyadic(a)?;
        let depth = i.as_nat().unwrap_or(0);
        Ok(Elem::Dyadic(DyadicPoint::from_ratio(d.interval_at(depth)?, 1u64 << depth)?))
    };
    PerSpace::new(
        "paths staged",
        IndexPoset::Nat,
        FilterSpec::Upset(IndexPoset::Nat),
        Carrier::new(|fuel| {
            let mut out = Vec::new();
            for q in 1..=fuel.max(1) {
                for p in 0..q {
                    if let Ok(d) = DyadicPoint::from_ratio(p, q) {
                        out.push(Elem::Dyadic(d));
                    }
                }
            }
            out
        }),
        |a, i, b| {
            let depth = i.as_nat().unwrap_or(0);
            Ok(elem_dyadic(a)?.interval_at(depth)? == elem_dyadic(b)?.interval_at(depth)?)
        },
        |_| Ok(SubsetDesc::upset_of([Index::Nat(0)])),
    )
    .with_points(
        |i| {
            let depth = i.as_nat().unwrap_or(0);
            if depth > 20 {
                return Err(crate::Error::Resource(format!(
                    "dyadic stage {depth} has 2^{depth} points"
                )));
            }
            (0..1u64 << depth)
                .map(|n| Ok(Elem::Dyadic(DyadicPoint::from_ratio(n, 1u64 << depth)?)))
                .collect()
        },
        grid,
    )
    .with_total_pt(grid)
}

/// The booleans as a staged relation space over the one-point order.
pub fn bool_perspace() -> PerSpace {
    let ident = |_: &Index, a: &Elem| Ok(a.clone());
    PerSpace::new(
        "B staged",
        IndexPoset::Trivial,
        FilterSpec::default_for(&IndexPoset::Trivial),
        Carrier::new(|_| vec![Elem::Bool(false), Elem::Bool(true)]),
        |a, _, b| Ok(elem_bool(a)? == elem_bool(b)?),
        |_| Ok(SubsetDesc::upset_of([Index::Unit])),
    )
    .with_points(|_| Ok(vec![Elem::Bool(false), Elem::Bool(true)]), ident)
    .with_total_pt(ident)
}

fn elem_dyadic(a: &Elem) -> Result<&DyadicPoint> {
    a.as_dyadic()
        .ok_or_else(|| crate::Error::Input(format!("expected an expansion path, got {a}")))
}

fn elem_bool(a: &Elem) -> Result<bool> {
    a.as_bool().ok_or_else(|| crate::Error::Input(format!("expected a boolean, got {a}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::Index;
    use crate::limit::check_target;
    use crate::system::check_system_laws;

    #[test]
    fn nat_passes_all_laws() {
        let report =
            check_system_laws(&SystemRef::Factor(nat_system()), &[], &Index::Nat(6)).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn dyadic_passes_all_laws() {
        let report =
            check_system_laws(&SystemRef::Factor(dyadic_system()), &[], &Index::Nat(4)).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn bool_passes_all_laws() {
        let report =
            check_system_laws(&SystemRef::Factor(bool_system()), &[], &Index::Unit).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn dyadic_stage_sizes_double() {
        let sys = dyadic_system();
        for depth in 0..=6u64 {
            assert_eq!(sys.system.stage(&Index::Nat(depth)).unwrap().len(), 1 << depth);
        }
    }

    #[test]
    fn dyadic_embedding_takes_the_leftmost_refinement() {
        let sys = dyadic_system();
        let half = State::atom("1/2");
        let refined = sys.emb(&Index::Nat(1), &Index::Nat(3), &half).unwrap();
        assert_eq!(refined, State::atom("4/8"));
    }

    #[test]
    fn dyadic_projection_inverts_embedding_exactly() {
        let sys = dyadic_system();
        for depth in 0..=4u64 {
            for to in depth..=5u64 {
                for s in sys.system.stage(&Index::Nat(depth)).unwrap().iter() {
                    let up = sys.emb(&Index::Nat(depth), &Index::Nat(to), s).unwrap();
                    let back = sys.proj(&Index::Nat(to), &Index::Nat(depth), &up).unwrap();
                    assert_eq!(&back, s);
                }
            }
        }
    }

    #[test]
    fn nat_target_is_a_limit() {
        // Fuel equals the bound so every sampled number is visible below it.
        let report = check_target(&nat_target(), &Index::Nat(6), 6).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn dyadic_target_is_a_limit() {
        // Denominators up to 6 keep all sampled paths separated within depth
        // 5: distinct fractions with q <= 6 differ by at least 1/30.
        let report = check_target(&dyadic_target(), &Index::Nat(5), 6).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn bool_target_is_a_limit() {
        let report = check_target(&bool_target(), &Index::Unit, 0).unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn nat_approximations_follow_the_cut() {
        let t = nat_target();
        let three = Elem::Nat(3);
        assert!(!t.approx(&three, &Index::Nat(3), &State::nat(3)).unwrap());
        assert!(t.approx(&three, &Index::Nat(4), &State::nat(3)).unwrap());
        assert!(!t.approx(&three, &Index::Nat(4), &State::nat(2)).unwrap());
    }

    #[test]
    fn third_is_approximated_by_its_intervals() {
        // floor(2^i / 3) picks the interval holding 1/3 at each depth.
        let t = dyadic_target();
        let third = Elem::Dyadic(DyadicPoint::from_ratio(1, 3).unwrap());
        for depth in 0..=10u64 {
            let n = ((1u128 << depth) / 3) as u64;
            assert!(t.approx(&third, &Index::Nat(depth), &interval_state(n, depth)).unwrap());
        }
    }

    #[test]
    fn nat_space_canonicalizes_by_clamping() {
        let s = nat_perspace();
        assert_eq!(s.pt_total(&Index::Nat(3), &Elem::nat(5)).unwrap(), Elem::nat(2));
        for i in 1..=6u64 {
            let stage = Index::Nat(i);
            for n in 0..=8u64 {
                let img = s.pt_total(&stage, &Elem::nat(n)).unwrap();
                assert_eq!(img, Elem::nat(n.min(i - 1)));
                for m in 0..=8u64 {
                    // two numbers share a canonical image exactly when they
                    // are equal or both clamp to the stage top
                    let jmg = s.pt_total(&stage, &Elem::nat(m)).unwrap();
                    let same = n == m || (n >= i - 1 && m >= i - 1);
                    assert_eq!(img == jmg, same, "stage {i}: {n} vs {m}");
                }
            }
        }
    }

    #[test]
    fn nat_space_relates_small_equal_numbers() {
        let s = nat_perspace();
        for i in 1..=6u64 {
            for n in 0..=8u64 {
                for m in 0..=8u64 {
                    let got =
                        s.per(&Elem::nat(n), &Index::Nat(i), &Elem::nat(m)).unwrap();
                    assert_eq!(got, n == m && n < i);
                }
            }
        }
    }

    #[test]
    fn dyadic_space_points_are_the_grid() {
        let s = dyadic_perspace();
        let pts = s.points(&Index::Nat(2)).unwrap();
        let want: Vec<Elem> = (0..4)
            .map(|n| Elem::Dyadic(DyadicPoint::from_ratio(n, 4).unwrap()))
            .collect();
        assert_eq!(pts.len(), 4);
        for p in want {
            assert!(pts.contains(&p), "{p} missing");
        }
    }
}
