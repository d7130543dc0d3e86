//! Law reports: the shared output format of every checker in the library.
//!
//! A report names the structure that was checked, the bound the check ran at,
//! and one entry per law. Entries carry a short law id, a one-line statement
//! of the law (the anchor), a verdict, and a counterexample when there is
//! one. Reports serialize to JSON and parse back to the same value.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Outcome of checking one law at a bound.
///
/// `UnknownAtBound` is for checks that could neither confirm nor refute
/// within the bound; suites treat it like a skip, never like a pass.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
    UnknownAtBound,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skip => "skip",
            Verdict::UnknownAtBound => "unknown-at-bound",
        };
        f.write_str(s)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LawEntry {
    pub law: String,
    /// One-line statement of what the law says.
    pub anchor: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counterexample: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub details: Option<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LawReport {
    /// Schema version, always 1.
    pub v: u32,
    pub structure: String,
    pub bound: String,
    pub laws: Vec<LawEntry>,
}

impl LawReport {
    pub fn new(structure: impl Into<String>, bound: impl Into<String>) -> Self {
        LawReport { v: 1, structure: structure.into(), bound: bound.into(), laws: Vec::new() }
    }

    pub fn push(
        &mut self,
        law: impl Into<String>,
        anchor: impl Into<String>,
        verdict: Verdict,
        counterexample: Option<String>,
        details: Option<String>,
    ) {
        self.laws.push(LawEntry {
            law: law.into(),
            anchor: anchor.into(),
            verdict,
            counterexample,
            details,
        });
    }

    pub fn pass(&mut self, law: impl Into<String>, anchor: impl Into<String>) {
        self.push(law, anchor, Verdict::Pass, None, None);
    }

    pub fn fail(
        &mut self,
        law: impl Into<String>,
        anchor: impl Into<String>,
        counterexample: impl Into<String>,
    ) {
        self.push(law, anchor, Verdict::Fail, Some(counterexample.into()), None);
    }

    /// Append another report's entries, keeping this report's header.
    pub fn absorb(&mut self, other: LawReport) {
        self.laws.extend(other.laws);
    }

    /// Sort entries by law id; ties keep insertion order (stage order).
    pub fn sort(&mut self) {
        self.laws.sort_by(|a, b| a.law.cmp(&b.law));
    }

    pub fn has_failure(&self) -> bool {
        self.laws.iter().any(|e| e.verdict == Verdict::Fail)
    }

    pub fn all_passed(&self) -> bool {
        self.laws.iter().all(|e| e.verdict == Verdict::Pass)
    }

    pub fn verdict_of(&self, law: &str) -> Option<Verdict> {
        self.laws.iter().find(|e| e.law == law).map(|e| e.verdict)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        let r: LawReport = serde_json::from_str(s)?;
        if r.v != 1 {
            return crate::input_err(format!("unsupported report version {}", r.v));
        }
        Ok(r)
    }

    /// Plain-text rendering, one line per law.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} (bound {})", self.structure, self.bound);
        for e in &self.laws {
            let _ = write!(out, "  {:<12} {:<16} {}", e.law, e.verdict.to_string(), e.anchor);
            if let Some(cex) = &e.counterexample {
                let _ = write!(out, "\n      counterexample: {cex}");
            }
            if let Some(d) = &e.details {
                let _ = write!(out, "\n      note: {d}");
            }
            let _ = writeln!(out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_round_trips() {
        let mut r = LawReport::new("nat", "8");
        r.pass("FUN", "within a stage, related means equal");
        r.fail("STAB", "transfer along consistency", "a'=2@3, a=2@2, b=1@2");
        r.push("TDOM", "domains are filter-large", Verdict::UnknownAtBound, None, Some("sampled".into()));
        let json = r.to_json().unwrap();
        let back = LawReport::from_json(&json).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn failure_detection() {
        let mut r = LawReport::new("x", "1");
        assert!(!r.has_failure());
        assert!(r.all_passed());
        r.push("A", "a", Verdict::Skip, None, None);
        assert!(!r.has_failure());
        assert!(!r.all_passed());
        r.fail("B", "b", "boom");
        assert!(r.has_failure());
    }

    #[test]
    fn rejects_future_versions() {
        let json = r#"{"v":2,"structure":"s","bound":"1","laws":[]}"#;
        assert!(LawReport::from_json(json).is_err());
    }

    #[test]
    fn verdict_serializes_kebab_case() {
        let v = serde_json::to_string(&Verdict::UnknownAtBound).unwrap();
        assert_eq!(v, "\"unknown-at-bound\"");
    }
}
