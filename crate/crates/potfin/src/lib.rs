//! Finite-stage models: families of finite stage sets related across stages,
//! their limits, stage-indexed partial equivalence relations, continuity of
//! functions between them, and a small typed λ-calculus evaluated stage by
//! stage. Every structural law the library relies on can be checked
//! exhaustively up to a bound, and the checkers report what they saw.

pub mod elem;
pub mod funspace;
pub mod gallery;
pub mod index;
pub mod limit;
pub mod perset;
pub mod report;
pub mod system;

pub use elem::{DyadicPoint, Elem, FamilyData, FnDesc};
pub use funspace::{
    check_apx_iso, continuity_report, eval_chain_check, eval_fn, fn_perspace, is_ij_continuous,
    per_fn, ContinuityReport, DescribedFn,
};
pub use index::{FilterSpec, Index, IndexPoset, SubsetDesc, Verdict3};
pub use limit::{
    apply_consistent, check_family, check_target, elem_target, enumerate_dynamic_elements,
    families_compatible, family_is_consistent, maximal_closure, Carrier, ConsistentFamily, Target,
};
pub use perset::{
    check_convergence_bridge, check_extensionality, check_perspace, induced_target,
    internal_system, limit_element, per_from_target, LimitSearch, PerLevel, PerSpace,
    PointSequence,
};
pub use report::{LawEntry, LawReport, Verdict};
pub use system::{
    check_hom, check_system_laws, consistent, consistency_witness, function_space,
    function_space_with_cap, ConsistencySession, FactorSystem, HomClaims, StageSystem, State,
    SystemHom, SystemLaw, SystemRef,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("type error: {0}")]
    Type(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error: 3 for resource caps, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resource(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
