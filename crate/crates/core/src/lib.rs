//! Sampling-based planning for factored transition systems.
//!
//! A problem is a set of state and control variables plus clauses of
//! constraints over a transition `(x, u, x')`. Conditional samplers produce
//! values certified to satisfy constraints; the planners alternate between
//! sampling and a discrete search over the grounded finite-domain task.

pub mod domains;
pub mod elements;
pub mod error;
pub mod geometry;
pub mod grounding;
pub mod io;
pub mod model;
pub mod planners;
pub mod samplers;
pub mod search;
pub mod value;

pub use error::FtsError;
pub use model::{
    Clause, Constraint, ConstraintKind, Element, ParamKind, ParameterIndex, Plan, PlanSkeleton,
    Problem, Relation, TransitionSystem, ValueType,
};
pub use value::{LazyOrigin, LazySample, Value};
