//! Immutable, hashable parameter values.
//!
//! Reals compare and hash by bit pattern so that a value produced by a
//! sampler can be matched exactly wherever it flows.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Where a lazy placeholder came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LazyOrigin {
    /// One placeholder per (sampler, output slot).
    Sampler { sampler: u32, slot: u32 },
    /// One placeholder per (sampler instance, output slot).
    Instance { instance: u32, slot: u32 },
}

/// Placeholder standing for a future output of a sampler instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LazySample(pub LazyOrigin);

impl fmt::Display for LazySample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            LazyOrigin::Sampler { sampler, slot } => write!(f, "#l{sampler}.{slot}"),
            LazyOrigin::Instance { instance, slot } => write!(f, "#i{instance}.{slot}"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Real(Arc<[f64]>),
    Sym(Arc<str>),
    Bool(bool),
    Traj(Arc<[Vec<f64>]>),
    Lazy(LazySample),
}

impl Value {
    pub fn real(coords: impl Into<Vec<f64>>) -> Self {
        Value::Real(coords.into().into())
    }

    pub fn scalar(x: f64) -> Self {
        Value::Real(Arc::from([x]))
    }

    pub fn sym(s: &str) -> Self {
        Value::Sym(Arc::from(s))
    }

    pub fn none() -> Self {
        Value::sym("None")
    }

    pub fn traj(points: Vec<Vec<f64>>) -> Self {
        Value::Traj(points.into())
    }

    pub fn is_lazy(&self) -> bool {
        matches!(self, Value::Lazy(_))
    }

    pub fn as_lazy(&self) -> Option<LazySample> {
        match self {
            Value::Lazy(l) => Some(*l),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Value::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_traj(&self) -> Option<&[Vec<f64>]> {
        match self {
            Value::Traj(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }
}

fn hash_reals<H: Hasher>(xs: &[f64], state: &mut H) {
    xs.len().hash(state);
    for x in xs {
        x.to_bits().hash(state);
    }
}

fn reals_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => reals_eq(a, b),
            (Value::Sym(a), Value::Sym(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Traj(a), Value::Traj(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(p, q)| reals_eq(p, q))
            }
            (Value::Lazy(a), Value::Lazy(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Real(v) => hash_reals(v, state),
            Value::Sym(s) => s.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Traj(t) => {
                t.len().hash(state);
                for p in t.iter() {
                    hash_reals(p, state);
                }
            }
            Value::Lazy(l) => l.hash(state),
        }
    }
}

fn fmt_reals(f: &mut fmt::Formatter<'_>, xs: &[f64]) -> fmt::Result {
    if xs.len() == 1 {
        return write!(f, "{:.3}", xs[0]);
    }
    write!(f, "(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x:.3}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => fmt_reals(f, v),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Traj(t) => {
                write!(f, "traj[")?;
                for (i, p) in t.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    fmt_reals(f, p)?;
                }
                write!(f, "]")
            }
            Value::Lazy(l) => write!(f, "{l}"),
        }
    }
}
