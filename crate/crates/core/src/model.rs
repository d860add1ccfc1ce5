//! Factored transition systems: parameters, constraints, clauses, problems
//! and plans, together with plan validation and the equality analysis used
//! to find free parameters.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::FtsError;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamKind {
    StateIn,
    Control,
    StateOut,
}

/// One of the `2m + n` transition parameters `x_i`, `u_j` or `x'_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParameterIndex {
    pub kind: ParamKind,
    pub slot: usize,
}

impl ParameterIndex {
    pub const fn x(slot: usize) -> Self {
        Self {
            kind: ParamKind::StateIn,
            slot,
        }
    }
    pub const fn u(slot: usize) -> Self {
        Self {
            kind: ParamKind::Control,
            slot,
        }
    }
    pub const fn x2(slot: usize) -> Self {
        Self {
            kind: ParamKind::StateOut,
            slot,
        }
    }
    pub fn is_state(&self) -> bool {
        self.kind != ParamKind::Control
    }
}

impl fmt::Display for ParameterIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ParamKind::StateIn => write!(f, "x{}", self.slot),
            ParamKind::Control => write!(f, "u{}", self.slot),
            ParamKind::StateOut => write!(f, "x{}'", self.slot),
        }
    }
}

pub type Predicate = Arc<dyn Fn(&[Value]) -> bool + Send + Sync>;

/// A named relation shared by every constraint that refers to it.
///
/// Test-backed relations are certified by running `test` on value
/// combinations drawn from `arg_types`; all other relations are certified
/// only by sampler outputs, and `check` is the membership oracle used when
/// validating finished plans.
#[derive(Clone)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    pub test: Option<Predicate>,
    pub arg_types: Vec<String>,
    pub check: Option<Predicate>,
}

impl Relation {
    pub fn certified(name: &str, arity: usize, check: Predicate) -> Self {
        Self {
            name: name.to_string(),
            arity,
            test: None,
            arg_types: Vec::new(),
            check: Some(check),
        }
    }

    pub fn tested(name: &str, arg_types: &[&str], test: Predicate) -> Self {
        Self {
            name: name.to_string(),
            arity: arg_types.len(),
            test: Some(test),
            arg_types: arg_types.iter().map(|s| s.to_string()).collect(),
            check: None,
        }
    }

    pub fn is_test(&self) -> bool {
        self.test.is_some()
    }

    /// Membership oracle: the test for test-backed relations, else `check`.
    pub fn holds(&self, values: &[Value]) -> Option<bool> {
        if values.iter().any(Value::is_lazy) {
            return Some(false);
        }
        self.test
            .as_ref()
            .or(self.check.as_ref())
            .map(|p| p(values))
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Relation")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("test", &self.test.is_some())
            .field("arg_types", &self.arg_types)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    Constant(Value),
    Pairwise,
    Relation(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub params: Vec<ParameterIndex>,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn constant(p: ParameterIndex, v: Value) -> Self {
        Self {
            name: format!("{p}={v}"),
            params: vec![p],
            kind: ConstraintKind::Constant(v),
        }
    }

    pub fn pairwise(a: ParameterIndex, b: ParameterIndex) -> Self {
        Self {
            name: format!("{a}={b}"),
            params: vec![a, b],
            kind: ConstraintKind::Pairwise,
        }
    }

    pub fn relation(name: &str, params: Vec<ParameterIndex>) -> Self {
        Self {
            name: name.to_string(),
            params,
            kind: ConstraintKind::Relation(name.to_string()),
        }
    }

    pub fn relation_name(&self) -> Option<&str> {
        match &self.kind {
            ConstraintKind::Relation(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_equality(&self) -> bool {
        !matches!(self.kind, ConstraintKind::Relation(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub name: String,
    pub constraints: Vec<Constraint>,
}

impl Clause {
    pub fn new(name: &str, constraints: Vec<Constraint>) -> Self {
        Self {
            name: name.to_string(),
            constraints,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VariableDomain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Finite(Vec<Value>),
    Symbolic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: VariableDomain,
}

impl Variable {
    pub fn new(name: &str, domain: VariableDomain) -> Self {
        Self {
            name: name.to_string(),
            domain,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TransitionSystem {
    pub state_vars: Vec<Variable>,
    pub control_vars: Vec<Variable>,
    pub clauses: Vec<Clause>,
    pub relations: BTreeMap<String, Relation>,
}

impl TransitionSystem {
    pub fn m(&self) -> usize {
        self.state_vars.len()
    }

    pub fn n(&self) -> usize {
        self.control_vars.len()
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn add_relation(&mut self, relation: Relation) {
        self.relations.insert(relation.name.clone(), relation);
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_vars.iter().position(|v| v.name == name)
    }

    fn param_in_range(&self, p: ParameterIndex) -> bool {
        match p.kind {
            ParamKind::Control => p.slot < self.n(),
            _ => p.slot < self.m(),
        }
    }

    /// Check the structural invariants of one clause against this system.
    pub fn check_clause(&self, clause: &Clause) -> Result<(), FtsError> {
        let mut constants: HashMap<ParameterIndex, &Value> = HashMap::new();
        for c in &clause.constraints {
            let bad = |why: &str| FtsError::MalformedConstraint {
                clause: clause.name.clone(),
                constraint: c.name.clone(),
                reason: why.to_string(),
            };
            if c.params.is_empty() {
                return Err(bad("no parameters"));
            }
            let distinct: HashSet<_> = c.params.iter().collect();
            if distinct.len() != c.params.len() {
                return Err(bad("repeated parameter"));
            }
            if let Some(p) = c.params.iter().find(|p| !self.param_in_range(**p)) {
                return Err(bad(&format!("parameter {p} out of range")));
            }
            match &c.kind {
                ConstraintKind::Constant(v) => {
                    if c.params.len() != 1 {
                        return Err(bad("constant equality must be unary"));
                    }
                    if let Some(prev) = constants.insert(c.params[0], v) {
                        if prev != v {
                            return Err(bad("two distinct constants on one parameter"));
                        }
                    }
                }
                ConstraintKind::Pairwise => {
                    if c.params.len() != 2 {
                        return Err(bad("pairwise equality must be binary"));
                    }
                }
                ConstraintKind::Relation(r) => {
                    let rel = self
                        .relations
                        .get(r)
                        .ok_or_else(|| bad("unknown relation"))?;
                    if rel.arity != c.params.len() {
                        return Err(bad("arity mismatch"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), FtsError> {
        let mut names = HashSet::new();
        for clause in &self.clauses {
            if !names.insert(&clause.name) {
                return Err(FtsError::DuplicateClause(clause.name.clone()));
            }
            self.check_clause(clause)?;
        }
        Ok(())
    }
}

/// A relation name paired with values certified to satisfy it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Element {
    pub relation: Arc<str>,
    pub values: Vec<Value>,
}

impl Element {
    pub fn new(relation: &str, values: Vec<Value>) -> Self {
        Self {
            relation: Arc::from(relation),
            values,
        }
    }

    pub fn has_lazy(&self) -> bool {
        self.values.iter().any(Value::is_lazy)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// A named pool of values: every value occurring at one of `sources`
/// (relation, argument position) belongs to the type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueType {
    pub name: String,
    pub sources: Vec<(String, usize)>,
}

impl ValueType {
    pub fn new(name: &str, sources: &[(&str, usize)]) -> Self {
        Self {
            name: name.to_string(),
            sources: sources.iter().map(|(r, i)| (r.to_string(), *i)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub system: TransitionSystem,
    /// Constant equalities over state-in parameters, one per state variable.
    pub initial: Clause,
    /// Constraints over state-in parameters.
    pub goal: Clause,
    /// Facts about the constants of the problem known before any sampling.
    pub initial_elements: Vec<Element>,
    pub types: Vec<ValueType>,
}

impl Problem {
    pub fn initial_state(&self) -> Result<Vec<Value>, FtsError> {
        let m = self.system.m();
        let mut state: Vec<Option<Value>> = vec![None; m];
        for c in &self.initial.constraints {
            match (&c.kind, c.params.as_slice()) {
                (ConstraintKind::Constant(v), [p])
                    if p.kind == ParamKind::StateIn && p.slot < m =>
                {
                    if state[p.slot].replace(v.clone()).is_some() {
                        return Err(FtsError::BadInitial(format!(
                            "variable {} assigned twice",
                            p.slot
                        )));
                    }
                }
                _ => {
                    return Err(FtsError::BadInitial(format!(
                        "non-constant constraint {}",
                        c.name
                    )))
                }
            }
        }
        state
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| FtsError::BadInitial(format!("variable {i} unassigned"))))
            .collect()
    }

    pub fn check(&self) -> Result<(), FtsError> {
        self.system.check()?;
        self.initial_state()?;
        for c in &self.goal.constraints {
            if c.params.iter().any(|p| p.kind != ParamKind::StateIn) {
                return Err(FtsError::MalformedConstraint {
                    clause: self.goal.name.clone(),
                    constraint: c.name.clone(),
                    reason: "goal constraints may only mention state-in parameters".into(),
                });
            }
        }
        self.system.check_clause(&self.goal)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanSkeleton(pub Vec<String>);

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub controls: Vec<Vec<Value>>,
    pub states: Vec<Vec<Value>>,
    pub skeleton: PlanSkeleton,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Initial,
    /// Transition `i` (1-based) from `states[i-1]` to `states[i]`.
    Step(usize),
    Goal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub stage: Stage,
    pub clause: String,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Stage::Initial => write!(f, "initial state violates {}", self.constraint),
            Stage::Goal => write!(
                f,
                "final state violates goal constraint {}",
                self.constraint
            ),
            Stage::Step(i) => write!(f, "step {i} ({}) violates {}", self.clause, self.constraint),
        }
    }
}

fn transition_value<'a>(
    p: ParameterIndex,
    x: &'a [Value],
    u: &'a [Value],
    x2: &'a [Value],
) -> &'a Value {
    match p.kind {
        ParamKind::StateIn => &x[p.slot],
        ParamKind::Control => &u[p.slot],
        ParamKind::StateOut => &x2[p.slot],
    }
}

/// Evaluate every constraint of `clause` on one transition; returns the name
/// of the first violated constraint.
pub fn first_violation(
    system: &TransitionSystem,
    clause: &Clause,
    x: &[Value],
    u: &[Value],
    x2: &[Value],
) -> Result<Option<String>, FtsError> {
    for c in &clause.constraints {
        let vals: Vec<&Value> = c
            .params
            .iter()
            .map(|p| transition_value(*p, x, u, x2))
            .collect();
        let ok = match &c.kind {
            ConstraintKind::Constant(k) => vals[0] == k,
            ConstraintKind::Pairwise => vals[0] == vals[1],
            ConstraintKind::Relation(r) => {
                let rel = system
                    .relations
                    .get(r)
                    .ok_or_else(|| FtsError::UnknownRelation(r.clone()))?;
                let owned: Vec<Value> = vals.into_iter().cloned().collect();
                rel.holds(&owned)
                    .ok_or_else(|| FtsError::Unverifiable(r.clone()))?
            }
        };
        if !ok {
            return Ok(Some(c.name.clone()));
        }
    }
    Ok(None)
}

/// Check a plan against the continuous problem. `Ok(None)` means valid.
pub fn validate_plan(problem: &Problem, plan: &Plan) -> Result<Option<Violation>, FtsError> {
    let sys = &problem.system;
    let (m, n) = (sys.m(), sys.n());
    let k = plan.controls.len();
    if plan.states.len() != k + 1 || plan.skeleton.0.len() != k {
        return Err(FtsError::MalformedPlan(format!(
            "{} states, {} controls, {} clauses",
            plan.states.len(),
            k,
            plan.skeleton.0.len()
        )));
    }
    if plan.states.iter().any(|s| s.len() != m) || plan.controls.iter().any(|u| u.len() != n) {
        return Err(FtsError::MalformedPlan(
            "state or control vector has the wrong size".into(),
        ));
    }
    let empty: Vec<Value> = Vec::new();
    if let Some(c) = first_violation(sys, &problem.initial, &plan.states[0], &empty, &empty)? {
        return Ok(Some(Violation {
            stage: Stage::Initial,
            clause: problem.initial.name.clone(),
            constraint: c,
        }));
    }
    for (i, name) in plan.skeleton.0.iter().enumerate() {
        let clause = sys
            .clause(name)
            .ok_or_else(|| FtsError::MalformedPlan(format!("unknown clause {name}")))?;
        let (x, u, x2) = (&plan.states[i], &plan.controls[i], &plan.states[i + 1]);
        if let Some(c) = first_violation(sys, clause, x, u, x2)? {
            return Ok(Some(Violation {
                stage: Stage::Step(i + 1),
                clause: name.clone(),
                constraint: c,
            }));
        }
    }
    if let Some(c) = first_violation(sys, &problem.goal, &plan.states[k], &empty, &empty)? {
        return Ok(Some(Violation {
            stage: Stage::Goal,
            clause: problem.goal.name.clone(),
            constraint: c,
        }));
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Equality analysis

#[derive(Clone, Debug, PartialEq)]
pub struct Component<P> {
    pub members: Vec<P>,
    pub constant: Option<Value>,
    pub representative: P,
}

impl<P> Component<P> {
    pub fn is_free(&self) -> bool {
        self.constant.is_none()
    }
}

/// Connected components of the pairwise-equality graph over parameters and
/// constants. Components that only carry a variable across a transition
/// unchanged are reported in `framed` rather than `components`.
#[derive(Clone, Debug)]
pub struct EqualityComponents<P> {
    pub params: Vec<P>,
    pub components: Vec<Component<P>>,
    pub framed: Vec<P>,
}

impl<P: Copy + Eq + Hash + Ord> EqualityComponents<P> {
    pub fn free(&self) -> Vec<P> {
        self.components
            .iter()
            .filter(|c| c.is_free())
            .map(|c| c.representative)
            .collect()
    }

    pub fn fixed(&self) -> usize {
        self.components.iter().filter(|c| !c.is_free()).count()
    }

    /// Component index of every non-framed parameter.
    pub fn component_of(&self) -> HashMap<P, usize> {
        let mut map = HashMap::new();
        for (i, c) in self.components.iter().enumerate() {
            for p in &c.members {
                map.insert(*p, i);
            }
        }
        map
    }

    pub fn representative_map(&self) -> HashMap<P, P> {
        let mut map = HashMap::new();
        for c in &self.components {
            for p in &c.members {
                map.insert(*p, c.representative);
            }
        }
        map
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Group `params` into equality components. `is_frame` decides whether a
/// constant-free component is a pure frame (dropped from `components`).
pub fn equality_components<P: Copy + Eq + Hash + Ord + fmt::Display>(
    params: &[P],
    constants: &[(P, Value)],
    pairs: &[(P, P)],
    is_frame: impl Fn(&[P]) -> bool,
) -> Result<EqualityComponents<P>, FtsError> {
    let mut params: Vec<P> = params.to_vec();
    params.sort();
    params.dedup();
    let index: HashMap<P, usize> = params.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mut uf = UnionFind::new(params.len());
    for (a, b) in pairs {
        uf.union(index[a], index[b]);
    }
    let mut root_constant: HashMap<usize, Value> = HashMap::new();
    for (p, v) in constants {
        let root = uf.find(index[p]);
        if let Some(prev) = root_constant.get(&root) {
            if prev != v {
                return Err(FtsError::InconsistentClause(format!(
                    "{p} is transitively equal to both {prev} and {v}"
                )));
            }
        } else {
            root_constant.insert(root, v.clone());
        }
    }
    let mut groups: BTreeMap<usize, Vec<P>> = BTreeMap::new();
    for (i, p) in params.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(*p);
    }
    let mut components = Vec::new();
    let mut framed = Vec::new();
    for (root, members) in groups {
        let constant = root_constant.get(&root).cloned();
        if constant.is_none() && is_frame(&members) {
            framed.extend(members);
            continue;
        }
        let representative = members[0];
        components.push(Component {
            members,
            constant,
            representative,
        });
    }
    Ok(EqualityComponents {
        params,
        components,
        framed,
    })
}

/// Parameters of a clause that take part in the analysis: those mentioned by
/// any constraint plus every state-out parameter.
pub fn clause_params(clause: &Clause, m: usize) -> Vec<ParameterIndex> {
    let mut ps: Vec<ParameterIndex> = clause
        .constraints
        .iter()
        .flat_map(|c| c.params.iter().copied())
        .collect();
    ps.extend((0..m).map(ParameterIndex::x2));
    ps.sort();
    ps.dedup();
    ps
}

/// Free-parameter analysis of one clause. `bound` adds constants (e.g. the
/// initial state) anchored to parameters of the clause.
pub fn free_parameters(
    clause: &Clause,
    m: usize,
    bound: &[(ParameterIndex, Value)],
) -> Result<EqualityComponents<ParameterIndex>, FtsError> {
    let params = clause_params(clause, m);
    let mut constants: Vec<(ParameterIndex, Value)> = bound.to_vec();
    let mut pairs = Vec::new();
    let mut related: HashSet<ParameterIndex> = HashSet::new();
    let mut frame_pairs: HashSet<(ParameterIndex, ParameterIndex)> = HashSet::new();
    for c in &clause.constraints {
        match &c.kind {
            ConstraintKind::Constant(v) => constants.push((c.params[0], v.clone())),
            ConstraintKind::Pairwise => {
                let (a, b) = (c.params[0], c.params[1]);
                pairs.push((a, b));
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                if lo.kind == ParamKind::StateIn
                    && hi.kind == ParamKind::StateOut
                    && lo.slot == hi.slot
                {
                    frame_pairs.insert((lo, hi));
                }
            }
            ConstraintKind::Relation(_) => related.extend(c.params.iter().copied()),
        }
    }
    equality_components(&params, &constants, &pairs, |members| match members {
        [a, b] => frame_pairs.contains(&(*a, *b)) && !related.contains(a) && !related.contains(b),
        _ => false,
    })
}

// ---------------------------------------------------------------------------
// Plan skeletons and constraint networks

/// A parameter of the plan parameter-space `(x^0, u^1, x^1, ..., u^k, x^k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlanParam {
    State { t: usize, slot: usize },
    Control { t: usize, slot: usize },
}

impl fmt::Display for PlanParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanParam::State { t, slot } => write!(f, "x{slot}^{t}"),
            PlanParam::Control { t, slot } => write!(f, "u{slot}^{t}"),
        }
    }
}

/// Map a transition parameter of step `t` (1-based) into the plan.
pub fn plan_param(p: ParameterIndex, t: usize) -> PlanParam {
    match p.kind {
        ParamKind::StateIn => PlanParam::State {
            t: t - 1,
            slot: p.slot,
        },
        ParamKind::Control => PlanParam::Control { t, slot: p.slot },
        ParamKind::StateOut => PlanParam::State { t, slot: p.slot },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConstraint {
    pub name: String,
    /// `None` for initial and goal constraints.
    pub step: Option<usize>,
    pub is_equality: bool,
    pub params: Vec<PlanParam>,
    pub constant: Option<Value>,
}

/// Bipartite graph between plan parameters and the constraints of the
/// plan-wide clause.
#[derive(Clone, Debug)]
pub struct ConstraintNetwork {
    pub params: Vec<PlanParam>,
    pub constraints: Vec<NetworkConstraint>,
}

impl ConstraintNetwork {
    pub fn edge_count(&self) -> usize {
        self.constraints.iter().map(|c| c.params.len()).sum()
    }

    pub fn equality_components(&self) -> Result<EqualityComponents<PlanParam>, FtsError> {
        let mut constants = Vec::new();
        let mut pairs = Vec::new();
        for c in &self.constraints {
            if let Some(v) = &c.constant {
                constants.push((c.params[0], v.clone()));
            } else if c.is_equality {
                pairs.push((c.params[0], c.params[1]));
            }
        }
        equality_components(&self.params, &constants, &pairs, |_| false)
    }

    /// (total parameters, free parameters) of the skeleton.
    pub fn parameter_counts(&self) -> Result<(usize, usize), FtsError> {
        let comps = self.equality_components()?;
        Ok((self.params.len(), comps.free().len()))
    }
}

pub fn skeleton_constraint_network(
    problem: &Problem,
    skeleton: &PlanSkeleton,
) -> Result<ConstraintNetwork, FtsError> {
    let sys = &problem.system;
    let (m, n) = (sys.m(), sys.n());
    let k = skeleton.0.len();
    let mut params: Vec<PlanParam> = (0..m).map(|slot| PlanParam::State { t: 0, slot }).collect();
    for t in 1..=k {
        params.extend((0..n).map(|slot| PlanParam::Control { t, slot }));
        params.extend((0..m).map(|slot| PlanParam::State { t, slot }));
    }
    let mut constraints = Vec::new();
    let mut push = |c: &Constraint, step: Option<usize>, at: usize| {
        constraints.push(NetworkConstraint {
            name: c.name.clone(),
            step,
            is_equality: c.is_equality(),
            params: c.params.iter().map(|p| plan_param(*p, at)).collect(),
            constant: match &c.kind {
                ConstraintKind::Constant(v) => Some(v.clone()),
                _ => None,
            },
        });
    };
    for c in &problem.initial.constraints {
        push(c, None, 1);
    }
    for (i, name) in skeleton.0.iter().enumerate() {
        let clause = sys
            .clause(name)
            .ok_or_else(|| FtsError::MalformedPlan(format!("unknown clause {name}")))?;
        for c in &clause.constraints {
            push(c, Some(i + 1), i + 1);
        }
    }
    for c in &problem.goal.constraints {
        push(c, None, k + 1);
    }
    Ok(ConstraintNetwork {
        params,
        constraints,
    })
}

// ---------------------------------------------------------------------------
// Sampling networks

/// Input/output parameter sets of one conditional sampler applied inside a
/// sampling network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplerNode<P> {
    pub name: String,
    pub inputs: Vec<P>,
    pub outputs: Vec<P>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkCheck<P> {
    /// A witness order (indices into the sampler list).
    Valid(Vec<usize>),
    Uncovered(P),
    MultiplyProduced(P),
    /// No order exists; the listed parameter is an input that is never
    /// produced earlier.
    Unordered(P),
}

impl<P> NetworkCheck<P> {
    pub fn is_valid(&self) -> bool {
        matches!(self, NetworkCheck::Valid(_))
    }
}

/// Outputs must partition `theta`, and some order must put every producer
/// of an input before its consumer. Inputs outside `theta` are treated as
/// given constants.
pub fn validate_sampling_network<P: Copy + Eq + Hash + Ord>(
    samplers: &[SamplerNode<P>],
    theta: &[P],
) -> NetworkCheck<P> {
    let theta_set: HashSet<P> = theta.iter().copied().collect();
    let mut producer: HashMap<P, usize> = HashMap::new();
    for (i, s) in samplers.iter().enumerate() {
        for o in &s.outputs {
            if !theta_set.contains(o) || producer.insert(*o, i).is_some() {
                return NetworkCheck::MultiplyProduced(*o);
            }
        }
    }
    let mut sorted_theta = theta.to_vec();
    sorted_theta.sort();
    if let Some(p) = sorted_theta.iter().find(|p| !producer.contains_key(p)) {
        return NetworkCheck::Uncovered(*p);
    }
    // Kahn's algorithm, lowest index first for a deterministic witness.
    let mut order = Vec::new();
    let mut done = vec![false; samplers.len()];
    let mut available: HashSet<P> = HashSet::new();
    loop {
        let next = (0..samplers.len()).find(|&i| {
            !done[i]
                && samplers[i]
                    .inputs
                    .iter()
                    .all(|p| !theta_set.contains(p) || available.contains(p))
        });
        match next {
            Some(i) => {
                done[i] = true;
                order.push(i);
                available.extend(samplers[i].outputs.iter().copied());
            }
            None => break,
        }
    }
    if order.len() == samplers.len() {
        return NetworkCheck::Valid(order);
    }
    let mut stuck: Vec<P> = (0..samplers.len())
        .filter(|&i| !done[i])
        .flat_map(|i| samplers[i].inputs.iter().copied())
        .filter(|p| theta_set.contains(p) && !available.contains(p))
        .collect();
    stuck.sort();
    NetworkCheck::Unordered(stuck[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(f: impl Fn(&[Value]) -> bool + Send + Sync + 'static) -> Predicate {
        Arc::new(f)
    }

    /// A one-variable counter: x' = x + 1 when x < 3.
    fn counter() -> Problem {
        let mut sys = TransitionSystem {
            state_vars: vec![Variable::new("x", VariableDomain::Symbolic)],
            control_vars: vec![],
            ..Default::default()
        };
        sys.add_relation(Relation::certified(
            "Succ",
            2,
            pred(|v| {
                let (a, b) = (v[0].as_real().unwrap()[0], v[1].as_real().unwrap()[0]);
                b == a + 1.0 && a < 3.0
            }),
        ));
        sys.clauses.push(Clause::new(
            "Inc",
            vec![Constraint::relation(
                "Succ",
                vec![ParameterIndex::x(0), ParameterIndex::x2(0)],
            )],
        ));
        Problem {
            system: sys,
            initial: Clause::new(
                "init",
                vec![Constraint::constant(
                    ParameterIndex::x(0),
                    Value::scalar(0.0),
                )],
            ),
            goal: Clause::new(
                "goal",
                vec![Constraint::constant(
                    ParameterIndex::x(0),
                    Value::scalar(2.0),
                )],
            ),
            initial_elements: vec![],
            types: vec![],
        }
    }

    fn counter_plan(xs: &[f64]) -> Plan {
        Plan {
            controls: vec![vec![]; xs.len() - 1],
            states: xs.iter().map(|x| vec![Value::scalar(*x)]).collect(),
            skeleton: PlanSkeleton(vec!["Inc".into(); xs.len() - 1]),
        }
    }

    #[test]
    fn empty_plan_in_goal_is_valid() {
        let mut p = counter();
        p.goal = Clause::new(
            "goal",
            vec![Constraint::constant(
                ParameterIndex::x(0),
                Value::scalar(0.0),
            )],
        );
        assert_eq!(validate_plan(&p, &counter_plan(&[0.0])).unwrap(), None);
    }

    #[test]
    fn validation_reports_first_bad_step() {
        let p = counter();
        assert_eq!(
            validate_plan(&p, &counter_plan(&[0.0, 1.0, 2.0])).unwrap(),
            None
        );
        let v = validate_plan(&p, &counter_plan(&[0.0, 1.0, 3.0]))
            .unwrap()
            .unwrap();
        assert_eq!(v.stage, Stage::Step(2));
        assert_eq!(v.constraint, "Succ");
        let v = validate_plan(&p, &counter_plan(&[0.0, 1.0]))
            .unwrap()
            .unwrap();
        assert_eq!(v.stage, Stage::Goal);
    }

    #[test]
    fn unknown_clause_is_malformed() {
        let p = counter();
        let mut plan = counter_plan(&[0.0, 1.0]);
        plan.skeleton.0[0] = "Nope".into();
        assert!(matches!(
            validate_plan(&p, &plan),
            Err(FtsError::MalformedPlan(_))
        ));
    }

    #[test]
    fn fully_constrained_clause_has_no_free_parameters() {
        let clause = Clause::new(
            "c",
            vec![
                Constraint::constant(ParameterIndex::x(0), Value::sym("a")),
                Constraint::constant(ParameterIndex::x2(0), Value::sym("b")),
                Constraint::pairwise(ParameterIndex::u(0), ParameterIndex::x(0)),
            ],
        );
        let comps = free_parameters(&clause, 1, &[]).unwrap();
        assert!(comps.free().is_empty());
        assert_eq!(comps.fixed(), comps.components.len());
    }

    #[test]
    fn conflicting_constants_are_inconsistent() {
        let clause = Clause::new(
            "c",
            vec![
                Constraint::constant(ParameterIndex::x(0), Value::sym("a")),
                Constraint::constant(ParameterIndex::x2(0), Value::sym("b")),
                Constraint::pairwise(ParameterIndex::x(0), ParameterIndex::x2(0)),
            ],
        );
        assert!(matches!(
            free_parameters(&clause, 1, &[]),
            Err(FtsError::InconsistentClause(_))
        ));
    }

    #[test]
    fn frame_pairs_are_not_free() {
        let clause = Clause::new(
            "c",
            vec![
                Constraint::pairwise(ParameterIndex::x(0), ParameterIndex::x2(0)),
                Constraint::pairwise(ParameterIndex::x(1), ParameterIndex::x2(1)),
                Constraint::relation("R", vec![ParameterIndex::x(1)]),
            ],
        );
        let comps = free_parameters(&clause, 2, &[]).unwrap();
        assert_eq!(
            comps.framed,
            vec![ParameterIndex::x(0), ParameterIndex::x2(0)]
        );
        assert_eq!(comps.free(), vec![ParameterIndex::x(1)]);
    }

    #[test]
    fn sampling_network_conditions() {
        let node = |name: &str, i: Vec<u8>, o: Vec<u8>| SamplerNode {
            name: name.into(),
            inputs: i,
            outputs: o,
        };
        let ok = [node("b", vec![1], vec![2]), node("a", vec![], vec![1])];
        assert_eq!(
            validate_sampling_network(&ok, &[1, 2]),
            NetworkCheck::Valid(vec![1, 0])
        );
        let twice = [node("a", vec![], vec![1]), node("b", vec![], vec![1])];
        assert_eq!(
            validate_sampling_network(&twice, &[1]),
            NetworkCheck::MultiplyProduced(1)
        );
        let selfloop = [node("a", vec![1], vec![1])];
        assert_eq!(
            validate_sampling_network(&selfloop, &[1]),
            NetworkCheck::Unordered(1)
        );
        let missing = [node("a", vec![], vec![1])];
        assert_eq!(
            validate_sampling_network(&missing, &[1, 2]),
            NetworkCheck::Uncovered(2)
        );
    }

    #[test]
    fn network_edges_sum_arities() {
        let p = counter();
        let net = skeleton_constraint_network(&p, &PlanSkeleton(vec!["Inc".into(), "Inc".into()]))
            .unwrap();
        assert_eq!(net.params.len(), 3);
        assert_eq!(net.constraints.len(), 4);
        assert_eq!(net.edge_count(), 1 + 2 + 2 + 1);
        assert_eq!(net.parameter_counts().unwrap(), (3, 1));
    }
}
