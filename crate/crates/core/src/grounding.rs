//! Compilation of a problem plus a set of constraint elements into a
//! finite-domain planning task with actions, derived variables and axioms.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use indexmap::{IndexMap, IndexSet};

use crate::elements::ElementStore;
use crate::model::{
    free_parameters, Clause, ConstraintKind, ParamKind, ParameterIndex, Plan, PlanSkeleton, Problem,
};
use crate::value::{LazySample, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroundingOptions {
    /// Replace constraints on current-state parameters by derived variables.
    pub axioms: bool,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        Self { axioms: true }
    }
}

/// Per-variable projections of the element set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Discretization {
    pub state: Vec<IndexSet<Value>>,
    pub control: Vec<IndexSet<Value>>,
}

fn all_clauses(problem: &Problem) -> impl Iterator<Item = &Clause> {
    problem
        .system
        .clauses
        .iter()
        .chain(std::iter::once(&problem.goal))
}

/// `Z_p`: every value that some element places at a parameter of variable p.
pub fn discretize(problem: &Problem, store: &ElementStore) -> Discretization {
    let mut d = Discretization {
        state: vec![IndexSet::new(); problem.system.m()],
        control: vec![IndexSet::new(); problem.system.n()],
    };
    let mut seen: HashSet<(String, usize, ParamKind, usize)> = HashSet::new();
    for clause in all_clauses(problem) {
        for c in &clause.constraints {
            let Some(rel) = c.relation_name() else {
                continue;
            };
            for (pos, p) in c.params.iter().enumerate() {
                let kind = if p.kind == ParamKind::Control {
                    ParamKind::Control
                } else {
                    ParamKind::StateIn
                };
                if !seen.insert((rel.to_string(), pos, kind, p.slot)) {
                    continue;
                }
                let target = if kind == ParamKind::Control {
                    &mut d.control[p.slot]
                } else {
                    &mut d.state[p.slot]
                };
                for e in store.relation(rel) {
                    target.insert(e.values[pos].clone());
                }
            }
        }
    }
    d
}

/// Discretized state count over variables with a non-empty domain, and the
/// number of transitions of a motion clause: undirected configuration pairs
/// joined by some trajectory times the arrangements of the other variables.
pub fn count_discretization(
    problem: &Problem,
    store: &ElementStore,
    motion_relation: &str,
    config_var: usize,
) -> (u128, u128) {
    let d = discretize(problem, store);
    let sizes: Vec<(usize, u128)> = d
        .state
        .iter()
        .enumerate()
        .filter(|(_, z)| !z.is_empty())
        .map(|(i, z)| (i, z.len() as u128))
        .collect();
    let states = sizes.iter().map(|(_, n)| n).product();
    let arrangements: u128 = sizes
        .iter()
        .filter(|(i, _)| *i != config_var)
        .map(|(_, n)| n)
        .product();
    let edges: HashSet<(Value, Value)> = store
        .relation(motion_relation)
        .map(|e| {
            let (a, b) = (e.values[0].clone(), e.values[2].clone());
            if format!("{a:?}") <= format!("{b:?}") {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    (states, edges.len() as u128 * arrangements)
}

#[derive(Clone, Debug, Default)]
pub struct VarDomain {
    pub name: String,
    pub values: Vec<Value>,
    index: HashMap<Value, u32>,
}

impl VarDomain {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn intern(&mut self, v: &Value) -> u32 {
        if let Some(i) = self.index.get(v) {
            return *i;
        }
        let i = self.values.len() as u32;
        self.values.push(v.clone());
        self.index.insert(v.clone(), i);
        i
    }

    pub fn find(&self, v: &Value) -> Option<u32> {
        self.index.get(v).copied()
    }
}

/// A relation restricted to fixed state-in slots; its derived variables are
/// indexed by the values at the remaining positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DerivedFamily {
    pub relation: String,
    /// `Some(slot)` where the position holds current-state variable `slot`.
    pub slots: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivedVar {
    pub family: usize,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axiom {
    pub pre: Vec<(usize, u32)>,
    pub derived: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundAction {
    pub name: String,
    /// Index of the source clause; `None` for the goal action.
    pub clause: Option<usize>,
    pub binding: Vec<(ParameterIndex, Value)>,
    pub pre: Vec<(usize, u32)>,
    pub derived_pre: Vec<u32>,
    pub eff: Vec<(usize, u32)>,
    pub cost: u32,
    pub controls: Vec<Value>,
}

#[derive(Clone, Debug, Default)]
pub struct GroundedTask {
    /// Core state variables followed by the goal flag.
    pub vars: Vec<VarDomain>,
    pub goal_var: usize,
    pub init: Vec<u32>,
    pub actions: Vec<GroundAction>,
    pub families: Vec<DerivedFamily>,
    pub derived: Vec<DerivedVar>,
    pub axioms: Vec<Axiom>,
    pub diagnostics: Vec<String>,
}

pub const GOAL_TRUE: u32 = 1;

impl GroundedTask {
    pub fn goal_action_count(&self) -> usize {
        self.actions.iter().filter(|a| a.clause.is_none()).count()
    }

    fn fact(&self, (var, val): (usize, u32)) -> String {
        format!(
            "{}={}",
            self.vars[var].name, self.vars[var].values[val as usize]
        )
    }

    pub fn derived_name(&self, d: u32) -> String {
        let dv = &self.derived[d as usize];
        let fam = &self.families[dv.family];
        let mut vals = dv.values.iter();
        let args: Vec<String> = fam
            .slots
            .iter()
            .map(|s| match s {
                Some(_) => "·".to_string(),
                None => vals.next().map(|v| v.to_string()).unwrap_or_default(),
            })
            .collect();
        format!("{}({})", fam.relation, args.join(", "))
    }

    pub fn action_label(&self, a: &GroundAction) -> String {
        let args: Vec<String> = a.binding.iter().map(|(p, v)| format!("{p}={v}")).collect();
        format!("{}({})", a.name, args.join(", "))
    }

    /// Line-oriented dump: one NAME/PRE/EFF/COST block per action.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for a in &self.actions {
            let mut pre: Vec<String> = a.pre.iter().map(|f| self.fact(*f)).collect();
            pre.extend(a.derived_pre.iter().map(|d| self.derived_name(*d)));
            let eff: Vec<String> = a.eff.iter().map(|f| self.fact(*f)).collect();
            let _ = writeln!(out, "NAME {}", self.action_label(a));
            let _ = writeln!(out, "PRE {}", pre.join(" "));
            let _ = writeln!(out, "EFF {}", eff.join(" "));
            let _ = writeln!(out, "COST {}", a.cost);
            out.push('\n');
        }
        out
    }

    /// Turn a sequence of action indices into a plan over the original
    /// variables, dropping the goal action.
    pub fn reconstruct(&self, actions: &[usize]) -> Plan {
        let core = self.goal_var;
        let mut state: Vec<u32> = self.init.clone();
        let value_of = |s: &[u32]| -> Vec<Value> {
            (0..core)
                .map(|i| self.vars[i].values[s[i] as usize].clone())
                .collect()
        };
        let mut plan = Plan {
            states: vec![value_of(&state)],
            ..Default::default()
        };
        let mut skeleton = Vec::new();
        for &ai in actions {
            let a = &self.actions[ai];
            if a.clause.is_none() {
                continue;
            }
            for (var, val) in &a.eff {
                state[*var] = *val;
            }
            plan.states.push(value_of(&state));
            plan.controls.push(a.controls.clone());
            skeleton.push(a.name.clone());
        }
        plan.skeleton = PlanSkeleton(skeleton);
        plan
    }
}

struct Atom {
    /// Free component bound by each kept position.
    vars: Vec<usize>,
    rows: Vec<Vec<Value>>,
}

struct ClausePlan<'a> {
    clause: &'a Clause,
    clause_index: Option<usize>,
    /// Constant of each component, if fixed.
    constants: Vec<Option<Value>>,
    comp_of: HashMap<ParameterIndex, usize>,
    representative: Vec<ParameterIndex>,
    bound: Vec<bool>,
    derived: Vec<(usize, Vec<ParameterIndex>)>,
    atoms: Vec<Atom>,
    effects: Vec<(usize, ParameterIndex)>,
    pres: Vec<(usize, ParameterIndex)>,
}

pub fn ground(problem: &Problem, store: &ElementStore, options: GroundingOptions) -> GroundedTask {
    let sys = &problem.system;
    let (m, n) = (sys.m(), sys.n());
    let disc = discretize(problem, store);
    let mut task = GroundedTask::default();
    for v in &sys.state_vars {
        task.vars.push(VarDomain::new(&v.name));
    }
    let mut goal_dom = VarDomain::new("goal");
    goal_dom.intern(&Value::Bool(false));
    goal_dom.intern(&Value::Bool(true));
    task.vars.push(goal_dom);
    task.goal_var = m;

    match problem.initial_state() {
        Ok(init) => {
            task.init = init
                .iter()
                .enumerate()
                .map(|(i, v)| task.vars[i].intern(v))
                .collect();
            task.init.push(0);
        }
        Err(e) => {
            task.diagnostics.push(e.to_string());
            return task;
        }
    }
    for (i, z) in disc.state.iter().enumerate() {
        for v in z {
            task.vars[i].intern(v);
        }
    }

    let mut families: IndexMap<DerivedFamily, ()> = IndexMap::new();
    let mut plans = Vec::new();
    for (ci, clause) in sys.clauses.iter().enumerate() {
        match plan_clause(
            clause,
            Some(ci),
            m,
            options.axioms,
            store,
            &disc,
            &mut families,
        ) {
            Ok(p) => plans.push(p),
            Err(msg) => task
                .diagnostics
                .push(format!("skipped clause {}: {msg}", clause.name)),
        }
    }
    match plan_clause(&problem.goal, None, 0, false, store, &disc, &mut families) {
        Ok(p) => plans.push(p),
        Err(msg) => task.diagnostics.push(format!("skipped goal: {msg}")),
    }

    // axioms: one per (element, family of its relation)
    let mut derived_index: HashMap<(usize, Vec<Value>), u32> = HashMap::new();
    let mut axiom_seen: HashSet<(Vec<(usize, u32)>, u32)> = HashSet::new();
    for (fi, fam) in families.keys().enumerate() {
        for e in store.relation(&fam.relation) {
            let mut pre = Vec::new();
            let mut dvals = Vec::new();
            for (pos, s) in fam.slots.iter().enumerate() {
                match s {
                    Some(slot) => pre.push((*slot, task.vars[*slot].intern(&e.values[pos]))),
                    None => dvals.push(e.values[pos].clone()),
                }
            }
            pre.sort_unstable();
            pre.dedup();
            if pre.windows(2).any(|w| w[0].0 == w[1].0) {
                // one variable required to hold two values at once
                continue;
            }
            let next = task.derived.len() as u32;
            let d = *derived_index.entry((fi, dvals.clone())).or_insert_with(|| {
                task.derived.push(DerivedVar {
                    family: fi,
                    values: dvals,
                });
                next
            });
            if axiom_seen.insert((pre.clone(), d)) {
                task.axioms.push(Axiom { pre, derived: d });
            }
        }
    }
    task.families = families.keys().cloned().collect();

    for plan in &plans {
        emit_actions(plan, n, &mut task, &derived_index);
    }
    task
}

fn plan_clause<'a>(
    clause: &'a Clause,
    clause_index: Option<usize>,
    m: usize,
    axioms: bool,
    store: &ElementStore,
    disc: &Discretization,
    families: &mut IndexMap<DerivedFamily, ()>,
) -> Result<ClausePlan<'a>, String> {
    let comps = free_parameters(clause, m, &[]).map_err(|e| e.to_string())?;
    let comp_of = comps.component_of();
    let constants: Vec<Option<Value>> = comps
        .components
        .iter()
        .map(|c| c.constant.clone())
        .collect();
    let representative: Vec<ParameterIndex> =
        comps.components.iter().map(|c| c.representative).collect();
    let framed_slots: HashSet<usize> = clause
        .constraints
        .iter()
        .filter(|c| c.kind == ConstraintKind::Pairwise)
        .filter_map(|c| {
            let (a, b) = (c.params[0], c.params[1]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            (lo.kind == ParamKind::StateIn && hi.kind == ParamKind::StateOut && lo.slot == hi.slot)
                .then_some(lo.slot)
        })
        .collect();

    let mut needed = vec![false; comps.components.len()];
    let mut direct = Vec::new();
    let mut derived = Vec::new();
    let mut effects = Vec::new();
    for c in &clause.constraints {
        let Some(rel) = c.relation_name() else {
            continue;
        };
        let has_state_in = c.params.iter().any(|p| p.kind == ParamKind::StateIn);
        if axioms && has_state_in {
            let slots: Vec<Option<usize>> = c
                .params
                .iter()
                .map(|p| (p.kind == ParamKind::StateIn).then_some(p.slot))
                .collect();
            let fam = DerivedFamily {
                relation: rel.to_string(),
                slots,
            };
            let (fi, _) = families.insert_full(fam, ());
            let dparams: Vec<ParameterIndex> = c
                .params
                .iter()
                .copied()
                .filter(|p| p.kind != ParamKind::StateIn)
                .collect();
            for p in &dparams {
                needed[comp_of[p]] = true;
            }
            derived.push((fi, dparams));
        } else {
            for p in &c.params {
                needed[comp_of[p]] = true;
            }
            direct.push((rel, c.params.clone()));
        }
    }
    for (p, ci) in &comp_of {
        match p.kind {
            ParamKind::Control => needed[*ci] = true,
            ParamKind::StateOut if !framed_slots.contains(&p.slot) => {
                needed[*ci] = true;
                effects.push((p.slot, *p));
            }
            ParamKind::StateIn if !axioms => needed[*ci] = true,
            _ => {}
        }
    }
    effects.sort();
    let bound: Vec<bool> = needed
        .iter()
        .zip(&constants)
        .map(|(n, k)| *n && k.is_none())
        .collect();
    let mut pres: Vec<(usize, ParameterIndex)> = comp_of
        .keys()
        .filter(|p| p.kind == ParamKind::StateIn)
        .filter(|p| constants[comp_of[*p]].is_some() || bound[comp_of[*p]])
        .map(|p| (p.slot, *p))
        .collect();
    pres.sort();

    let mut atoms = Vec::new();
    let mut covered = vec![false; comps.components.len()];
    let mut add_atom = |params: &[ParameterIndex], rows: &mut dyn Iterator<Item = Vec<Value>>| {
        let keep: Vec<usize> = (0..params.len())
            .filter(|i| bound[comp_of[&params[*i]]])
            .collect();
        let vars: Vec<usize> = keep.iter().map(|i| comp_of[&params[*i]]).collect();
        let mut seen = HashSet::new();
        let rows: Vec<Vec<Value>> = rows
            .filter(|row| {
                params
                    .iter()
                    .enumerate()
                    .all(|(i, p)| match &constants[comp_of[p]] {
                        Some(k) => &row[i] == k,
                        None => true,
                    })
            })
            .map(|row| keep.iter().map(|i| row[*i].clone()).collect::<Vec<_>>())
            .filter(|r| seen.insert(r.clone()))
            .collect();
        for v in &vars {
            covered[*v] = true;
        }
        atoms.push(Atom { vars, rows });
    };
    for (rel, params) in &direct {
        add_atom(params, &mut store.relation(rel).map(|e| e.values.clone()));
    }
    for (fi, dparams) in &derived {
        let fam = families.get_index(*fi).expect("family").0;
        let dpos: Vec<usize> = (0..fam.slots.len())
            .filter(|i| fam.slots[*i].is_none())
            .collect();
        if dparams.is_empty() {
            continue;
        }
        let relation = fam.relation.clone();
        add_atom(
            dparams,
            &mut store
                .relation(&relation)
                .map(|e| dpos.iter().map(|i| e.values[*i].clone()).collect()),
        );
    }
    for ci in 0..comps.components.len() {
        if bound[ci] && !covered[ci] {
            let members = &comps.components[ci].members;
            let p = members[0];
            let dom = if p.kind == ParamKind::Control {
                &disc.control[p.slot]
            } else {
                &disc.state[p.slot]
            };
            atoms.push(Atom {
                vars: vec![ci],
                rows: dom.iter().map(|v| vec![v.clone()]).collect(),
            });
        }
    }
    Ok(ClausePlan {
        clause,
        clause_index,
        constants,
        comp_of,
        representative,
        bound,
        derived,
        atoms,
        effects,
        pres,
    })
}

/// Greedy join order: most already-bound variables first, then fewest rows.
fn join_order(atoms: &[Atom]) -> Vec<usize> {
    let mut order = Vec::new();
    let mut bound: BTreeSet<usize> = BTreeSet::new();
    let mut left: Vec<usize> = (0..atoms.len()).collect();
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .max_by_key(|(_, a)| {
                let shared = atoms[**a].vars.iter().filter(|v| bound.contains(v)).count();
                (
                    shared,
                    std::cmp::Reverse(atoms[**a].rows.len()),
                    std::cmp::Reverse(**a),
                )
            })
            .expect("non-empty");
        let a = left.remove(k);
        bound.extend(atoms[a].vars.iter().copied());
        order.push(a);
    }
    order
}

struct Step<'a> {
    atom: &'a Atom,
    key_pos: Vec<usize>,
    index: HashMap<Vec<Value>, Vec<usize>>,
}

fn emit_actions(
    plan: &ClausePlan<'_>,
    n: usize,
    task: &mut GroundedTask,
    derived_index: &HashMap<(usize, Vec<Value>), u32>,
) {
    // nullary derived preconditions and constant tokens are shared by all bindings
    let order = join_order(&plan.atoms);
    let mut bound_before: HashSet<usize> = HashSet::new();
    let mut steps = Vec::new();
    for &ai in &order {
        let atom = &plan.atoms[ai];
        let mut key_pos = Vec::new();
        let mut first_here: HashSet<usize> = HashSet::new();
        for (pos, v) in atom.vars.iter().enumerate() {
            if bound_before.contains(v) {
                key_pos.push(pos);
            } else {
                first_here.insert(*v);
            }
        }
        let mut index: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
        for (ri, row) in atom.rows.iter().enumerate() {
            index
                .entry(key_pos.iter().map(|p| row[*p].clone()).collect())
                .or_default()
                .push(ri);
        }
        bound_before.extend(first_here);
        steps.push(Step {
            atom,
            key_pos,
            index,
        });
    }
    let mut binding: Vec<Option<Value>> = vec![None; plan.constants.len()];
    let mut emit = |binding: &[Option<Value>], task: &mut GroundedTask| {
        let value = |p: &ParameterIndex| -> Option<Value> {
            let ci = plan.comp_of[p];
            plan.constants[ci].clone().or_else(|| binding[ci].clone())
        };
        let mut derived_pre = Vec::new();
        for (fi, dparams) in &plan.derived {
            let vals: Vec<Value> = dparams.iter().map(|p| value(p).expect("bound")).collect();
            match derived_index.get(&(*fi, vals)) {
                Some(d) => derived_pre.push(*d),
                None => return,
            }
        }
        derived_pre.sort_unstable();
        derived_pre.dedup();
        let mut pre = Vec::new();
        for (slot, p) in &plan.pres {
            let v = value(p).expect("bound precondition");
            pre.push((*slot, task.vars[*slot].intern(&v)));
        }
        pre.sort_unstable();
        pre.dedup();
        if pre.windows(2).any(|w| w[0].0 == w[1].0) {
            return;
        }
        let mut eff = Vec::new();
        for (slot, p) in &plan.effects {
            let v = value(p).expect("bound effect");
            eff.push((*slot, task.vars[*slot].intern(&v)));
        }
        if plan.clause_index.is_none() {
            eff.push((task.goal_var, GOAL_TRUE));
        }
        let controls: Vec<Value> = (0..n)
            .map(|j| {
                let p = ParameterIndex::u(j);
                if plan.comp_of.contains_key(&p) {
                    value(&p).expect("bound control")
                } else {
                    Value::none()
                }
            })
            .collect();
        let mut tokens: HashSet<LazySample> = HashSet::new();
        let mut shown = Vec::new();
        for (ci, b) in binding.iter().enumerate() {
            if let Some(v) = b {
                if let Some(t) = v.as_lazy() {
                    tokens.insert(t);
                }
                shown.push((plan.representative[ci], v.clone()));
            }
        }
        shown.sort_by_key(|a| a.0);
        task.actions.push(GroundAction {
            name: if plan.clause_index.is_some() {
                plan.clause.name.clone()
            } else {
                "goal".to_string()
            },
            clause: plan.clause_index,
            binding: shown,
            pre,
            derived_pre,
            eff,
            cost: tokens.len() as u32,
            controls,
        });
    };
    fn rec(
        k: usize,
        steps: &[Step<'_>],
        binding: &mut Vec<Option<Value>>,
        task: &mut GroundedTask,
        emit: &mut dyn FnMut(&[Option<Value>], &mut GroundedTask),
    ) {
        if k == steps.len() {
            emit(binding, task);
            return;
        }
        let step = &steps[k];
        let key: Vec<Value> = step
            .key_pos
            .iter()
            .map(|p| binding[step.atom.vars[*p]].clone().expect("bound key"))
            .collect();
        let Some(rows) = step.index.get(&key) else {
            return;
        };
        for &ri in rows {
            let row = &step.atom.rows[ri];
            let mut assigned = Vec::new();
            let mut ok = true;
            for (pos, v) in step.atom.vars.iter().enumerate() {
                match &binding[*v] {
                    Some(b) if b != &row[pos] => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        binding[*v] = Some(row[pos].clone());
                        assigned.push(*v);
                    }
                }
            }
            if ok {
                rec(k + 1, steps, binding, task, emit);
            }
            for v in assigned {
                binding[v] = None;
            }
        }
    }
    debug_assert!(plan
        .bound
        .iter()
        .zip(&binding)
        .all(|(b, v)| !*b || v.is_none()));
    rec(0, &steps, &mut binding, task, &mut emit);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let mut d = VarDomain::new("x");
        assert_eq!(d.intern(&Value::sym("a")), 0);
        assert_eq!(d.intern(&Value::sym("b")), 1);
        assert_eq!(d.intern(&Value::sym("a")), 0);
        assert_eq!(d.find(&Value::sym("c")), None);
    }
}
