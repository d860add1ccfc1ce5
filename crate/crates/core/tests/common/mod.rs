//! Random finite tasks and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexSet;

use fts_core::elements::{ElementStore, Schema};
use fts_core::grounding::{
    Axiom, DerivedFamily, DerivedVar, GroundAction, GroundedTask, VarDomain, GOAL_TRUE,
};
use fts_core::model::{
    Clause, Constraint, ConstraintKind, Element, ParamKind, ParameterIndex as P, Problem, Relation,
    TransitionSystem, ValueType, Variable, VariableDomain,
};
use fts_core::value::Value;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn sym(i: usize) -> Value {
    Value::sym(&format!("v{i}"))
}

/// Random grounded task over at most 4 variables with at most 4 values.
pub fn random_task(seed: u64) -> GroundedTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.gen_range(2..=4);
    let mut task = GroundedTask::default();
    let mut sizes = Vec::new();
    for i in 0..nvars {
        let mut d = VarDomain::new(&format!("x{i}"));
        let size = rng.gen_range(2..=4);
        for j in 0..size {
            d.intern(&sym(j));
        }
        sizes.push(size);
        task.vars.push(d);
    }
    let mut goal = VarDomain::new("goal");
    goal.intern(&Value::Bool(false));
    goal.intern(&Value::Bool(true));
    task.vars.push(goal);
    task.goal_var = nvars;
    task.init = sizes.iter().map(|s| rng.gen_range(0..*s as u32)).collect();
    task.init.push(0);

    let fact = |rng: &mut ChaCha8Rng| {
        let v = rng.gen_range(0..nvars);
        (v, rng.gen_range(0..sizes[v] as u32))
    };
    let facts = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| {
        let mut vars: Vec<usize> = (0..nvars).collect();
        vars.shuffle(rng);
        let k = rng.gen_range(lo..=hi.min(nvars));
        let mut out: Vec<(usize, u32)> = vars[..k]
            .iter()
            .map(|&v| (v, rng.gen_range(0..sizes[v] as u32)))
            .collect();
        out.sort();
        out
    };
    let nd = rng.gen_range(0..=3);
    if nd > 0 {
        task.families.push(DerivedFamily {
            relation: "D".into(),
            slots: vec![None],
        });
    }
    for d in 0..nd {
        task.derived.push(DerivedVar {
            family: 0,
            values: vec![sym(d)],
        });
        for _ in 0..rng.gen_range(1..=2) {
            let pre = if rng.gen_bool(0.15) {
                Vec::new()
            } else {
                facts(&mut rng, 1, 2)
            };
            task.axioms.push(Axiom {
                pre,
                derived: d as u32,
            });
        }
    }
    let _ = fact;
    let na = rng.gen_range(4..=14);
    for i in 0..na {
        let pre = facts(&mut rng, 0, 2);
        let mut eff = facts(&mut rng, 1, 2);
        eff.retain(|f| !pre.contains(f));
        if eff.is_empty() {
            continue;
        }
        let derived_pre = if nd > 0 && rng.gen_bool(0.3) {
            vec![rng.gen_range(0..nd) as u32]
        } else {
            vec![]
        };
        task.actions.push(GroundAction {
            name: format!("a{i}"),
            clause: Some(0),
            binding: vec![],
            pre,
            derived_pre,
            eff,
            cost: rng.gen_range(0..=2),
            controls: vec![],
        });
    }
    for _ in 0..rng.gen_range(1..=2) {
        let derived_pre = if nd > 0 && rng.gen_bool(0.3) {
            vec![rng.gen_range(0..nd) as u32]
        } else {
            vec![]
        };
        task.actions.push(GroundAction {
            name: "goal".into(),
            clause: None,
            binding: vec![],
            pre: facts(&mut rng, 1, 2),
            derived_pre,
            eff: vec![(nvars, GOAL_TRUE)],
            cost: 0,
            controls: vec![],
        });
    }
    task
}

fn holds(state: &[u32], pre: &[(usize, u32)]) -> bool {
    pre.iter().all(|(v, x)| state[*v] == *x)
}

/// Derived closure by naive iteration.
pub fn oracle_derived(task: &GroundedTask, state: &[u32]) -> Vec<bool> {
    let mut out = vec![false; task.derived.len()];
    for ax in &task.axioms {
        if holds(state, &ax.pre) {
            out[ax.derived as usize] = true;
        }
    }
    out
}

pub fn oracle_successors(task: &GroundedTask, state: &[u32]) -> Vec<Vec<u32>> {
    let d = oracle_derived(task, state);
    task.actions
        .iter()
        .filter(|a| holds(state, &a.pre) && a.derived_pre.iter().all(|x| d[*x as usize]))
        .map(|a| {
            let mut s = state.to_vec();
            for (v, x) in &a.eff {
                s[*v] = *x;
            }
            s
        })
        .collect()
}

/// Number of steps to a goal state by expanding the reachable set one layer
/// at a time; `None` when the closure contains no goal state.
pub fn oracle_distance(task: &GroundedTask) -> Option<usize> {
    let goal = |s: &Vec<u32>| s[task.goal_var] == GOAL_TRUE;
    let mut reach: BTreeSet<Vec<u32>> = BTreeSet::from([task.init.clone()]);
    let mut k = 0;
    loop {
        if reach.iter().any(goal) {
            return Some(k);
        }
        let next: BTreeSet<Vec<u32>> = reach
            .iter()
            .flat_map(|s| oracle_successors(task, s))
            .chain(reach.iter().cloned())
            .collect();
        if next.len() == reach.len() {
            return None;
        }
        reach = next;
        k += 1;
    }
}

/// Relaxed plan length computed from full fact layers, recomputed from
/// scratch at each level, using the same extraction rules as the planner.
pub fn oracle_hff(task: &GroundedTask, state: &[u32]) -> Option<u32> {
    if state[task.goal_var] == GOAL_TRUE {
        return Some(0);
    }
    #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
    enum F {
        Core(usize, u32),
        Derived(u32),
    }
    let mut level: HashMap<F, usize> = HashMap::new();
    let mut act_level: HashMap<usize, usize> = HashMap::new();
    let mut ax_level: HashMap<usize, usize> = HashMap::new();
    for (v, x) in state.iter().enumerate() {
        level.insert(F::Core(v, *x), 0);
    }
    let goal = F::Core(task.goal_var, GOAL_TRUE);
    let has = |level: &HashMap<F, usize>, f: &F| level.contains_key(f);
    let pre_ok = |level: &HashMap<F, usize>, pre: &[(usize, u32)]| {
        pre.iter().all(|(v, x)| has(level, &F::Core(*v, *x)))
    };
    let mut l = 0;
    loop {
        // axioms at this level
        for (i, ax) in task.axioms.iter().enumerate() {
            if !ax_level.contains_key(&i) && pre_ok(&level, &ax.pre) {
                ax_level.insert(i, l);
                level.entry(F::Derived(ax.derived)).or_insert(l);
            }
        }
        for (i, a) in task.actions.iter().enumerate() {
            if !act_level.contains_key(&i)
                && pre_ok(&level, &a.pre)
                && a.derived_pre.iter().all(|d| has(&level, &F::Derived(*d)))
            {
                act_level.insert(i, l);
            }
        }
        if has(&level, &goal) {
            break;
        }
        let before = level.len();
        let adds: Vec<F> = act_level
            .keys()
            .flat_map(|i| task.actions[*i].eff.iter().map(|(v, x)| F::Core(*v, *x)))
            .collect();
        for f in adds {
            level.entry(f).or_insert(l + 1);
        }
        if level.len() == before {
            return None;
        }
        l += 1;
    }
    let goal_level = level[&goal];
    let mut goals: Vec<(Vec<F>, Vec<F>)> = vec![(vec![], vec![]); goal_level + 1];
    let push = |goals: &mut Vec<(Vec<F>, Vec<F>)>, level: &HashMap<F, usize>, f: F| {
        let l = level[&f];
        if l > 0 {
            match f {
                F::Derived(_) => goals[l].0.push(f),
                F::Core(..) => goals[l].1.push(f),
            }
        }
    };
    push(&mut goals, &level, goal);
    let mut marked: HashSet<F> = HashSet::new();
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for l in (1..=goal_level).rev() {
        let mut i = 0;
        while i < goals[l].0.len() {
            let f = goals[l].0[i];
            i += 1;
            if !marked.insert(f) {
                continue;
            }
            let F::Derived(d) = f else { unreachable!() };
            let ax = (0..task.axioms.len())
                .find(|j| {
                    task.axioms[*j].derived == d && ax_level.get(j).is_some_and(|al| *al <= l)
                })
                .unwrap();
            for (v, x) in &task.axioms[ax].pre {
                push(&mut goals, &level, F::Core(*v, *x));
            }
        }
        let mut i = 0;
        while i < goals[l].1.len() {
            let f = goals[l].1[i];
            i += 1;
            if marked.contains(&f) {
                continue;
            }
            let F::Core(v, x) = f else { unreachable!() };
            let a = (0..task.actions.len())
                .find(|j| {
                    task.actions[*j].eff.contains(&(v, x))
                        && act_level.get(j).is_some_and(|al| *al < l)
                })
                .unwrap();
            for (v2, x2) in &task.actions[a].eff {
                if level[&F::Core(*v2, *x2)] == l {
                    marked.insert(F::Core(*v2, *x2));
                }
            }
            marked.insert(f);
            chosen.insert(a);
            for (v2, x2) in &task.actions[a].pre {
                push(&mut goals, &level, F::Core(*v2, *x2));
            }
            for d in &task.actions[a].derived_pre {
                push(&mut goals, &level, F::Derived(*d));
            }
        }
    }
    Some(chosen.len() as u32)
}

/// Every state of the product of the task's core domains (goal flag false).
pub fn all_states(task: &GroundedTask) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for v in 0..task.goal_var {
        let n = task.vars[v].values.len() as u32;
        out = out
            .into_iter()
            .flat_map(|s| (0..n).map(move |x| [s.clone(), vec![x]].concat()))
            .collect();
    }
    for s in &mut out {
        s.push(0);
    }
    out
}

/// Relation holding exactly on the given rows.
fn table_relation(name: &str, arity: usize, rows: &[Vec<Value>]) -> Relation {
    let set: HashSet<Vec<Value>> = rows.iter().cloned().collect();
    Relation::certified(name, arity, Arc::new(move |v: &[Value]| set.contains(v)))
}

/// A random finite transition system whose relations are given as explicit
/// element tables. Returns the problem and the store holding those tables.
pub fn random_system(seed: u64) -> (Problem, ElementStore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=3);
    let k = rng.gen_range(2..=3);
    let vals = |rng: &mut ChaCha8Rng| sym(rng.gen_range(0..k));
    let mut sys = TransitionSystem {
        state_vars: (0..m)
            .map(|i| Variable::new(&format!("x{i}"), VariableDomain::Symbolic))
            .collect(),
        control_vars: vec![Variable::new("u", VariableDomain::Symbolic)],
        ..Default::default()
    };
    let mut elements = Vec::new();
    let mut types = Vec::new();
    let nclauses = rng.gen_range(1..=3);
    for ci in 0..nclauses {
        let mut cons = Vec::new();
        let target = rng.gen_range(0..m);
        // one relation over (x_a, u, x'_target), one optional unary on x_b
        let a = rng.gen_range(0..m);
        let rel = format!("R{ci}");
        cons.push(Constraint::relation(
            &rel,
            vec![P::x(a), P::u(0), P::x2(target)],
        ));
        let rows: Vec<Vec<Value>> = (0..rng.gen_range(2..=5))
            .map(|_| {
                vec![
                    vals(&mut rng),
                    sym(10 + rng.gen_range(0..2)),
                    vals(&mut rng),
                ]
            })
            .collect();
        sys.add_relation(table_relation(&rel, 3, &rows));
        elements.extend(rows.into_iter().map(|row| Element::new(&rel, row)));
        if rng.gen_bool(0.5) {
            let b = rng.gen_range(0..m);
            let un = format!("U{ci}");
            cons.push(Constraint::relation(&un, vec![P::x(b)]));
            let rows: Vec<Vec<Value>> = (0..rng.gen_range(1..=k))
                .map(|_| vec![vals(&mut rng)])
                .collect();
            sys.add_relation(table_relation(&un, 1, &rows));
            elements.extend(rows.into_iter().map(|row| Element::new(&un, row)));
            types.push(ValueType::new(&format!("t{un}"), &[(un.as_str(), 0)]));
        }
        if rng.gen_bool(0.3) {
            let c = rng.gen_range(0..m);
            cons.push(Constraint::constant(P::x(c), vals(&mut rng)));
        }
        for s in 0..m {
            if s != target {
                cons.push(Constraint::pairwise(P::x(s), P::x2(s)));
            }
        }
        sys.clauses.push(Clause::new(&format!("C{ci}"), cons));
        types.push(ValueType::new(
            &format!("t{rel}"),
            &[(rel.as_str(), 0), (rel.as_str(), 1), (rel.as_str(), 2)],
        ));
    }
    // every variable must have its initial value in some domain
    let init: Vec<Value> = (0..m).map(|_| vals(&mut rng)).collect();
    sys.add_relation(table_relation("Init", m, std::slice::from_ref(&init)));
    elements.push(Element::new("Init", init.clone()));
    types.push(ValueType::new(
        "tInit",
        &(0..m).map(|i| ("Init", i)).collect::<Vec<_>>(),
    ));
    let goal_var = rng.gen_range(0..m);
    let goal_val = vals(&mut rng);
    let problem = Problem {
        system: sys,
        initial: Clause::new(
            "initial",
            init.iter()
                .enumerate()
                .map(|(i, v)| Constraint::constant(P::x(i), v.clone()))
                .collect(),
        ),
        goal: Clause::new("goal", vec![Constraint::constant(P::x(goal_var), goal_val)]),
        initial_elements: elements,
        types,
    };
    let schema = Arc::new(Schema::new(&problem).unwrap());
    let mut store = ElementStore::new(schema);
    for e in &problem.initial_elements {
        store.insert(e.clone(), None);
    }
    (problem, store)
}

/// Shortest step count to the goal, enumerating transitions of the system
/// directly from its clauses and element tables.
pub fn system_distance(problem: &Problem, store: &ElementStore) -> (Option<usize>, usize) {
    let sys = &problem.system;
    let m = sys.m();
    let mut values: IndexSet<Value> = IndexSet::new();
    for e in store.iter() {
        values.extend(e.values.iter().cloned());
    }
    let values: Vec<Value> = values.into_iter().collect();
    let table: HashSet<(String, Vec<Value>)> = store
        .iter()
        .map(|e| (e.relation.to_string(), e.values.clone()))
        .collect();
    let get = |p: P, x: &[Value], u: &[Value], y: &[Value]| -> Value {
        match p.kind {
            ParamKind::StateIn => x[p.slot].clone(),
            ParamKind::Control => u[p.slot].clone(),
            ParamKind::StateOut => y[p.slot].clone(),
        }
    };
    let sat = |c: &Clause, x: &[Value], u: &[Value], y: &[Value]| {
        c.constraints.iter().all(|con| match &con.kind {
            ConstraintKind::Constant(v) => &get(con.params[0], x, u, y) == v,
            ConstraintKind::Pairwise => get(con.params[0], x, u, y) == get(con.params[1], x, u, y),
            ConstraintKind::Relation(r) => table.contains(&(
                r.to_string(),
                con.params.iter().map(|p| get(*p, x, u, y)).collect(),
            )),
        })
    };
    let init: Vec<Value> = problem.initial_state().unwrap();
    let mut all: Vec<Vec<Value>> = vec![vec![]];
    for _ in 0..m {
        all = all
            .into_iter()
            .flat_map(|s| {
                values
                    .iter()
                    .map(move |v| [s.clone(), vec![v.clone()]].concat())
            })
            .collect();
    }
    let is_goal = |s: &[Value]| sat(&problem.goal, s, &[], s);
    let mut reach: HashSet<Vec<Value>> = HashSet::from([init]);
    let mut k = 0;
    loop {
        if reach.iter().any(|s| is_goal(s)) {
            return (Some(k), reach.len());
        }
        let mut next = reach.clone();
        for x in &reach {
            for c in &sys.clauses {
                for u in &values {
                    for y in &all {
                        if sat(c, x, std::slice::from_ref(u), y) {
                            next.insert(y.clone());
                        }
                    }
                }
            }
        }
        if next.len() == reach.len() {
            return (None, reach.len());
        }
        reach = next;
        k += 1;
    }
}

/// Reachable core states of a grounded task, as value tuples.
pub fn reachable_values(task: &GroundedTask) -> HashSet<Vec<Value>> {
    let mut seen: BTreeSet<Vec<u32>> = BTreeSet::from([task.init.clone()]);
    let mut stack = vec![task.init.clone()];
    while let Some(s) = stack.pop() {
        for t in oracle_successors(task, &s) {
            let mut core = t.clone();
            core[task.goal_var] = 0;
            if seen.insert(core.clone()) {
                stack.push(core);
            }
        }
    }
    seen.iter()
        .map(|s| {
            (0..task.goal_var)
                .map(|v| task.vars[v].values[s[v] as usize].clone())
                .collect()
        })
        .collect()
}

/// Whether `(x, u, y)` is a transition of the named clause, checking
/// relation constraints by membership in the store.
pub fn step_in_table(
    problem: &Problem,
    store: &ElementStore,
    clause: &str,
    x: &[Value],
    u: &[Value],
    y: &[Value],
) -> bool {
    let Some(c) = problem.system.clause(clause) else {
        return false;
    };
    let get = |p: P| -> Value {
        match p.kind {
            ParamKind::StateIn => x[p.slot].clone(),
            ParamKind::Control => u[p.slot].clone(),
            ParamKind::StateOut => y[p.slot].clone(),
        }
    };
    c.constraints.iter().all(|con| match &con.kind {
        ConstraintKind::Constant(v) => &get(con.params[0]) == v,
        ConstraintKind::Pairwise => get(con.params[0]) == get(con.params[1]),
        ConstraintKind::Relation(r) => {
            let e = Element::new(r, con.params.iter().map(|p| get(*p)).collect());
            store.contains(&e)
        }
    })
}
