//! Discrete search over a grounded task: breadth-first search and a lazy
//! greedy best-first search guided by a relaxed-plan heuristic.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::grounding::{GroundedTask, GOAL_TRUE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SearchConfig {
    Bfs,
    /// Lazy greedy search on `h + weight * lazy_cost`.
    Hff {
        weight: f64,
    },
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::Hff { weight: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub initial_h: Option<u32>,
    /// `(expanded, h)` whenever a new best heuristic value is reached.
    pub progress: Vec<(usize, u32)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Action indices including the final goal action.
    pub plan: Option<Vec<usize>>,
    pub stats: SearchStats,
}

pub type State = Vec<u32>;

/// Precomputed indexes over a grounded task.
pub struct Engine<'a> {
    pub task: &'a GroundedTask,
    offsets: Vec<usize>,
    n_facts: usize,
    axioms_by_fact: Vec<Vec<usize>>,
    free_axioms: Vec<usize>,
    actions_by_fact: Vec<Vec<usize>>,
    free_actions: Vec<usize>,
    /// Relaxed-graph operators (actions, then axioms) waiting on each fact;
    /// derived facts follow the core facts.
    watchers: Vec<Vec<usize>>,
    achievers: Vec<Vec<usize>>,
}

impl<'a> Engine<'a> {
    pub fn new(task: &'a GroundedTask) -> Self {
        let mut offsets = Vec::with_capacity(task.vars.len());
        let mut n_facts = 0;
        for v in &task.vars {
            offsets.push(n_facts);
            n_facts += v.values.len();
        }
        let mut axioms_by_fact = vec![Vec::new(); n_facts];
        let mut free_axioms = Vec::new();
        for (i, ax) in task.axioms.iter().enumerate() {
            match ax.pre.first() {
                Some((var, val)) => axioms_by_fact[offsets[*var] + *val as usize].push(i),
                None => free_axioms.push(i),
            }
        }
        let mut actions_by_fact = vec![Vec::new(); n_facts];
        let mut free_actions = Vec::new();
        for (i, a) in task.actions.iter().enumerate() {
            match a.pre.first() {
                Some((var, val)) => actions_by_fact[offsets[*var] + *val as usize].push(i),
                None => free_actions.push(i),
            }
        }
        let na = task.actions.len();
        let mut watchers = vec![Vec::new(); n_facts + task.derived.len()];
        let mut achievers = vec![Vec::new(); n_facts + task.derived.len()];
        for (i, a) in task.actions.iter().enumerate() {
            for (var, val) in &a.pre {
                watchers[offsets[*var] + *val as usize].push(i);
            }
            for d in &a.derived_pre {
                watchers[n_facts + *d as usize].push(i);
            }
            for (var, val) in &a.eff {
                achievers[offsets[*var] + *val as usize].push(i);
            }
        }
        for (i, x) in task.axioms.iter().enumerate() {
            for (var, val) in &x.pre {
                watchers[offsets[*var] + *val as usize].push(na + i);
            }
            achievers[n_facts + x.derived as usize].push(na + i);
        }
        Self {
            task,
            offsets,
            n_facts,
            axioms_by_fact,
            free_axioms,
            actions_by_fact,
            free_actions,
            watchers,
            achievers,
        }
    }

    fn fact(&self, var: usize, val: u32) -> usize {
        self.offsets[var] + val as usize
    }

    fn holds(state: &[u32], pre: &[(usize, u32)]) -> bool {
        pre.iter().all(|(var, val)| state[*var] == *val)
    }

    /// Derived variables true in `state`. Axioms only read core variables,
    /// so a single pass reaches the fixpoint.
    pub fn derived(&self, state: &[u32]) -> Vec<bool> {
        let mut out = vec![false; self.task.derived.len()];
        for &i in &self.free_axioms {
            out[self.task.axioms[i].derived as usize] = true;
        }
        for (var, val) in state.iter().enumerate() {
            for &i in &self.axioms_by_fact[self.fact(var, *val)] {
                let ax = &self.task.axioms[i];
                if Self::holds(state, &ax.pre[1..]) {
                    out[ax.derived as usize] = true;
                }
            }
        }
        out
    }

    /// Applicable actions in increasing index order.
    pub fn applicable(&self, state: &[u32]) -> Vec<usize> {
        let derived = self.derived(state);
        let mut out: Vec<usize> = self.free_actions.clone();
        for (var, val) in state.iter().enumerate() {
            out.extend(self.actions_by_fact[self.fact(var, *val)].iter().copied());
        }
        out.retain(|&i| {
            let a = &self.task.actions[i];
            Self::holds(state, &a.pre) && a.derived_pre.iter().all(|d| derived[*d as usize])
        });
        out.sort_unstable();
        out
    }

    pub fn apply(&self, state: &[u32], action: usize) -> State {
        let mut next = state.to_vec();
        for (var, val) in &self.task.actions[action].eff {
            next[*var] = *val;
        }
        next
    }

    pub fn is_goal(&self, state: &[u32]) -> bool {
        state[self.task.goal_var] == GOAL_TRUE
    }

    /// Relaxed-plan heuristic; `None` when the goal is unreachable even
    /// ignoring deletes. Axioms cost nothing.
    pub fn h_ff(&self, state: &[u32]) -> Option<u32> {
        relaxed_plan(self, state).map(|p| p.len() as u32)
    }
}

const INF: u32 = u32::MAX;

/// Actions of the extracted relaxed plan, in extraction order.
pub fn relaxed_plan(engine: &Engine<'_>, state: &[u32]) -> Option<Vec<usize>> {
    let task = engine.task;
    let goal = engine.fact(task.goal_var, GOAL_TRUE);
    if state[task.goal_var] == GOAL_TRUE {
        return Some(Vec::new());
    }
    let nf = engine.n_facts;
    let nd = task.derived.len();
    let na = task.actions.len();
    // fact ids: core facts, then derived
    let mut level = vec![INF; nf + nd];
    let mut op_level = vec![INF; na + task.axioms.len()];
    let mut remaining: Vec<usize> = task
        .actions
        .iter()
        .map(|a| a.pre.len() + a.derived_pre.len())
        .chain(task.axioms.iter().map(|x| x.pre.len()))
        .collect();
    let watchers = &engine.watchers;
    let mut frontier: VecDeque<usize> = VecDeque::new();
    let mut next: Vec<usize> = Vec::new();
    for (var, val) in state.iter().enumerate() {
        let f = engine.fact(var, *val);
        level[f] = 0;
        frontier.push_back(f);
    }
    let mut fire = |op: usize,
                    l: u32,
                    level: &mut Vec<u32>,
                    frontier: &mut VecDeque<usize>,
                    next: &mut Vec<usize>| {
        op_level[op] = l;
        if op < na {
            for (var, val) in &task.actions[op].eff {
                next.push(engine.fact(*var, *val));
            }
        } else {
            let d = nf + task.axioms[op - na].derived as usize;
            if level[d] == INF {
                level[d] = l;
                frontier.push_back(d);
            }
        }
    };
    // operators without preconditions fire in the first layer
    let roots: Vec<usize> = (0..remaining.len())
        .filter(|&op| remaining[op] == 0)
        .collect();
    for op in roots {
        fire(op, 0, &mut level, &mut frontier, &mut next);
    }
    let mut l = 0u32;
    loop {
        while let Some(f) = frontier.pop_front() {
            for &op in &watchers[f] {
                remaining[op] -= 1;
                if remaining[op] == 0 {
                    fire(op, l, &mut level, &mut frontier, &mut next);
                }
            }
        }
        if level[goal] != INF {
            break;
        }
        l += 1;
        for f in next.drain(..) {
            if level[f] == INF {
                level[f] = l;
                frontier.push_back(f);
            }
        }
        if frontier.is_empty() {
            return None;
        }
    }
    let goal_level = level[goal];

    // lowest-index achiever available one level below (same level for axioms)
    let achiever_of = |f: usize| -> usize {
        let l = level[f];
        *engine.achievers[f]
            .iter()
            .find(|op| {
                if **op >= na {
                    op_level[**op] <= l
                } else {
                    op_level[**op] < l
                }
            })
            .expect("reached fact has an achiever")
    };

    let mut goals: Vec<(Vec<usize>, Vec<usize>)> =
        vec![(Vec::new(), Vec::new()); goal_level as usize + 1];
    let push_goal = |goals: &mut Vec<(Vec<usize>, Vec<usize>)>, f: usize| {
        let l = level[f] as usize;
        if l == 0 {
            return;
        }
        if f >= nf {
            goals[l].0.push(f);
        } else {
            goals[l].1.push(f);
        }
    };
    push_goal(&mut goals, goal);
    let mut marked: HashSet<usize> = HashSet::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut chosen_set: HashSet<usize> = HashSet::new();
    for l in (1..=goal_level as usize).rev() {
        let mut i = 0;
        while i < goals[l].0.len() {
            let f = goals[l].0[i];
            i += 1;
            if !marked.insert(f) {
                continue;
            }
            let op = achiever_of(f);
            for (var, val) in &task.axioms[op - na].pre {
                push_goal(&mut goals, engine.fact(*var, *val));
            }
        }
        let mut i = 0;
        while i < goals[l].1.len() {
            let f = goals[l].1[i];
            i += 1;
            if marked.contains(&f) {
                continue;
            }
            let op = achiever_of(f);
            let a = &task.actions[op];
            for (var, val) in &a.eff {
                let e = engine.fact(*var, *val);
                if level[e] as usize == l {
                    marked.insert(e);
                }
            }
            marked.insert(f);
            if chosen_set.insert(op) {
                chosen.push(op);
            }
            for (var, val) in &a.pre {
                push_goal(&mut goals, engine.fact(*var, *val));
            }
            for d in &a.derived_pre {
                push_goal(&mut goals, nf + *d as usize);
            }
        }
    }
    Some(chosen)
}

fn extract(parents: &[(usize, Option<(usize, usize)>)], mut node: usize) -> Vec<usize> {
    let mut plan = Vec::new();
    while let Some((parent, action)) = parents[node].1 {
        plan.push(action);
        node = parent;
    }
    plan.reverse();
    plan
}

pub fn bfs(task: &GroundedTask) -> SearchResult {
    let engine = Engine::new(task);
    let mut stats = SearchStats::default();
    let mut seen: HashMap<State, usize> = HashMap::new();
    // (depth, parent link)
    let mut nodes: Vec<(usize, Option<(usize, usize)>)> = vec![(0, None)];
    let mut states: Vec<State> = vec![task.init.clone()];
    seen.insert(task.init.clone(), 0);
    if engine.is_goal(&task.init) {
        return SearchResult {
            plan: Some(Vec::new()),
            stats,
        };
    }
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        stats.expanded += 1;
        let state = states[n].clone();
        for a in engine.applicable(&state) {
            let next = engine.apply(&state, a);
            if seen.contains_key(&next) {
                continue;
            }
            stats.generated += 1;
            let id = nodes.len();
            nodes.push((nodes[n].0 + 1, Some((n, a))));
            seen.insert(next.clone(), id);
            if engine.is_goal(&next) {
                return SearchResult {
                    plan: Some(extract(&nodes, id)),
                    stats,
                };
            }
            states.push(next);
            queue.push_back(id);
        }
    }
    SearchResult { plan: None, stats }
}

#[derive(Clone, Copy, Debug)]
struct Key {
    f: f64,
    depth: usize,
    seq: usize,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed so that BinaryHeap pops the smallest key
        other
            .f
            .total_cmp(&self.f)
            .then(other.depth.cmp(&self.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Greedy best-first search with deferred evaluation: successors inherit
/// the parent's heuristic value and are evaluated when popped.
pub fn lazy_greedy(task: &GroundedTask, weight: f64) -> SearchResult {
    assert!(weight >= 0.0, "cost weight must be non-negative");
    let engine = Engine::new(task);
    let mut stats = SearchStats::default();
    let mut nodes: Vec<(usize, Option<(usize, usize)>)> = vec![(0, None)];
    let mut node_state: Vec<State> = vec![task.init.clone()];
    let mut node_g: Vec<u32> = vec![0];
    let mut closed: HashMap<State, u32> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push((
        Key {
            f: 0.0,
            depth: 0,
            seq,
        },
        0usize,
    ));
    let mut best_h = u32::MAX;
    while let Some((_, n)) = heap.pop() {
        let state = node_state[n].clone();
        let g = node_g[n];
        if closed.get(&state).is_some_and(|old| *old <= g) {
            continue;
        }
        closed.insert(state.clone(), g);
        if engine.is_goal(&state) {
            return SearchResult {
                plan: Some(extract(&nodes, n)),
                stats,
            };
        }
        let Some(h) = engine.h_ff(&state) else {
            continue;
        };
        if n == 0 {
            stats.initial_h = Some(h);
        }
        stats.expanded += 1;
        if h < best_h {
            best_h = h;
            stats.progress.push((stats.expanded, h));
        }
        for a in engine.applicable(&state) {
            let next = engine.apply(&state, a);
            let g2 = g + task.actions[a].cost;
            if closed.get(&next).is_some_and(|old| *old <= g2) {
                continue;
            }
            stats.generated += 1;
            let depth = nodes[n].0 + 1;
            let id = nodes.len();
            nodes.push((depth, Some((n, a))));
            node_state.push(next);
            node_g.push(g2);
            seq += 1;
            let f = f64::from(h) + weight * f64::from(g2);
            heap.push((Key { f, depth, seq }, id));
        }
    }
    SearchResult { plan: None, stats }
}

pub fn search(task: &GroundedTask, config: SearchConfig) -> SearchResult {
    match config {
        SearchConfig::Bfs => bfs(task),
        SearchConfig::Hff { weight } => lazy_greedy(task, weight),
    }
}

/// Closure of derived variables computed by iterating axioms in the given
/// order until nothing changes.
pub fn axiom_closure(task: &GroundedTask, state: &[u32], order: &[usize]) -> Vec<bool> {
    let mut out = vec![false; task.derived.len()];
    loop {
        let mut changed = false;
        for &i in order {
            let ax = &task.axioms[i];
            if !out[ax.derived as usize] && ax.pre.iter().all(|(var, val)| state[*var] == *val) {
                out[ax.derived as usize] = true;
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Line-oriented summary of a search for trace output.
pub fn trace_lines(label: &str, stats: &SearchStats) -> Vec<String> {
    let mut lines = vec![format!(
        "{label} expanded={} generated={} h0={}",
        stats.expanded,
        stats.generated,
        stats.initial_h.map_or("-".to_string(), |h| h.to_string())
    )];
    lines.extend(
        stats
            .progress
            .iter()
            .map(|(e, h)| format!("{label} progress expanded={e} h={h}")),
    );
    lines
}
