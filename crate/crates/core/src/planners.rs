//! The incremental and focused planners.
//!
//! Both alternate between growing a set of certified elements and a
//! discrete search over the task grounded from those elements. The focused
//! planner additionally plans with lazy placeholders and only samples the
//! instances that a placeholder plan actually depends on.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::elements::{ElementStore, InstanceId, Schema};
use crate::error::FtsError;
use crate::grounding::{ground, GroundingOptions};
use crate::model::{validate_plan, ConstraintKind, Element, Plan, Problem};
use crate::samplers::{process_samplers, ConditionalSampler, InstanceTable, Slot, TokenMode};
use crate::search::{search, trace_lines, SearchConfig};
use crate::value::{LazyOrigin, LazySample, Value};

/// A problem together with the samplers that certify its relations.
#[derive(Clone)]
pub struct Bundle {
    pub problem: Problem,
    pub samplers: Arc<[ConditionalSampler]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Incremental,
    #[default]
    Focused,
}

/// How the focused planner names placeholders and stores fresh samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocusedMode {
    /// `Dag` when the sampler type graph is acyclic, otherwise `Literal`.
    #[default]
    Auto,
    /// Per-sampler placeholders; fresh samples wait for the next episode.
    Literal,
    /// Per-sampler placeholders; fresh samples are usable immediately.
    Trace,
    /// Per-instance placeholders; fresh samples are usable immediately and
    /// descendants of a sampled root are sampled in the same iteration.
    Dag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub algorithm: Algorithm,
    pub search: SearchConfig,
    pub seed: u64,
    pub timeout_s: Option<f64>,
    pub max_iterations: Option<usize>,
    pub axioms: bool,
    pub focused_mode: FocusedMode,
    /// Focused: keep sampled instances eager instead of resetting them.
    pub hybrid: bool,
    /// Focused: samplers evaluated eagerly in the lazy pass.
    pub eager: Vec<String>,
    pub trace: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Focused,
            search: SearchConfig::default(),
            seed: 0,
            timeout_s: Some(60.0),
            max_iterations: None,
            axioms: true,
            focused_mode: FocusedMode::Auto,
            hybrid: false,
            eager: Vec::new(),
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Solved,
    Infeasible,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub sampler: String,
    pub inputs: Vec<String>,
    pub produced: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub episode: usize,
    /// Elements available to the search (including placeholders).
    pub elements: usize,
    pub skeleton: Option<Vec<String>>,
    /// Concrete draws made after this iteration's search.
    pub sampled: Vec<DrawRecord>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub iterations: usize,
    pub episodes: usize,
    pub search_calls: usize,
    pub sampler_calls: BTreeMap<String, usize>,
    pub test_calls: usize,
    /// Concrete elements known at the end of the run.
    pub elements: usize,
    /// Concrete elements that came from sampler draws.
    pub sampled_elements: usize,
    pub records: Vec<IterationRecord>,
    /// Placeholder plans found again within the same episode.
    pub repeated_plans: usize,
    #[serde(skip)]
    pub elapsed_s: f64,
}

impl RunStats {
    pub fn total_sampler_calls(&self) -> usize {
        self.sampler_calls.values().sum()
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub plan: Option<Plan>,
    pub stats: RunStats,
    pub trace: Vec<String>,
}

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    use std::time::Instant;

    pub struct Clock {
        start: Instant,
        limit: Option<f64>,
    }

    impl Clock {
        pub fn new(limit: Option<f64>) -> Self {
            Self {
                start: Instant::now(),
                limit,
            }
        }
        pub fn elapsed(&self) -> f64 {
            self.start.elapsed().as_secs_f64()
        }
        pub fn expired(&self) -> bool {
            self.limit.is_some_and(|l| self.elapsed() > l)
        }
    }
}

// No monotonic clock in the browser build; iteration limits apply instead.
#[cfg(target_arch = "wasm32")]
mod clock {
    pub struct Clock;

    impl Clock {
        pub fn new(_: Option<f64>) -> Self {
            Clock
        }
        pub fn elapsed(&self) -> f64 {
            0.0
        }
        pub fn expired(&self) -> bool {
            false
        }
    }
}

use clock::Clock;

struct Run<'a> {
    bundle: &'a Bundle,
    config: &'a PlannerConfig,
    clock: Clock,
    table: InstanceTable,
    store: ElementStore,
    stats: RunStats,
    trace: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(bundle: &'a Bundle, config: &'a PlannerConfig) -> Result<Self, FtsError> {
        let problem = &bundle.problem;
        problem.check()?;
        let schema = Arc::new(Schema::new(problem)?);
        let table = InstanceTable::new(bundle.samplers.clone(), &schema, problem, config.seed)?;
        let mut store = ElementStore::new(schema);
        for e in &problem.initial_elements {
            store.insert(e.clone(), None);
        }
        Ok(Self {
            bundle,
            config,
            clock: Clock::new(config.timeout_s),
            table,
            store,
            stats: RunStats::default(),
            trace: Vec::new(),
        })
    }

    fn out_of_budget(&self) -> bool {
        self.clock.expired()
            || self
                .config
                .max_iterations
                .is_some_and(|m| self.stats.iterations >= m)
    }

    fn search(&mut self, elements: &ElementStore) -> Option<Plan> {
        let task = ground(
            &self.bundle.problem,
            elements,
            GroundingOptions {
                axioms: self.config.axioms,
            },
        );
        for d in &task.diagnostics {
            log::warn!("{d}");
        }
        self.stats.search_calls += 1;
        let result = search(&task, self.config.search);
        if self.config.trace {
            let label = format!(
                "iter={} actions={} axioms={}",
                self.stats.iterations,
                task.actions.len(),
                task.axioms.len()
            );
            self.trace.extend(trace_lines(&label, &result.stats));
        }
        result.plan.map(|p| task.reconstruct(&p))
    }

    fn record_draw(&self, id: InstanceId, produced: usize) -> DrawRecord {
        let inst = self.table.get(id);
        DrawRecord {
            sampler: self.table.samplers()[inst.sampler].name.clone(),
            inputs: inst.inputs.iter().map(|v| v.to_string()).collect(),
            produced,
        }
    }

    fn finish(mut self, outcome: Outcome, plan: Option<Plan>) -> Result<RunResult, FtsError> {
        if let Some(p) = &plan {
            if let Some(v) = validate_plan(&self.bundle.problem, p)? {
                return Err(FtsError::MalformedPlan(format!(
                    "planner returned an invalid plan: {v}"
                )));
            }
        }
        self.stats.sampler_calls = self
            .table
            .calls()
            .map(|(n, c)| (n.to_string(), c))
            .collect();
        self.stats.test_calls = self.store.test_calls();
        self.stats.elements = self.store.len();
        self.stats.sampled_elements = self
            .store
            .iter()
            .filter(|e| self.store.producer(e).is_some())
            .count();
        self.stats.elapsed_s = self.clock.elapsed();
        if self.config.trace {
            self.trace.push(format!(
                "outcome={outcome:?} iterations={} episodes={} sampler_calls={}",
                self.stats.iterations,
                self.stats.episodes,
                self.stats.total_sampler_calls()
            ));
        }
        Ok(RunResult {
            outcome,
            plan,
            stats: self.stats,
            trace: self.trace,
        })
    }
}

pub fn solve(bundle: &Bundle, config: &PlannerConfig) -> Result<RunResult, FtsError> {
    match config.algorithm {
        Algorithm::Incremental => incremental(bundle, config),
        Algorithm::Focused => focused(bundle, config),
    }
}

pub fn incremental(bundle: &Bundle, config: &PlannerConfig) -> Result<RunResult, FtsError> {
    let mut run = Run::new(bundle, config)?;
    run.stats.episodes = 1;
    let mut queue: VecDeque<InstanceId> =
        run.table.instantiate_all(&run.store).into_iter().collect();
    let mut cursor = run.store.log().len();
    loop {
        if run.out_of_budget() {
            return run.finish(Outcome::Timeout, None);
        }
        run.stats.iterations += 1;
        let store = run.store.clone();
        let plan = run.search(&store);
        let mut record = IterationRecord {
            iteration: run.stats.iterations,
            episode: 1,
            elements: store.len(),
            skeleton: plan.as_ref().map(|p| p.skeleton.0.clone()),
            sampled: Vec::new(),
        };
        if let Some(plan) = plan {
            run.stats.records.push(record);
            return run.finish(Outcome::Solved, Some(plan));
        }
        if queue.is_empty() {
            run.stats.records.push(record);
            return run.finish(Outcome::Infeasible, None);
        }
        let k = queue.len();
        let mut processed = IndexSet::new();
        let clock = &run.clock;
        let calls = process_samplers(
            &mut run.table,
            &mut queue,
            &mut processed,
            &mut run.store,
            &mut cursor,
            Some(k),
            &|t, id| t.get(id).exhausted,
            &mut |t, s, id| {
                if clock.expired() {
                    return 0;
                }
                let els = t.sample(id);
                s.extend(els.into_iter().map(|e| (e, Some(id))))
            },
        );
        record.sampled = calls
            .iter()
            .map(|c| run.record_draw(c.instance, c.produced))
            .collect();
        run.stats.records.push(record);
        for p in processed {
            if !run.table.get(p).exhausted {
                queue.push_back(p);
            }
        }
    }
}

/// Elements a plan relies on: every relation constraint of each step
/// evaluated on the plan's values, plus the goal's relation constraints.
pub fn plan_elements(problem: &Problem, plan: &Plan) -> Result<Vec<Element>, FtsError> {
    let sys = &problem.system;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut add = |rel: &str, vals: Vec<Value>, out: &mut Vec<Element>| {
        let e = Element::new(rel, vals);
        if seen.insert(e.clone()) {
            out.push(e);
        }
    };
    for (i, name) in plan.skeleton.0.iter().enumerate() {
        let clause = sys
            .clause(name)
            .ok_or_else(|| FtsError::MalformedPlan(format!("unknown clause {name}")))?;
        let (x, u, x2) = (&plan.states[i], &plan.controls[i], &plan.states[i + 1]);
        for c in &clause.constraints {
            if let ConstraintKind::Relation(rel) = &c.kind {
                let vals = c
                    .params
                    .iter()
                    .map(|p| match p.kind {
                        crate::model::ParamKind::StateIn => x[p.slot].clone(),
                        crate::model::ParamKind::Control => u[p.slot].clone(),
                        crate::model::ParamKind::StateOut => x2[p.slot].clone(),
                    })
                    .collect();
                add(rel, vals, &mut out);
            }
        }
    }
    let last = plan
        .states
        .last()
        .ok_or_else(|| FtsError::MalformedPlan("no states".into()))?;
    for c in &problem.goal.constraints {
        if let ConstraintKind::Relation(rel) = &c.kind {
            add(
                rel,
                c.params.iter().map(|p| last[p.slot].clone()).collect(),
                &mut out,
            );
        }
    }
    Ok(out)
}

/// Concrete-input instances whose sampling would replace the placeholders
/// of `targets` that are not in `elements`. Placeholder elements with a
/// producer lead to that producer (and through its placeholder inputs to
/// their producers); optimistic test elements lead to the producers of
/// any token not already explained by a producer-backed element.
pub fn retrace_instances(
    targets: &[Element],
    elements: &ElementStore,
    mixed: &ElementStore,
    table: &InstanceTable,
) -> (Vec<InstanceId>, Vec<InstanceId>) {
    let missing: Vec<&Element> = targets.iter().filter(|e| !elements.contains(e)).collect();
    let mut covered: HashSet<LazySample> = HashSet::new();
    let mut start: Vec<InstanceId> = Vec::new();
    for e in &missing {
        if let Some(p) = mixed.producer(e) {
            start.push(p);
            covered.extend(e.values.iter().filter_map(Value::as_lazy));
        }
    }
    for e in &missing {
        if mixed.producer(e).is_none() {
            for t in e.values.iter().filter_map(Value::as_lazy) {
                if covered.insert(t) {
                    if let Some(p) = mixed.token_producers(&t).first() {
                        start.push(*p);
                    }
                }
            }
        }
    }
    let mut roots = IndexSet::new();
    let mut inner = IndexSet::new();
    let mut visited = HashSet::new();
    let mut stack: Vec<InstanceId> = start.into_iter().rev().collect();
    while let Some(id) = stack.pop() {
        if !visited.insert(id) {
            continue;
        }
        let inst = table.get(id);
        if inst.is_concrete() {
            roots.insert(id);
            continue;
        }
        inner.insert(id);
        let parents: Vec<InstanceId> = inst
            .inputs
            .iter()
            .filter_map(Value::as_lazy)
            .filter_map(|t| mixed.token_producers(&t).first().copied())
            .collect();
        stack.extend(parents.into_iter().rev());
    }
    (roots.into_iter().collect(), inner.into_iter().collect())
}

/// Whether the value-type graph induced by the samplers is acyclic.
pub fn sampler_graph_acyclic(bundle: &Bundle) -> bool {
    let types = &bundle.problem.types;
    let index: HashMap<&str, usize> = types
        .iter()
        .enumerate()
        .map(|(i, t)| (t.name.as_str(), i))
        .collect();
    let mut edges: Vec<HashSet<usize>> = vec![HashSet::new(); types.len()];
    for s in bundle.samplers.iter() {
        let mut outs = HashSet::new();
        for c in &s.certified {
            for (pos, slot) in c.args.iter().enumerate() {
                if let Slot::Out(_) = slot {
                    for (ti, t) in types.iter().enumerate() {
                        if t.sources.iter().any(|(r, p)| r == &c.relation && *p == pos) {
                            outs.insert(ti);
                        }
                    }
                }
            }
        }
        for i in &s.inputs {
            if let Some(ti) = index.get(i.as_str()) {
                edges[*ti].extend(outs.iter().copied());
            }
        }
    }
    // Kahn
    let mut indeg = vec![0usize; types.len()];
    for e in &edges {
        for t in e {
            indeg[*t] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..types.len()).filter(|i| indeg[*i] == 0).collect();
    let mut seen = 0;
    while let Some(t) = ready.pop() {
        seen += 1;
        for u in &edges[t] {
            indeg[*u] -= 1;
            if indeg[*u] == 0 {
                ready.push(*u);
            }
        }
    }
    seen == types.len()
}

pub fn resolve_mode(bundle: &Bundle, mode: FocusedMode) -> FocusedMode {
    match mode {
        FocusedMode::Auto if sampler_graph_acyclic(bundle) => FocusedMode::Dag,
        FocusedMode::Auto => FocusedMode::Literal,
        m => m,
    }
}

fn plan_key(plan: &Plan) -> String {
    let mut s = plan.skeleton.0.join(",");
    for u in &plan.controls {
        for v in u {
            s.push('|');
            s.push_str(&format!("{v:?}"));
        }
    }
    for x in &plan.states {
        for v in x {
            s.push('|');
            s.push_str(&format!("{v:?}"));
        }
    }
    s
}

pub fn focused(bundle: &Bundle, config: &PlannerConfig) -> Result<RunResult, FtsError> {
    let mode = resolve_mode(bundle, config.focused_mode);
    let tokens = if mode == FocusedMode::Dag {
        TokenMode::PerInstance
    } else {
        TokenMode::PerSampler
    };
    let direct_add = mode != FocusedMode::Literal;
    let eager: HashSet<usize> = bundle
        .samplers
        .iter()
        .enumerate()
        .filter(|(_, s)| config.eager.contains(&s.name))
        .map(|(i, _)| i)
        .collect();

    let mut run = Run::new(bundle, config)?;
    run.stats.episodes = 1;
    let mut sampled: IndexSet<InstanceId> = IndexSet::new();
    let mut new_elements: Vec<(Element, Option<InstanceId>)> = Vec::new();
    let mut episode_plans: HashSet<String> = HashSet::new();
    loop {
        if run.out_of_budget() {
            return run.finish(Outcome::Timeout, None);
        }
        run.stats.iterations += 1;
        let hybrid = config.hybrid;
        let candidates = run.table.instantiate_all(&run.store);
        let mut queue: VecDeque<InstanceId> = candidates
            .into_iter()
            .filter(|s| (hybrid || !sampled.contains(s)) && !run.table.get(*s).exhausted)
            .collect();
        let mut processed: IndexSet<InstanceId> = if hybrid {
            IndexSet::new()
        } else {
            sampled.clone()
        };
        let mut mixed = run.store.clone();
        let mut cursor = mixed.log().len();
        let mut concrete: Vec<(Element, InstanceId)> = Vec::new();
        {
            let clock = &run.clock;
            let sampled_ref = &sampled;
            let eager_ref = &eager;
            process_samplers(
                &mut run.table,
                &mut queue,
                &mut processed,
                &mut mixed,
                &mut cursor,
                None,
                &|t, id| t.get(id).exhausted,
                &mut |t, s, id| {
                    let inst = t.get(id);
                    let concrete_inputs = inst.is_concrete();
                    let eager_now = concrete_inputs
                        && ((eager_ref.contains(&inst.sampler) && inst.cursor == 0)
                            || (hybrid && sampled_ref.contains(&id)));
                    if eager_now {
                        if clock.expired() {
                            return 0;
                        }
                        let els = t.sample(id);
                        concrete.extend(els.iter().map(|e| (e.clone(), id)));
                        s.extend(els.into_iter().map(|e| (e, Some(id))))
                    } else if eager_ref.contains(&inst.sampler) && concrete_inputs {
                        // eager instance already drawn: its outputs are in the store
                        0
                    } else {
                        let els = t.sample_lazy(id, tokens);
                        s.extend(els.into_iter().map(|e| (e, Some(id))))
                    }
                },
            );
        }
        for (e, id) in concrete {
            run.store.insert(e, Some(id));
        }
        let mixed_len = mixed.len();
        let plan = run.search(&mixed);
        let mut record = IterationRecord {
            iteration: run.stats.iterations,
            episode: run.stats.episodes,
            elements: mixed_len,
            skeleton: plan.as_ref().map(|p| p.skeleton.0.clone()),
            sampled: Vec::new(),
        };
        let Some(plan) = plan else {
            run.stats.records.push(record);
            if sampled.is_empty() && new_elements.is_empty() {
                return run.finish(Outcome::Infeasible, None);
            }
            for (e, p) in new_elements.drain(..) {
                run.store.insert(e, p);
            }
            if !hybrid {
                sampled.clear();
            }
            episode_plans.clear();
            run.stats.episodes += 1;
            continue;
        };
        let targets = plan_elements(&bundle.problem, &plan)?;
        if targets.iter().all(|e| run.store.contains(e)) {
            run.stats.records.push(record);
            return run.finish(Outcome::Solved, Some(plan));
        }
        if !episode_plans.insert(plan_key(&plan)) {
            run.stats.repeated_plans += 1;
        }
        let (roots, inner) = retrace_instances(&targets, &run.store, &mixed, &run.table);
        let mut fresh: HashMap<InstanceId, Vec<Value>> = HashMap::new();
        let mut draw = |run: &mut Run<'_>,
                        id: InstanceId,
                        record: &mut IterationRecord,
                        fresh: &mut HashMap<InstanceId, Vec<Value>>| {
            let els = run.table.sample(id);
            let produced = els.len();
            if produced > 0 {
                if let Some(out) = run.table.get(id).last_output.clone() {
                    fresh.insert(id, out);
                }
            }
            if direct_add {
                for e in els {
                    run.store.insert(e, Some(id));
                }
            } else {
                new_elements.extend(els.into_iter().map(|e| (e, Some(id))));
            }
            record.sampled.push(run.record_draw(id, produced));
        };
        for id in &roots {
            if run.clock.expired() {
                break;
            }
            draw(&mut run, *id, &mut record, &mut fresh);
            sampled.insert(*id);
        }
        if mode == FocusedMode::Dag {
            // substitute fresh outputs into placeholder descendants, parents first
            let mut pending: Vec<InstanceId> = inner.into_iter().rev().collect();
            loop {
                let mut progressed = false;
                let mut rest = Vec::new();
                for id in pending {
                    let inst = run.table.get(id);
                    let subst: Option<Vec<Value>> = inst
                        .inputs
                        .iter()
                        .map(|v| match v.as_lazy() {
                            Some(LazySample(LazyOrigin::Instance { instance, slot })) => {
                                fresh.get(&instance).map(|out| out[slot as usize].clone())
                            }
                            Some(_) => None,
                            None => Some(v.clone()),
                        })
                        .collect();
                    match subst {
                        Some(inputs) => {
                            let sampler = inst.sampler;
                            let filter_ok = run.table.samplers()[sampler]
                                .input_filter
                                .as_ref()
                                .is_none_or(|f| f(&inputs));
                            let child = run.table.instance(sampler, inputs);
                            if filter_ok
                                && !run.table.get(child).exhausted
                                && !sampled.contains(&child)
                                && !run.clock.expired()
                            {
                                draw(&mut run, child, &mut record, &mut fresh);
                                sampled.insert(child);
                                if let Some(out) = fresh.remove(&child) {
                                    fresh.insert(id, out);
                                }
                            }
                            progressed = true;
                        }
                        None => rest.push(id),
                    }
                }
                pending = rest;
                if !progressed || pending.is_empty() {
                    break;
                }
            }
        }
        let stalled = record.sampled.is_empty();
        run.stats.records.push(record);
        if stalled && !run.clock.expired() {
            // nothing left to draw for this plan: behave as a failed search
            if sampled.is_empty() && new_elements.is_empty() {
                return run.finish(Outcome::Infeasible, None);
            }
            for (e, p) in new_elements.drain(..) {
                run.store.insert(e, p);
            }
            if !hybrid {
                sampled.clear();
            }
            episode_plans.clear();
            run.stats.episodes += 1;
        }
    }
}
