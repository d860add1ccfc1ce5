mod common;

use common::{all_states, oracle_distance, oracle_hff, random_task};
use fts_core::domains::scenes;
use fts_core::domains::ProblemSpec;
use fts_core::elements::{ElementStore, Schema};
use fts_core::grounding::{
    ground, GroundAction, GroundedTask, GroundingOptions, VarDomain, GOAL_TRUE,
};
use fts_core::search::{axiom_closure, bfs, lazy_greedy, Engine};
use fts_core::value::Value;
use std::sync::Arc;

fn replay(task: &GroundedTask, plan: &[usize]) -> bool {
    let engine = Engine::new(task);
    let mut s = task.init.clone();
    for &a in plan {
        if !engine.applicable(&s).contains(&a) {
            return false;
        }
        s = engine.apply(&s, a);
    }
    engine.is_goal(&s)
}

#[test]
fn bfs_matches_layered_reachability() {
    for seed in 0..100 {
        let task = random_task(seed);
        let r = bfs(&task);
        assert_eq!(
            r.plan.as_ref().map(|p| p.len()),
            oracle_distance(&task),
            "seed {seed}"
        );
        if let Some(p) = r.plan {
            assert!(replay(&task, &p), "seed {seed}");
        }
    }
}

#[test]
fn hff_matches_layer_oracle() {
    for seed in 0..100 {
        let task = random_task(1000 + seed);
        let engine = Engine::new(&task);
        for state in all_states(&task).into_iter().take(40) {
            assert_eq!(
                engine.h_ff(&state),
                oracle_hff(&task, &state),
                "seed {seed} state {state:?}"
            );
        }
    }
}

#[test]
fn hff_is_zero_only_at_goal_and_infinite_only_when_unreachable() {
    for seed in 0..60 {
        let task = random_task(5000 + seed);
        let engine = Engine::new(&task);
        let mut goal_state = task.init.clone();
        goal_state[task.goal_var] = GOAL_TRUE;
        assert_eq!(engine.h_ff(&goal_state), Some(0));
        for state in all_states(&task) {
            let h = engine.h_ff(&state);
            assert_ne!(h, Some(0), "non-goal state with zero estimate");
            if h.is_none() {
                let mut t = task.clone();
                t.init = state.clone();
                assert!(bfs(&t).plan.is_none(), "seed {seed}");
            }
        }
    }
}

#[test]
fn greedy_search_is_complete_on_finite_tasks() {
    for seed in 0..100 {
        let task = random_task(seed);
        for w in [0.0, 1.0, 5.0] {
            let r = lazy_greedy(&task, w);
            assert_eq!(
                r.plan.is_some(),
                oracle_distance(&task).is_some(),
                "seed {seed} w {w}"
            );
            if let Some(p) = r.plan {
                assert!(replay(&task, &p));
            }
        }
    }
}

#[test]
fn axiom_closure_does_not_depend_on_order() {
    for seed in 0..50 {
        let task = random_task(seed);
        let engine = Engine::new(&task);
        let fwd: Vec<usize> = (0..task.axioms.len()).collect();
        let rev: Vec<usize> = fwd.iter().rev().copied().collect();
        for s in all_states(&task) {
            let a = axiom_closure(&task, &s, &fwd);
            assert_eq!(a, axiom_closure(&task, &s, &rev));
            assert_eq!(a, engine.derived(&s));
        }
    }
}

fn action(
    name: &str,
    pre: Vec<(usize, u32)>,
    eff: Vec<(usize, u32)>,
    cost: u32,
    goal: bool,
) -> GroundAction {
    GroundAction {
        name: name.into(),
        clause: if goal { None } else { Some(0) },
        binding: vec![],
        pre,
        derived_pre: vec![],
        eff,
        cost,
        controls: vec![],
    }
}

/// Two routes to the goal: one long and free, one short and expensive.
fn two_route_task() -> GroundedTask {
    let mut x = VarDomain::new("x");
    for i in 0..4 {
        x.intern(&Value::sym(&format!("s{i}")));
    }
    let mut g = VarDomain::new("goal");
    g.intern(&Value::Bool(false));
    g.intern(&Value::Bool(true));
    GroundedTask {
        vars: vec![x, g],
        goal_var: 1,
        init: vec![0, 0],
        actions: vec![
            action("lazy", vec![(0, 0)], vec![(0, 3)], 3, false),
            action("step1", vec![(0, 0)], vec![(0, 1)], 0, false),
            action("step2", vec![(0, 1)], vec![(0, 2)], 0, false),
            action("step3", vec![(0, 2)], vec![(0, 3)], 0, false),
            action("goal", vec![(0, 3)], vec![(1, GOAL_TRUE)], 0, true),
        ],
        ..Default::default()
    }
}

#[test]
fn cost_weight_steers_away_from_placeholders() {
    let task = two_route_task();
    let names = |p: Vec<usize>| {
        p.iter()
            .map(|a| task.actions[*a].name.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(names(bfs(&task).plan.unwrap()), ["lazy", "goal"]);
    assert_eq!(
        names(lazy_greedy(&task, 0.0).plan.unwrap()),
        ["lazy", "goal"]
    );
    assert_eq!(
        names(lazy_greedy(&task, 10.0).plan.unwrap()),
        ["step1", "step2", "step3", "goal"]
    );
}

#[test]
fn goal_at_root_and_one_step_estimates() {
    let mut task = two_route_task();
    task.init = vec![3, 0];
    let engine = Engine::new(&task);
    assert_eq!(engine.h_ff(&task.init), Some(1));
    assert_eq!(bfs(&task).plan.unwrap().len(), 1);
    task.init = vec![3, GOAL_TRUE];
    assert_eq!(bfs(&task).plan.unwrap().len(), 0);
}

#[test]
fn hff_on_line_scene_matches_oracle() {
    let bundle = ProblemSpec::Manip(scenes::line_pick_place())
        .build()
        .unwrap();
    let schema = Arc::new(Schema::new(&bundle.problem).unwrap());
    let mut store = ElementStore::new(schema);
    for e in &bundle.problem.initial_elements {
        store.insert(e.clone(), None);
    }
    // enumerate every finite sampler once to get a small concrete task
    let mut table = fts_core::samplers::InstanceTable::new(
        bundle.samplers.clone(),
        store.schema(),
        &bundle.problem,
        3,
    )
    .unwrap();
    for _ in 0..3 {
        for id in table.instantiate_all(&store) {
            if !table.get(id).exhausted {
                let els = table.sample(id);
                store.extend(els.into_iter().map(|e| (e, Some(id))));
            }
        }
    }
    let task = ground(&bundle.problem, &store, GroundingOptions::default());
    let engine = Engine::new(&task);
    assert_eq!(engine.h_ff(&task.init), oracle_hff(&task, &task.init));
    assert!(engine.h_ff(&task.init).is_some());
}
