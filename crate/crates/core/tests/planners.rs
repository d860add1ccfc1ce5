use std::time::Instant;

use fts_core::domains::{scenes, ProblemSpec};
use fts_core::geometry::{segment_clear, Segment, DEFAULT_RESOLUTION};
use fts_core::io::RunReport;
use fts_core::model::validate_plan;
use fts_core::planners::{solve, Algorithm, Bundle, Outcome, PlannerConfig, RunResult};
use fts_core::search::SearchConfig;

const SEARCHES: [SearchConfig; 2] = [SearchConfig::Bfs, SearchConfig::Hff { weight: 1.0 }];
const ALGORITHMS: [Algorithm; 2] = [Algorithm::Incremental, Algorithm::Focused];

fn config(algorithm: Algorithm, search: SearchConfig, seed: u64) -> PlannerConfig {
    PlannerConfig {
        algorithm,
        search,
        seed,
        timeout_s: Some(60.0),
        ..Default::default()
    }
}

fn solved(bundle: &Bundle, config: &PlannerConfig) -> RunResult {
    let r = solve(bundle, config).unwrap();
    assert_eq!(r.outcome, Outcome::Solved, "{config:?}");
    let plan = r.plan.as_ref().unwrap();
    assert_eq!(validate_plan(&bundle.problem, plan).unwrap(), None);
    r
}

fn scene(name: &str) -> Bundle {
    scenes::named(name).unwrap().build().unwrap()
}

#[test]
fn focused_proves_unplaceable_goal_infeasible() {
    let bundle = scene("line-unplaceable");
    for search in SEARCHES {
        let start = Instant::now();
        let r = solve(&bundle, &config(Algorithm::Focused, search, 0)).unwrap();
        assert_eq!(r.outcome, Outcome::Infeasible);
        assert!(r.plan.is_none());
        assert!(start.elapsed().as_secs_f64() < 5.0);
    }
}

#[test]
fn explicit_configuration_scene_solves_everywhere() {
    let bundle = scene("line-mobile");
    for algorithm in ALGORITHMS {
        for search in SEARCHES {
            let r = solved(&bundle, &config(algorithm, search, 1));
            let skeleton = &r.plan.unwrap().skeleton.0;
            assert!(skeleton.iter().any(|c| c == "Pick-A"));
            assert!(skeleton.iter().any(|c| c == "Place-A"));
            assert_eq!(skeleton.last().map(String::as_str), Some("Move"));
        }
    }
}

#[test]
fn blocking_object_is_moved_first() {
    let bundle = scene("obstructed-pick");
    for algorithm in ALGORITHMS {
        for seed in 0..3 {
            let r = solved(
                &bundle,
                &config(algorithm, SearchConfig::Hff { weight: 1.0 }, seed),
            );
            let skeleton = r.plan.unwrap().skeleton.0;
            let first_b = skeleton.iter().position(|c| c == "Pick-B");
            let first_a = skeleton.iter().position(|c| c == "Pick-A");
            assert!(first_b.unwrap() < first_a.unwrap(), "{skeleton:?}");
        }
    }
}

#[test]
fn regrasp_scene_needs_two_picks() {
    let bundle = scene("regrasp");
    for algorithm in ALGORITHMS {
        let r = solved(
            &bundle,
            &config(algorithm, SearchConfig::Hff { weight: 1.0 }, 2),
        );
        let plan = r.plan.unwrap();
        let picks = plan
            .skeleton
            .0
            .iter()
            .filter(|c| c.starts_with("MPick"))
            .count();
        assert_eq!(picks, 2, "{:?}", plan.skeleton);
        if algorithm == Algorithm::Focused {
            assert!(r.stats.episodes >= 2);
        }
    }
}

#[test]
fn satisfied_goal_gives_empty_plan() {
    let mut spec = scenes::line_pick_place();
    spec.objects[0].pose = vec![2.0];
    let bundle = ProblemSpec::Manip(spec).build().unwrap();
    for algorithm in ALGORITHMS {
        let r = solved(&bundle, &config(algorithm, SearchConfig::Bfs, 0));
        assert!(r.plan.unwrap().is_empty());
        assert_eq!(r.stats.total_sampler_calls(), 0);
    }
}

#[test]
fn identical_runs_give_identical_reports() {
    let bundle = scene("obstructed-pick");
    for algorithm in ALGORITHMS {
        let c = config(algorithm, SearchConfig::Hff { weight: 1.0 }, 7);
        let a = RunReport::new(&solve(&bundle, &c).unwrap(), &c).to_json();
        let b = RunReport::new(&solve(&bundle, &c).unwrap(), &c).to_json();
        assert_eq!(a, b);
    }
}

#[test]
fn u_turn_needs_three_segments() {
    let spec = scenes::u_turn();
    let clear = |a: &[f64], b: &[f64]| {
        segment_clear(
            &Segment::new(a.to_vec(), b.to_vec()),
            &spec.robot,
            &spec.obstacles,
            DEFAULT_RESOLUTION,
        )
    };
    // oracle: no waypoint on a fine lattice connects start and goal in two legs
    assert!(!clear(&spec.start, &spec.goal));
    let steps = 100;
    for i in 0..=steps {
        for j in 0..=steps {
            let w = [
                spec.lo[0] + (spec.hi[0] - spec.lo[0]) * i as f64 / steps as f64,
                spec.lo[1] + (spec.hi[1] - spec.lo[1]) * j as f64 / steps as f64,
            ];
            assert!(!(clear(&spec.start, &w) && clear(&w, &spec.goal)), "{w:?}");
        }
    }
    let bundle = ProblemSpec::Motion(spec).build().unwrap();
    for algorithm in ALGORITHMS {
        let r = solved(
            &bundle,
            &config(algorithm, SearchConfig::Hff { weight: 1.0 }, 0),
        );
        assert!(r.plan.unwrap().len() >= 3);
    }
}

#[test]
fn incremental_samples_every_sampler() {
    // each round of the incremental planner draws from every ready instance
    let bundle = scene("line");
    let r = solve(
        &bundle,
        &config(Algorithm::Incremental, SearchConfig::Bfs, 0),
    )
    .unwrap();
    let names: std::collections::BTreeSet<&str> =
        r.stats.sampler_calls.keys().map(String::as_str).collect();
    for s in [
        "grasp-A", "grasp-B", "pose-A", "pose-B", "manip-A", "manip-B",
    ] {
        assert!(names.contains(s), "{s} never called: {names:?}");
    }
}
