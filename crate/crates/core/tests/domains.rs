use fts_core::domains::bench::{generate_benchmark, BenchmarkSpec, Experiment};
use fts_core::domains::{build_manip_problem, build_pickplace_problem, scenes, ProblemSpec};
use fts_core::io::{parse_problem, problem_json, RunReport};
use fts_core::model::validate_plan;
use fts_core::planners::{solve, Algorithm, Bundle, Outcome, PlannerConfig};
use fts_core::samplers::{ConditionalSampler, Draw, DrawContext};
use fts_core::search::SearchConfig;
use fts_core::value::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sampler<'a>(bundle: &'a Bundle, name: &str) -> &'a ConditionalSampler {
    bundle.samplers.iter().find(|s| s.name == name).unwrap()
}

fn draws(s: &ConditionalSampler, inputs: &[Value], seed: u64, n: usize) -> Vec<Vec<Value>> {
    let mut g = (s.factory)(inputs, ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::new();
    for draw in 0..n {
        match g.next(&DrawContext {
            draw,
            attempts: 10 * (draw + 1),
        }) {
            Draw::Output(v) => out.push(v),
            Draw::Failed => {}
            Draw::Exhausted => break,
        }
    }
    out
}

#[test]
fn ik_outputs_satisfy_kinematics_exactly() {
    let bundle = build_pickplace_problem(&scenes::obstructed_pick()).unwrap();
    let kin = &bundle.problem.system.relations["Kin-A"];
    let ik = sampler(&bundle, "ik-A");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut emitted = 0;
    for _ in 0..2000 {
        let p = vec![rng.gen_range(-3.5..3.5), rng.gen_range(-3.5..3.5)];
        let g = vec![rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
        let (pv, gv) = (Value::real(p.clone()), Value::real(g.clone()));
        for out in draws(ik, &[pv.clone(), gv.clone()], 0, 3) {
            emitted += 1;
            let q = out[0].as_real().unwrap();
            let expect: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p - g).collect();
            assert_eq!(q, expect.as_slice());
            assert_eq!(
                kin.holds(&[gv.clone(), pv.clone(), out[0].clone()]),
                Some(true)
            );
        }
    }
    assert!(emitted > 1000);
}

#[test]
fn poses_cover_every_part_of_every_surface() {
    let spec = scenes::line_mobile();
    let bundle = build_pickplace_problem(&spec).unwrap();
    let stable = &bundle.problem.system.relations["Stable-A"];
    let poses: Vec<f64> = draws(sampler(&bundle, "pose-A"), &[], 11, 10_000)
        .into_iter()
        .map(|v| {
            assert_eq!(stable.holds(&v), Some(true));
            v[0].as_real().unwrap()[0]
        })
        .collect();
    assert!(poses.len() > 9_000);
    for s in &spec.surfaces {
        let (lo, hi) = (s.lo[0], s.hi[0]);
        for k in 0..10 {
            // open tenth of the surface
            let (a, b) = (
                lo + (hi - lo) * k as f64 / 10.0,
                lo + (hi - lo) * (k + 1) as f64 / 10.0,
            );
            assert!(
                poses.iter().any(|&x| a < x && x < b),
                "{} [{a}, {b}]",
                s.name
            );
        }
    }
}

#[test]
fn distractor_benchmark_shapes() {
    let single = generate_benchmark(&BenchmarkSpec {
        experiment: Experiment::Distractors,
        size: 0,
        seed: 3,
    })
    .unwrap();
    assert_eq!(single.objects.len(), 1);
    assert_eq!(single.objects[0].name, "green");
    let crowded = generate_benchmark(&BenchmarkSpec {
        experiment: Experiment::Distractors,
        size: 40,
        seed: 3,
    })
    .unwrap();
    assert_eq!(crowded.objects.len(), 41);
    assert_eq!(crowded.goal.regions.keys().collect::<Vec<_>>(), ["green"]);
    assert!(crowded.goal.poses.is_empty());
    // the goal object does not depend on how many distractors there are
    assert_eq!(crowded.objects[0], single.objects[0]);
    assert!(generate_benchmark(&BenchmarkSpec {
        experiment: Experiment::Distractors,
        size: 41,
        seed: 0
    })
    .is_err());
}

#[test]
fn tabletop_grid_of_eight_is_solved() {
    let spec = generate_benchmark(&BenchmarkSpec {
        experiment: Experiment::TabletopGrid,
        size: 8,
        seed: 0,
    })
    .unwrap();
    assert_eq!(spec.objects.len(), 8);
    let bundle = build_manip_problem(&spec).unwrap();
    let config = PlannerConfig {
        algorithm: Algorithm::Focused,
        timeout_s: Some(120.0),
        ..Default::default()
    };
    let r = solve(&bundle, &config).unwrap();
    assert_eq!(r.outcome, Outcome::Solved);
    let plan = r.plan.unwrap();
    assert_eq!(validate_plan(&bundle.problem, &plan).unwrap(), None);
    let last = plan.states.last().unwrap();
    for (i, o) in spec.objects.iter().enumerate() {
        assert_eq!(
            last[i].as_real().unwrap(),
            spec.goal.poses[&o.name].as_slice()
        );
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    for experiment in [
        Experiment::TabletopGrid,
        Experiment::Distractors,
        Experiment::ClearTable,
    ] {
        let spec = |seed| BenchmarkSpec {
            experiment,
            size: 6,
            seed,
        };
        assert_eq!(
            generate_benchmark(&spec(4)).unwrap(),
            generate_benchmark(&spec(4)).unwrap()
        );
        if experiment != Experiment::ClearTable {
            assert_ne!(
                generate_benchmark(&spec(4)).unwrap(),
                generate_benchmark(&spec(5)).unwrap()
            );
        }
    }
}

#[test]
fn benchmarks_round_trip_through_json() {
    for experiment in [
        Experiment::TabletopGrid,
        Experiment::Distractors,
        Experiment::ClearTable,
    ] {
        for seed in 0..3 {
            let generated = generate_benchmark(&BenchmarkSpec {
                experiment,
                size: 3,
                seed,
            })
            .unwrap();
            let spec = ProblemSpec::Manip(generated);
            let back = parse_problem(&problem_json(&spec)).unwrap();
            assert_eq!(back, spec);
            let config = PlannerConfig {
                search: SearchConfig::Hff { weight: 1.0 },
                seed,
                ..Default::default()
            };
            let a = solve(&spec.build().unwrap(), &config).unwrap();
            let b = solve(&back.build().unwrap(), &config).unwrap();
            assert_eq!(
                RunReport::new(&a, &config).to_json(),
                RunReport::new(&b, &config).to_json()
            );
        }
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let json = problem_json(&ProblemSpec::Manip(scenes::line_pick_place()));
    let tampered = json.replacen("\"lo\"", "\"bogus\": 1, \"lo\"", 1);
    assert!(parse_problem(&tampered).is_err());
}
