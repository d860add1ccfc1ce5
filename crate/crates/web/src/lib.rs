//! Browser bindings: solve a scene, probe segment collisions and replay the
//! one-dimensional pick-and-place trace. Every export takes and returns
//! JSON text so the page needs no generated type glue.

use fts_core::domains::bench::{BenchmarkSpec, Experiment};
use fts_core::domains::{scenes, ProblemSpec};
use fts_core::error::FtsError;
use fts_core::geometry::{overlaps, Body, Segment, DEFAULT_RESOLUTION};
use fts_core::io::RunReport;
use fts_core::planners::{solve, Algorithm, FocusedMode, PlannerConfig};
use fts_core::search::SearchConfig;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Iteration cap standing in for a time budget, which the browser build
/// does not enforce.
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    /// A built-in scene name or `distractors-N`.
    pub scene: String,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub bfs: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Serialize)]
pub struct SolveResponse {
    pub problem: ProblemSpec,
    pub report: RunReport,
}

fn scene_spec(name: &str) -> Result<ProblemSpec, FtsError> {
    if let Some(n) = name.strip_prefix("distractors-") {
        let size = n
            .parse()
            .map_err(|_| FtsError::InvalidSpec(format!("bad size in {name}")))?;
        let spec = BenchmarkSpec {
            experiment: Experiment::Distractors,
            size,
            seed: 0,
        };
        return Ok(ProblemSpec::Manip(
            fts_core::domains::bench::generate_benchmark(&spec)?,
        ));
    }
    scenes::named(name).ok_or_else(|| FtsError::InvalidSpec(format!("unknown scene {name}")))
}

pub fn solve_request(req: &SolveRequest) -> Result<SolveResponse, FtsError> {
    let problem = scene_spec(&req.scene)?;
    let config = PlannerConfig {
        algorithm: req.algorithm,
        search: if req.bfs {
            SearchConfig::Bfs
        } else {
            SearchConfig::default()
        },
        seed: req.seed,
        max_iterations: Some(MAX_ITERATIONS),
        ..Default::default()
    };
    let result = solve(&problem.build()?, &config)?;
    Ok(SolveResponse {
        report: RunReport::new(&result, &config),
        problem,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeRequest {
    pub scene: String,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

#[derive(Debug, PartialEq, Serialize)]
pub struct ProbeResponse {
    /// Obstacle indices the swept robot overlaps.
    pub obstacles: Vec<usize>,
    /// Names of objects, at their initial poses, the swept robot overlaps.
    pub objects: Vec<String>,
    /// Fraction along the segment of the first colliding grid point.
    pub first_hit: Option<f64>,
}

/// Sweep the scene's robot along a segment against everything in the scene.
pub fn probe(req: &ProbeRequest) -> Result<ProbeResponse, FtsError> {
    let (dim, robot, obstacles, objects) = match scene_spec(&req.scene)? {
        ProblemSpec::Motion(m) => (m.lo.len(), m.robot, m.obstacles, Vec::new()),
        spec => {
            let s = spec.scene()?.expect("pick-and-place scene");
            let objects: Vec<(String, Body)> = s
                .objects
                .iter()
                .map(|o| (o.name.clone(), s.disc(o, &o.pose)))
                .collect();
            (s.dim(), s.robot, s.obstacles, objects)
        }
    };
    if req.start.len() != dim || req.end.len() != dim {
        return Err(FtsError::InvalidSpec(
            "endpoint dimension does not match the scene".into(),
        ));
    }
    let seg = Segment::new(req.start.clone(), req.end.clone());
    let n = fts_core::geometry::grid_steps(DEFAULT_RESOLUTION);
    let mut out = ProbeResponse {
        obstacles: Vec::new(),
        objects: Vec::new(),
        first_hit: None,
    };
    for i in 0..=n {
        let p = seg.grid_point(i, n);
        let mut hit = false;
        for (k, o) in obstacles.iter().enumerate() {
            if overlaps(&robot, &p, &o.shape, &o.center) {
                hit = true;
                if !out.obstacles.contains(&k) {
                    out.obstacles.push(k);
                }
            }
        }
        for (name, body) in &objects {
            if overlaps(&robot, &p, &body.shape, &body.center) {
                hit = true;
                if !out.objects.contains(name) {
                    out.objects.push(name.clone());
                }
            }
        }
        if hit && out.first_hit.is_none() {
            out.first_hit = Some(i as f64 / n as f64);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct TraceIteration {
    pub iteration: usize,
    pub skeleton: Option<Vec<String>>,
    pub calls: Vec<String>,
}

/// Per-iteration sampler calls of one planner on the 1D line scene.
pub fn line_trace(algorithm: Algorithm, seed: u64) -> Result<Vec<TraceIteration>, FtsError> {
    let bundle = ProblemSpec::Manip(scenes::line_pick_place()).build()?;
    let config = PlannerConfig {
        algorithm,
        seed,
        search: SearchConfig::Bfs,
        focused_mode: FocusedMode::Trace,
        max_iterations: Some(MAX_ITERATIONS),
        ..Default::default()
    };
    let result = solve(&bundle, &config)?;
    Ok(result
        .stats
        .records
        .iter()
        .map(|r| TraceIteration {
            iteration: r.iteration,
            skeleton: r.skeleton.clone(),
            calls: r
                .sampled
                .iter()
                .map(|d| format!("{}({})", d.sampler, d.inputs.join(", ")))
                .collect(),
        })
        .collect())
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

#[wasm_bindgen(js_name = sceneNames)]
pub fn scene_names() -> String {
    let mut names: Vec<String> = scenes::NAMES.iter().map(|s| s.to_string()).collect();
    names.extend(["distractors-0", "distractors-10", "distractors-40"].map(String::from));
    serde_json::to_string(&names).expect("strings serialize")
}

#[wasm_bindgen(js_name = sceneProblem)]
pub fn scene_problem(name: &str) -> Result<String, JsError> {
    to_json(&scene_spec(name).map_err(js_err)?)
}

#[wasm_bindgen(js_name = solveScene)]
pub fn solve_scene(request: &str) -> Result<String, JsError> {
    let req: SolveRequest = serde_json::from_str(request).map_err(js_err)?;
    to_json(&solve_request(&req).map_err(js_err)?)
}

#[wasm_bindgen(js_name = probeSegment)]
pub fn probe_segment(request: &str) -> Result<String, JsError> {
    let req: ProbeRequest = serde_json::from_str(request).map_err(js_err)?;
    to_json(&probe(&req).map_err(js_err)?)
}

#[wasm_bindgen(js_name = lineTrace)]
pub fn line_trace_json(focused: bool, seed: u32) -> Result<String, JsError> {
    let algorithm = if focused {
        Algorithm::Focused
    } else {
        Algorithm::Incremental
    };
    to_json(&line_trace(algorithm, seed as u64).map_err(js_err)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_named_scenes() {
        for scene in ["line", "obstructed-pick", "u-turn", "distractors-10"] {
            let req = SolveRequest {
                scene: scene.into(),
                algorithm: Algorithm::Focused,
                bfs: false,
                seed: 1,
            };
            let out = solve_request(&req).unwrap();
            assert!(out.report.plan.is_some(), "{scene}");
        }
        let req = SolveRequest {
            scene: "nope".into(),
            algorithm: Algorithm::Focused,
            bfs: false,
            seed: 0,
        };
        assert!(solve_request(&req).is_err());
    }

    #[test]
    fn probe_reports_what_the_sweep_touches() {
        let req = ProbeRequest {
            scene: "obstructed-pick".into(),
            start: vec![-3.0, -2.0],
            end: vec![1.5, 0.0],
        };
        let out = probe(&req).unwrap();
        assert_eq!(out.objects, ["B"]);
        assert!(out.obstacles.is_empty());
        assert!(out.first_hit.unwrap() > 0.5);

        let clear = ProbeRequest {
            scene: "u-turn".into(),
            start: vec![-4.0, -4.0],
            end: vec![4.0, -4.0],
        };
        assert_eq!(
            probe(&clear).unwrap(),
            ProbeResponse {
                obstacles: vec![],
                objects: vec![],
                first_hit: None
            }
        );

        let bad = ProbeRequest {
            scene: "line".into(),
            start: vec![0.0, 0.0],
            end: vec![1.0],
        };
        assert!(probe(&bad).is_err());
    }

    #[test]
    fn focused_trace_never_touches_b() {
        let iters = line_trace(Algorithm::Focused, 0).unwrap();
        assert_eq!(iters.len(), 3);
        assert!(iters
            .iter()
            .flat_map(|i| &i.calls)
            .all(|c| !c.contains("-B")));
        assert!(iters[2].skeleton.is_some());
    }

    #[test]
    fn json_exports_round_trip() {
        let names: Vec<String> = serde_json::from_str(&scene_names()).unwrap();
        assert!(names.contains(&"regrasp".to_string()));
        let out =
            solve_scene(r#"{"scene": "line", "algorithm": "incremental", "seed": 2}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["report"]["outcome"], "solved");
        assert_eq!(v["problem"]["domain"], "manip");
    }
}
