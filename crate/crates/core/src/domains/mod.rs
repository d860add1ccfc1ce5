//! Concrete problems: motion planning, pick-and-place with a translating
//! robot (two formulations), and benchmark generators.
//!
//! Every domain is described by a serializable spec; `build` turns a spec
//! into a problem plus its samplers.

pub mod bench;
pub mod manip;
pub mod motion;
pub mod pickplace;
pub mod scenes;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::FtsError;
use crate::geometry::{inside_box, Body, Shape, DEFAULT_RESOLUTION};
use crate::model::Predicate;
use crate::planners::Bundle;
use crate::samplers::{Draw, DrawContext, Enumerate, Generator};
use crate::value::Value;

pub use bench::{generate_benchmark, BenchmarkSpec, Experiment};
pub use manip::build_manip_problem;
pub use motion::{build_motion_problem, MotionSpec};
pub use pickplace::build_pickplace_problem;

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

/// Axis-aligned region on which an object may rest (its center stays inside).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surface {
    pub name: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub radius: f64,
    pub pose: Vec<f64>,
    /// Names of the surfaces the object can be placed on.
    pub surfaces: Vec<String>,
    /// Offsets from the robot to the held object; defaults to side grasps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasps: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    /// Object must end with its center inside the region.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub regions: BTreeMap<String, Region>,
    /// Object must end exactly at the pose.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub poses: BTreeMap<String, Vec<f64>>,
    /// Robot must end at this configuration (ignored when the robot
    /// always returns home).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conf: Option<Vec<f64>>,
}

/// A pick-and-place scene with a translating robot and disc objects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickPlaceSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub robot: Shape,
    /// Initial robot configuration (the home configuration for the
    /// manipulation-trajectory formulation).
    pub start: Vec<f64>,
    #[serde(default)]
    pub obstacles: Vec<Body>,
    pub surfaces: Vec<Surface>,
    pub objects: Vec<ObjectSpec>,
    pub goal: GoalSpec,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

impl PickPlaceSpec {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn object(&self, name: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn validate(&self) -> Result<(), FtsError> {
        let d = self.dim();
        let bad = |m: String| Err(FtsError::InvalidSpec(m));
        if !(1..=2).contains(&d) || self.hi.len() != d || self.start.len() != d {
            return bad("workspace must be 1D or 2D with matching bounds and start".into());
        }
        if self.resolution <= 0.0 {
            return bad("resolution must be positive".into());
        }
        if self.objects.is_empty() {
            return bad("at least one object is required".into());
        }
        let mut names = std::collections::HashSet::new();
        for o in &self.objects {
            if !names.insert(&o.name) {
                return bad(format!("duplicate object {}", o.name));
            }
            if o.radius <= 0.0 || o.pose.len() != d {
                return bad(format!("object {} has a bad radius or pose", o.name));
            }
            for s in &o.surfaces {
                if !self.surfaces.iter().any(|x| &x.name == s) {
                    return bad(format!("object {} refers to unknown surface {s}", o.name));
                }
            }
            if o.grasps
                .as_ref()
                .is_some_and(|g| g.is_empty() || g.iter().any(|v| v.len() != d))
            {
                return bad(format!("object {} has malformed grasps", o.name));
            }
        }
        for k in self.goal.regions.keys().chain(self.goal.poses.keys()) {
            if self.object(k).is_none() {
                return bad(format!("goal mentions unknown object {k}"));
            }
        }
        Ok(())
    }

    /// Grasp offsets of an object: explicit, or one per side of the robot
    /// with a small clearance.
    pub fn grasps(&self, o: &ObjectSpec) -> Vec<Vec<f64>> {
        if let Some(g) = &o.grasps {
            return g.clone();
        }
        let mut out = Vec::new();
        for axis in 0..self.dim() {
            let reach = self.robot.extent(axis) + o.radius + 1e-3;
            for sign in [1.0, -1.0] {
                let mut g = vec![0.0; self.dim()];
                g[axis] = sign * reach;
                out.push(g);
            }
        }
        out
    }

    pub fn surface_boxes(&self, o: &ObjectSpec) -> Vec<(Vec<f64>, Vec<f64>)> {
        o.surfaces
            .iter()
            .filter_map(|s| self.surfaces.iter().find(|x| &x.name == s))
            .map(|s| (s.lo.clone(), s.hi.clone()))
            .collect()
    }

    pub fn in_bounds(&self, q: &[f64]) -> bool {
        inside_box(q, &self.lo, &self.hi)
    }

    pub fn disc(&self, o: &ObjectSpec, center: &[f64]) -> Body {
        Body::new(Shape::Disc { radius: o.radius }, center.to_vec())
    }
}

pub(crate) fn pred(f: impl Fn(&[Value]) -> bool + Send + Sync + 'static) -> Predicate {
    Arc::new(f)
}

/// Grasp configuration `p - g`, computed identically everywhere.
pub fn grasp_conf(p: &[f64], g: &[f64]) -> Vec<f64> {
    p.iter().zip(g).map(|(p, g)| p - g).collect()
}

pub(crate) fn real(v: &Value) -> &[f64] {
    v.as_real().unwrap_or(&[])
}

/// Stable placement: inside one of the surfaces, or the initial pose.
pub(crate) fn stable_check(spec: &PickPlaceSpec, o: &ObjectSpec) -> Predicate {
    let boxes = spec.surface_boxes(o);
    let initial = Value::real(o.pose.clone());
    pred(move |v| {
        v[0] == initial
            || v[0]
                .as_real()
                .is_some_and(|p| boxes.iter().any(|(lo, hi)| inside_box(p, lo, hi)))
    })
}

pub(crate) fn grasp_check(grasps: Vec<Vec<f64>>) -> Predicate {
    let set: Vec<Value> = grasps.into_iter().map(Value::real).collect();
    pred(move |v| set.contains(&v[0]))
}

pub(crate) fn region_test(region: Region) -> Predicate {
    pred(move |v| {
        v[0].as_real()
            .is_some_and(|p| inside_box(p, &region.lo, &region.hi))
    })
}

pub(crate) fn grasp_generator(grasps: Vec<Vec<f64>>) -> Box<dyn Generator> {
    Box::new(Enumerate::new(
        grasps.into_iter().map(|g| vec![Value::real(g)]).collect(),
    ))
}

/// Placement sampler: half of the draws uniform on a random surface, half
/// rejection-sampled to avoid the initial scene.
pub(crate) struct PoseGenerator {
    pub rng: ChaCha8Rng,
    pub boxes: Vec<(Vec<f64>, Vec<f64>)>,
    pub blockers: Vec<Body>,
    pub radius: f64,
}

impl PoseGenerator {
    fn uniform(&mut self) -> Vec<f64> {
        let (lo, hi) = &self.boxes[self.rng.gen_range(0..self.boxes.len())];
        lo.iter()
            .zip(hi)
            .map(|(l, h)| {
                if h > l {
                    self.rng.gen_range(*l..*h)
                } else {
                    *l
                }
            })
            .collect()
    }
}

impl Generator for PoseGenerator {
    fn next(&mut self, ctx: &DrawContext) -> Draw {
        if self.boxes.is_empty() {
            return Draw::Exhausted;
        }
        if self.rng.gen_bool(0.5) {
            return Draw::Output(vec![Value::real(self.uniform())]);
        }
        let shape = Shape::Disc {
            radius: self.radius,
        };
        for _ in 0..ctx.attempts {
            let p = self.uniform();
            if !self
                .blockers
                .iter()
                .any(|b| crate::geometry::overlaps(&shape, &p, &b.shape, &b.center))
            {
                return Draw::Output(vec![Value::real(p)]);
            }
        }
        Draw::Failed
    }
}

pub(crate) fn pose_generator(
    spec: &PickPlaceSpec,
    o: &ObjectSpec,
    rng: ChaCha8Rng,
) -> Box<dyn Generator> {
    let mut blockers: Vec<Body> = spec.obstacles.clone();
    blockers.extend(
        spec.objects
            .iter()
            .filter(|x| x.name != o.name)
            .map(|x| spec.disc(x, &x.pose)),
    );
    Box::new(PoseGenerator {
        rng,
        boxes: spec.surface_boxes(o),
        blockers,
        radius: o.radius,
    })
}

/// Problem description accepted by the command line and the browser demo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Motion(MotionSpec),
    /// Pick, place and move clauses with an explicit robot configuration.
    PickPlace(PickPlaceSpec),
    /// Pick and place clauses with manipulation trajectories from home.
    Manip(PickPlaceSpec),
    Benchmark(BenchmarkSpec),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Bundle, FtsError> {
        match self {
            ProblemSpec::Motion(s) => build_motion_problem(s),
            ProblemSpec::PickPlace(s) => build_pickplace_problem(s),
            ProblemSpec::Manip(s) => build_manip_problem(s),
            ProblemSpec::Benchmark(b) => build_manip_problem(&generate_benchmark(b)?),
        }
    }

    /// The scene behind a spec, generating benchmarks on the way.
    pub fn scene(&self) -> Result<Option<PickPlaceSpec>, FtsError> {
        Ok(match self {
            ProblemSpec::Motion(_) => None,
            ProblemSpec::PickPlace(s) | ProblemSpec::Manip(s) => Some(s.clone()),
            ProblemSpec::Benchmark(b) => Some(generate_benchmark(b)?),
        })
    }
}
