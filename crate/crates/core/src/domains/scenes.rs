//! Small hand-built scenes used by tests, the command line and the demo.

use std::collections::BTreeMap;

use super::{GoalSpec, MotionSpec, ObjectSpec, PickPlaceSpec, ProblemSpec, Region, Surface};
use crate::geometry::{Body, Shape, DEFAULT_RESOLUTION};

fn surface(name: &str, lo: &[f64], hi: &[f64]) -> Surface {
    Surface {
        name: name.into(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    }
}

fn object(name: &str, radius: f64, pose: &[f64], surfaces: &[&str]) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        radius,
        pose: pose.to_vec(),
        surfaces: surfaces.iter().map(|s| s.to_string()).collect(),
        grasps: None,
    }
}

/// Axis-aligned wall spanning `lo..hi`.
pub fn wall(lo: &[f64], hi: &[f64]) -> Body {
    let center = lo.iter().zip(hi).map(|(l, h)| (l + h) / 2.0).collect();
    let half = lo.iter().zip(hi).map(|(l, h)| (h - l) / 2.0).collect();
    Body::new(Shape::Box { half }, center)
}

fn region(lo: &[f64], hi: &[f64]) -> Region {
    Region {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    }
}

/// Two objects on a line: A rests on the far table and must reach the near
/// one, B sits beyond A. The robot always returns home at 0.
pub fn line_pick_place() -> PickPlaceSpec {
    let mut a = object("A", 0.25, &[7.0], &["T1"]);
    a.grasps = Some(vec![vec![0.5]]);
    let mut b = object("B", 0.25, &[9.0], &["T2"]);
    b.grasps = Some(vec![vec![0.5]]);
    let mut regions = BTreeMap::new();
    regions.insert("A".to_string(), region(&[1.0], &[4.0]));
    PickPlaceSpec {
        lo: vec![-1.0],
        hi: vec![11.0],
        robot: Shape::square(0.25, 1),
        start: vec![0.0],
        obstacles: Vec::new(),
        surfaces: vec![
            surface("T1", &[1.0], &[4.0]),
            surface("T2", &[6.0], &[10.0]),
        ],
        objects: vec![a, b],
        goal: GoalSpec {
            regions,
            ..Default::default()
        },
        resolution: DEFAULT_RESOLUTION,
    }
}

/// The same line with default side grasps and a final robot configuration,
/// meant for the explicit-configuration formulation.
pub fn line_mobile() -> PickPlaceSpec {
    let mut spec = line_pick_place();
    for o in &mut spec.objects {
        o.grasps = None;
        o.surfaces = vec!["T1".into(), "T2".into()];
    }
    spec.goal.conf = Some(vec![0.0]);
    spec
}

/// Line scene where A has nowhere to be placed, so its goal is unreachable.
pub fn line_unplaceable() -> PickPlaceSpec {
    let mut spec = line_pick_place();
    spec.objects[0].surfaces.clear();
    spec
}

/// A sits in a pocket open to the left and B blocks the mouth, so B has to
/// be moved before A can be grasped.
pub fn obstructed_pick() -> PickPlaceSpec {
    let mut regions = BTreeMap::new();
    regions.insert("A".to_string(), region(&[-2.0, -0.3], &[-0.5, 0.3]));
    PickPlaceSpec {
        lo: vec![-4.0, -4.0],
        hi: vec![4.0, 4.0],
        robot: Shape::square(0.2, 2),
        start: vec![-3.0, -2.0],
        obstacles: vec![
            wall(&[1.4, 0.45], &[2.75, 0.75]),
            wall(&[1.4, -0.75], &[2.75, -0.45]),
            wall(&[2.45, -0.75], &[2.75, 0.75]),
        ],
        surfaces: vec![
            surface("lane", &[-2.0, -0.3], &[-0.5, 0.3]),
            surface("side", &[-3.0, 2.0], &[-1.0, 3.0]),
        ],
        objects: vec![
            object("A", 0.2, &[2.0, 0.0], &["lane"]),
            object("B", 0.2, &[1.0, 0.0], &["side"]),
        ],
        goal: GoalSpec {
            regions,
            ..Default::default()
        },
        resolution: DEFAULT_RESOLUTION,
    }
}

/// A starts in a pocket reachable only from the left and must end in a slot
/// reachable only from below, which takes two different grasps.
pub fn regrasp() -> PickPlaceSpec {
    let mut regions = BTreeMap::new();
    regions.insert("A".to_string(), region(&[2.9, 1.9], &[3.1, 2.1]));
    PickPlaceSpec {
        lo: vec![-6.0, -6.0],
        hi: vec![6.0, 6.0],
        robot: Shape::square(0.2, 2),
        start: vec![0.0, -5.0],
        obstacles: vec![
            // pocket around the start pose
            wall(&[-3.6, 2.45], &[-2.2, 2.75]),
            wall(&[-3.6, 1.25], &[-2.2, 1.55]),
            wall(&[-2.5, 1.25], &[-2.2, 2.75]),
            // slot around the goal
            wall(&[2.25, 1.2], &[2.55, 2.8]),
            wall(&[3.45, 1.2], &[3.75, 2.8]),
            wall(&[2.25, 2.5], &[3.75, 2.8]),
        ],
        surfaces: vec![
            surface("staging", &[-1.5, 0.0], &[1.5, 2.0]),
            surface("slot", &[2.9, 1.9], &[3.1, 2.1]),
        ],
        objects: vec![object("A", 0.2, &[-3.0, 2.0], &["staging", "slot"])],
        goal: GoalSpec {
            regions,
            ..Default::default()
        },
        resolution: DEFAULT_RESOLUTION,
    }
}

/// Motion problem around a U-shaped obstacle opening away from the start.
pub fn u_turn() -> MotionSpec {
    MotionSpec {
        lo: vec![-5.0, -5.0],
        hi: vec![5.0, 5.0],
        robot: Shape::square(0.2, 2),
        obstacles: vec![
            wall(&[-2.0, 1.5], &[2.0, 2.0]),
            wall(&[-2.0, -2.0], &[-1.5, 2.0]),
            wall(&[1.5, -2.0], &[2.0, 2.0]),
        ],
        start: vec![0.0, 0.0],
        goal: vec![0.0, 3.5],
        resolution: DEFAULT_RESOLUTION,
    }
}

pub const NAMES: [&str; 6] = [
    "line",
    "line-mobile",
    "line-unplaceable",
    "obstructed-pick",
    "regrasp",
    "u-turn",
];

/// Built-in scene by name, wrapped in the formulation it is meant for.
pub fn named(name: &str) -> Option<ProblemSpec> {
    Some(match name {
        "line" => ProblemSpec::Manip(line_pick_place()),
        "line-mobile" => ProblemSpec::PickPlace(line_mobile()),
        "line-unplaceable" => ProblemSpec::Manip(line_unplaceable()),
        "obstructed-pick" => ProblemSpec::PickPlace(obstructed_pick()),
        "regrasp" => ProblemSpec::Manip(regrasp()),
        "u-turn" => ProblemSpec::Motion(u_turn()),
        _ => return None,
    })
}
