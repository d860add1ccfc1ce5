//! Seeded benchmark scenes for the manipulation-trajectory formulation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GoalSpec, ObjectSpec, PickPlaceSpec, Region, Surface};
use crate::error::FtsError;
use crate::geometry::{Shape, DEFAULT_RESOLUTION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Move every block from a source grid to its own goal pose.
    TabletopGrid,
    /// One goal object plus distractors on a separate table.
    Distractors,
    /// One goal object surrounded by clutter.
    ClearTable,
}

impl Experiment {
    pub fn sizes(&self) -> std::ops::RangeInclusive<usize> {
        match self {
            Experiment::TabletopGrid => 1..=16,
            Experiment::Distractors => 0..=40,
            Experiment::ClearTable => 0..=20,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::TabletopGrid => "tabletop-grid",
            Experiment::Distractors => "distractors",
            Experiment::ClearTable => "clear-table",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = FtsError;
    fn from_str(s: &str) -> Result<Self, FtsError> {
        match s {
            "tabletop-grid" => Ok(Experiment::TabletopGrid),
            "distractors" => Ok(Experiment::Distractors),
            "clear-table" => Ok(Experiment::ClearTable),
            _ => Err(FtsError::InvalidSpec(format!("unknown experiment {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub experiment: Experiment,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

pub const OBJECT_RADIUS: f64 = 0.2;
pub const ROBOT_HALF: f64 = 0.2;
const HOME: [f64; 2] = [0.0, -5.0];

fn surface(name: &str, lo: [f64; 2], hi: [f64; 2]) -> Surface {
    Surface {
        name: name.into(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
    }
}

fn object(name: &str, pose: Vec<f64>, surfaces: &[&str]) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        radius: OBJECT_RADIUS,
        pose,
        surfaces: surfaces.iter().map(|s| s.to_string()).collect(),
        grasps: None,
    }
}

fn base(surfaces: Vec<Surface>, objects: Vec<ObjectSpec>, goal: GoalSpec) -> PickPlaceSpec {
    PickPlaceSpec {
        lo: vec![-6.0, -6.0],
        hi: vec![6.0, 6.0],
        robot: Shape::square(ROBOT_HALF, 2),
        start: HOME.to_vec(),
        obstacles: Vec::new(),
        surfaces,
        objects,
        goal,
        resolution: DEFAULT_RESOLUTION,
    }
}

/// Rejection-sample `n` centers in a box keeping `gap` between centers.
fn scatter(
    rng: &mut ChaCha8Rng,
    n: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    gap: f64,
    taken: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, FtsError> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        if tries > 100_000 {
            return Err(FtsError::InvalidSpec("could not place all objects".into()));
        }
        let p = vec![rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        let far = |q: &Vec<f64>| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() >= gap;
        if out.iter().all(far) && taken.iter().all(far) {
            out.push(p);
        }
    }
    Ok(out)
}

fn grid(n: usize, origin: [f64; 2], spacing: f64) -> Vec<Vec<f64>> {
    let cols = (n as f64).sqrt().ceil() as usize;
    (0..n)
        .map(|i| {
            vec![
                origin[0] + spacing * (i % cols) as f64,
                origin[1] + spacing * (i / cols) as f64,
            ]
        })
        .collect()
}

pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<PickPlaceSpec, FtsError> {
    if !spec.experiment.sizes().contains(&spec.size) {
        return Err(FtsError::InvalidSpec(format!(
            "size {} outside {:?} for {}",
            spec.size,
            spec.experiment.sizes(),
            spec.experiment.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed ^ (spec.experiment as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );
    let gap = 4.0 * OBJECT_RADIUS;
    match spec.experiment {
        Experiment::TabletopGrid => {
            let n = spec.size;
            let mut slots = grid(n, [-4.5, 0.5], 1.2);
            // shuffle which block starts in which slot
            for i in (1..slots.len()).rev() {
                slots.swap(i, rng.gen_range(0..=i));
            }
            let goals = grid(n, [1.5, 0.5], 1.2);
            let surfaces = vec![
                surface("source", [-5.0, 0.0], [-0.5, 5.0]),
                surface("target", [1.0, 0.0], [5.5, 5.0]),
            ];
            let mut objects = Vec::new();
            let mut poses = BTreeMap::new();
            for i in 0..n {
                let name = format!("b{i}");
                objects.push(object(&name, slots[i].clone(), &["source", "target"]));
                poses.insert(name, goals[i].clone());
            }
            Ok(base(
                surfaces,
                objects,
                GoalSpec {
                    poses,
                    ..Default::default()
                },
            ))
        }
        Experiment::Distractors => {
            let surfaces = vec![
                surface("left", [-5.0, 0.0], [-1.0, 3.0]),
                surface("goal", [-5.0, -3.0], [-1.0, -1.5]),
                surface("right", [1.2, -5.5], [5.5, 5.5]),
            ];
            let mut objects = vec![object(
                "green",
                vec![rng.gen_range(-4.5..-1.5), rng.gen_range(0.5..2.5)],
                &["left", "goal"],
            )];
            for (i, p) in scatter(&mut rng, spec.size, [1.2, -5.5], [5.5, 5.5], gap, &[])?
                .into_iter()
                .enumerate()
            {
                objects.push(object(&format!("red{i}"), p, &["right"]));
            }
            let mut regions = BTreeMap::new();
            regions.insert(
                "green".to_string(),
                Region {
                    lo: vec![-5.0, -3.0],
                    hi: vec![-1.0, -1.5],
                },
            );
            Ok(base(
                surfaces,
                objects,
                GoalSpec {
                    regions,
                    ..Default::default()
                },
            ))
        }
        Experiment::ClearTable => {
            let surfaces = vec![
                surface("table", [-2.5, 0.0], [2.5, 4.0]),
                surface("side", [3.5, -4.0], [5.5, 4.0]),
                surface("goal", [-5.5, -4.0], [-3.5, -2.0]),
            ];
            let center = vec![0.0, 2.0];
            let mut objects = vec![object("goal", center.clone(), &["table", "goal"])];
            for (i, p) in scatter(&mut rng, spec.size, [-2.5, 0.0], [2.5, 4.0], gap, &[center])?
                .into_iter()
                .enumerate()
            {
                objects.push(object(&format!("clutter{i}"), p, &["table", "side"]));
            }
            let mut regions = BTreeMap::new();
            regions.insert(
                "goal".to_string(),
                Region {
                    lo: vec![-5.5, -4.0],
                    hi: vec![-3.5, -2.0],
                },
            );
            Ok(base(
                surfaces,
                objects,
                GoalSpec {
                    regions,
                    ..Default::default()
                },
            ))
        }
    }
}
