//! Single-clause motion planning for a translating robot.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{default_resolution, pred, real};
use crate::error::FtsError;
use crate::geometry::{inside_box, legs, overlaps, segment_clear, Body, Segment, Shape};
use crate::model::{
    Clause, Constraint, Element, ParameterIndex as P, Problem, Relation, TransitionSystem,
    ValueType, Variable, VariableDomain,
};
use crate::planners::Bundle;
use crate::samplers::{Certified, ConditionalSampler, Draw, Enumerate, FnGenerator, Slot};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub robot: Shape,
    #[serde(default)]
    pub obstacles: Vec<Body>,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

/// Configurations inside the bounds where the robot touches no obstacle.
pub(crate) fn conf_check(
    lo: Vec<f64>,
    hi: Vec<f64>,
    robot: Shape,
    obstacles: Vec<Body>,
) -> crate::model::Predicate {
    pred(move |v| {
        let q = real(&v[0]);
        q.len() == lo.len()
            && inside_box(q, &lo, &hi)
            && !obstacles
                .iter()
                .any(|o| overlaps(&robot, q, &o.shape, &o.center))
    })
}

/// `t` is the straight segment from `q` to `q'`.
pub(crate) fn motion_check() -> crate::model::Predicate {
    pred(|v| match v[1].as_traj() {
        Some([a, b]) => {
            v[0].as_real() == Some(a.as_slice()) && v[2].as_real() == Some(b.as_slice())
        }
        _ => false,
    })
}

pub(crate) fn traj_clear(robot: Shape, obstacles: Vec<Body>, eps: f64) -> crate::model::Predicate {
    pred(move |v| {
        v[0].as_traj().is_some_and(|pts| {
            legs(pts).all(|s: Segment| segment_clear(&s, &robot, &obstacles, eps))
        })
    })
}

/// Uniform collision-free configuration sampler.
pub(crate) fn conf_sampler(
    lo: Vec<f64>,
    hi: Vec<f64>,
    robot: Shape,
    obstacles: Vec<Body>,
) -> ConditionalSampler {
    ConditionalSampler::new(
        "conf",
        &[],
        1,
        vec![Certified::new("Conf", &[Slot::Out(0)])],
        Arc::new(move |_, mut rng| {
            let (lo, hi, robot, obstacles) =
                (lo.clone(), hi.clone(), robot.clone(), obstacles.clone());
            Box::new(FnGenerator(move |ctx: &crate::samplers::DrawContext| {
                for _ in 0..ctx.attempts {
                    let q: Vec<f64> = lo
                        .iter()
                        .zip(&hi)
                        .map(|(l, h)| rng.gen_range(*l..=*h))
                        .collect();
                    if !obstacles
                        .iter()
                        .any(|o| overlaps(&robot, &q, &o.shape, &o.center))
                    {
                        return Draw::Output(vec![Value::real(q)]);
                    }
                }
                Draw::Failed
            }))
        }),
    )
}

/// Straight-line trajectory between two distinct configurations.
pub(crate) fn traj_sampler() -> ConditionalSampler {
    ConditionalSampler::new(
        "traj",
        &["conf", "conf"],
        1,
        vec![Certified::new(
            "Motion",
            &[Slot::In(0), Slot::Out(0), Slot::In(1)],
        )],
        Arc::new(|inputs, _| {
            let t = Value::traj(vec![real(&inputs[0]).to_vec(), real(&inputs[1]).to_vec()]);
            Box::new(Enumerate::new(vec![vec![t]]))
        }),
    )
    .with_filter(pred(|v| v[0] != v[1]))
}

pub fn build_motion_problem(spec: &MotionSpec) -> Result<Bundle, FtsError> {
    let d = spec.lo.len();
    if !(1..=2).contains(&d) || spec.hi.len() != d || spec.start.len() != d || spec.goal.len() != d
    {
        return Err(FtsError::InvalidSpec(
            "motion problems are 1D or 2D with matching vectors".into(),
        ));
    }
    if spec.resolution <= 0.0 {
        return Err(FtsError::InvalidSpec("resolution must be positive".into()));
    }
    let mut sys = TransitionSystem {
        state_vars: vec![Variable::new(
            "q",
            VariableDomain::Box {
                lo: spec.lo.clone(),
                hi: spec.hi.clone(),
            },
        )],
        control_vars: vec![Variable::new("t", VariableDomain::Symbolic)],
        ..Default::default()
    };
    sys.add_relation(Relation::certified(
        "Conf",
        1,
        conf_check(
            spec.lo.clone(),
            spec.hi.clone(),
            spec.robot.clone(),
            spec.obstacles.clone(),
        ),
    ));
    sys.add_relation(Relation::certified("Motion", 3, motion_check()));
    sys.add_relation(Relation::tested(
        "CFree",
        &["traj"],
        traj_clear(spec.robot.clone(), spec.obstacles.clone(), spec.resolution),
    ));
    sys.clauses.push(Clause::new(
        "Move",
        vec![
            Constraint::relation("Motion", vec![P::x(0), P::u(0), P::x2(0)]),
            Constraint::relation("CFree", vec![P::u(0)]),
        ],
    ));
    let (q0, qg) = (
        Value::real(spec.start.clone()),
        Value::real(spec.goal.clone()),
    );
    let problem = Problem {
        system: sys,
        initial: Clause::new("initial", vec![Constraint::constant(P::x(0), q0.clone())]),
        goal: Clause::new("goal", vec![Constraint::constant(P::x(0), qg.clone())]),
        initial_elements: vec![
            Element::new("Conf", vec![q0]),
            Element::new("Conf", vec![qg]),
        ],
        types: vec![
            ValueType::new("conf", &[("Conf", 0), ("Motion", 0), ("Motion", 2)]),
            ValueType::new("traj", &[("Motion", 1)]),
        ],
    };
    let samplers = vec![
        conf_sampler(
            spec.lo.clone(),
            spec.hi.clone(),
            spec.robot.clone(),
            spec.obstacles.clone(),
        ),
        traj_sampler(),
    ];
    Ok(Bundle {
        problem,
        samplers: samplers.into(),
    })
}
