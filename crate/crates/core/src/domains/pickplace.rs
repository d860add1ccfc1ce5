//! Pick-and-place with an explicit robot configuration variable.
//!
//! State: robot configuration, one variable per object (a pose when resting,
//! a grasp offset when held) and the held-object symbol. A single control
//! carries the trajectory of a move, or `None`.

use std::sync::Arc;

use super::motion::{conf_check, conf_sampler, motion_check, traj_clear, traj_sampler};
use super::{
    grasp_check, grasp_conf, grasp_generator, pose_generator, pred, real, region_test,
    stable_check, PickPlaceSpec,
};
use crate::error::FtsError;
use crate::geometry::{held_clear, legs, swept_pair_clear, Body, Held, Shape};
use crate::model::{
    Clause, Constraint, Element, ParameterIndex as P, Problem, Relation, TransitionSystem,
    ValueType, Variable, VariableDomain,
};
use crate::planners::Bundle;
use crate::samplers::{Certified, ConditionalSampler, Enumerate, Slot};
use crate::value::Value;

/// Indices of the state variables of a pick-and-place system.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub objects: usize,
}

impl Layout {
    pub const Q: usize = 0;
    pub fn object(&self, i: usize) -> usize {
        1 + i
    }
    pub fn hand(&self) -> usize {
        1 + self.objects
    }
}

fn frames(layout: Layout, except: Option<usize>) -> Vec<Constraint> {
    (0..layout.objects)
        .filter(|i| Some(*i) != except)
        .map(|i| Constraint::pairwise(P::x(layout.object(i)), P::x2(layout.object(i))))
        .collect()
}

/// Swept robot (and optional held disc) against one disc.
fn swept_test(
    robot: Shape,
    held_radius: Option<f64>,
    radius: f64,
    eps: f64,
    traj: usize,
    grasp: Option<usize>,
    pose: usize,
) -> crate::model::Predicate {
    pred(move |v| {
        let Some(pts) = v[traj].as_traj() else {
            return false;
        };
        let other = Body::new(Shape::Disc { radius }, real(&v[pose]).to_vec());
        let held_shape = held_radius.map(|r| Shape::Disc { radius: r });
        let offset = grasp.map(|g| real(&v[g]).to_vec());
        legs(pts).all(|s| {
            let held = match (&held_shape, &offset) {
                (Some(shape), Some(off)) => Some(Held { shape, offset: off }),
                _ => None,
            };
            swept_pair_clear(&s, &robot, held, &other, eps)
        })
    })
}

pub fn build_pickplace_problem(spec: &PickPlaceSpec) -> Result<Bundle, FtsError> {
    spec.validate()?;
    let layout = Layout {
        objects: spec.objects.len(),
    };
    let eps = spec.resolution;
    let mut state_vars = vec![Variable::new(
        "q",
        VariableDomain::Box {
            lo: spec.lo.clone(),
            hi: spec.hi.clone(),
        },
    )];
    state_vars.extend(
        spec.objects
            .iter()
            .map(|o| Variable::new(&o.name, VariableDomain::Symbolic)),
    );
    let mut hand_values = vec![Value::none()];
    hand_values.extend(spec.objects.iter().map(|o| Value::sym(&o.name)));
    state_vars.push(Variable::new("h", VariableDomain::Finite(hand_values)));
    let mut sys = TransitionSystem {
        state_vars,
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
        traj_clear(spec.robot.clone(), spec.obstacles.clone(), eps),
    ));

    let (q, t, h) = (Layout::Q, 0, layout.hand());
    let mut types = vec![
        ValueType::new("conf", &[("Conf", 0), ("Motion", 0), ("Motion", 2)]),
        ValueType::new("traj", &[("Motion", 1)]),
    ];
    let mut move_clause = vec![
        Constraint::relation("Motion", vec![P::x(q), P::u(t), P::x2(q)]),
        Constraint::relation("CFree", vec![P::u(t)]),
        Constraint::constant(P::x(h), Value::none()),
        Constraint::pairwise(P::x(h), P::x2(h)),
    ];
    move_clause.extend(frames(layout, None));
    let mut clauses = Vec::new();
    let mut samplers = vec![
        conf_sampler(
            spec.lo.clone(),
            spec.hi.clone(),
            spec.robot.clone(),
            spec.obstacles.clone(),
        ),
        traj_sampler(),
    ];
    let mut initial_elements = vec![Element::new("Conf", vec![Value::real(spec.start.clone())])];

    for (i, o) in spec.objects.iter().enumerate() {
        let n = &o.name;
        let xo = layout.object(i);
        let (stable, grasp, kin) = (
            format!("Stable-{n}"),
            format!("Grasp-{n}"),
            format!("Kin-{n}"),
        );
        let (cfree, cfree_h) = (format!("CFree-{n}"), format!("CFreeH-{n}"));
        let (pose_ty, grasp_ty) = (format!("pose-{n}"), format!("grasp-{n}"));
        let grasps = spec.grasps(o);
        sys.add_relation(Relation::certified(&stable, 1, stable_check(spec, o)));
        sys.add_relation(Relation::certified(&grasp, 1, grasp_check(grasps.clone())));
        sys.add_relation(Relation::certified(
            &kin,
            3,
            pred(|v| {
                let (g, p, q) = (real(&v[0]), real(&v[1]), real(&v[2]));
                !q.is_empty()
                    && g.len() == q.len()
                    && p.len() == q.len()
                    && q == grasp_conf(p, g).as_slice()
            }),
        ));
        sys.add_relation(Relation::tested(
            &cfree,
            &["traj", &pose_ty],
            swept_test(spec.robot.clone(), None, o.radius, eps, 0, None, 1),
        ));
        let held_shape = Shape::Disc { radius: o.radius };
        let obstacles = spec.obstacles.clone();
        sys.add_relation(Relation::tested(
            &cfree_h,
            &["traj", &grasp_ty],
            pred(move |v| {
                let Some(pts) = v[0].as_traj() else {
                    return false;
                };
                let off = real(&v[1]).to_vec();
                legs(pts).all(|s| {
                    held_clear(
                        &s,
                        Held {
                            shape: &held_shape,
                            offset: &off,
                        },
                        &obstacles,
                        eps,
                    )
                })
            }),
        ));
        if let Some(region) = spec.goal.regions.get(n) {
            sys.add_relation(Relation::tested(
                &format!("Region-{n}"),
                &[&pose_ty],
                region_test(region.clone()),
            ));
        }
        types.push(ValueType::new(&pose_ty, &[(&stable, 0)]));
        types.push(ValueType::new(&grasp_ty, &[(&grasp, 0)]));
        types[0].sources.push((kin.clone(), 2));
        initial_elements.push(Element::new(&stable, vec![Value::real(o.pose.clone())]));
        if let Some(p) = spec.goal.poses.get(n) {
            initial_elements.push(Element::new(&stable, vec![Value::real(p.clone())]));
        }

        move_clause.push(Constraint::relation(&cfree, vec![P::u(t), P::x(xo)]));

        let mut move_h = vec![
            Constraint::relation("Motion", vec![P::x(q), P::u(t), P::x2(q)]),
            Constraint::relation("CFree", vec![P::u(t)]),
            Constraint::relation(&cfree_h, vec![P::u(t), P::x(xo)]),
            Constraint::constant(P::x(h), Value::sym(n)),
            Constraint::pairwise(P::x(h), P::x2(h)),
        ];
        move_h.extend(frames(layout, None));
        for (j, o2) in spec.objects.iter().enumerate() {
            if j != i {
                let rel = format!("CFreeH-{n}-{}", o2.name);
                sys.add_relation(Relation::tested(
                    &rel,
                    &["traj", &grasp_ty, &format!("pose-{}", o2.name)],
                    swept_test(
                        spec.robot.clone(),
                        Some(o.radius),
                        o2.radius,
                        eps,
                        0,
                        Some(1),
                        2,
                    ),
                ));
                move_h.push(Constraint::relation(
                    &rel,
                    vec![P::u(t), P::x(xo), P::x(layout.object(j))],
                ));
            }
        }
        let mut pick = vec![
            Constraint::relation(&stable, vec![P::x(xo)]),
            Constraint::relation(&grasp, vec![P::x2(xo)]),
            Constraint::relation(&kin, vec![P::x2(xo), P::x(xo), P::x(q)]),
            Constraint::pairwise(P::x(q), P::x2(q)),
            Constraint::constant(P::x(h), Value::none()),
            Constraint::constant(P::x2(h), Value::sym(n)),
            Constraint::constant(P::u(t), Value::none()),
        ];
        pick.extend(frames(layout, Some(i)));
        let mut place = vec![
            Constraint::relation(&grasp, vec![P::x(xo)]),
            Constraint::relation(&stable, vec![P::x2(xo)]),
            Constraint::relation(&kin, vec![P::x(xo), P::x2(xo), P::x(q)]),
            Constraint::pairwise(P::x(q), P::x2(q)),
            Constraint::constant(P::x(h), Value::sym(n)),
            Constraint::constant(P::x2(h), Value::none()),
            Constraint::constant(P::u(t), Value::none()),
        ];
        place.extend(frames(layout, Some(i)));
        clauses.push(Clause::new(&format!("MoveH-{n}"), move_h));
        clauses.push(Clause::new(&format!("Pick-{n}"), pick));
        clauses.push(Clause::new(&format!("Place-{n}"), place));

        samplers.push(ConditionalSampler::new(
            &format!("grasp-{n}"),
            &[],
            1,
            vec![Certified::new(&grasp, &[Slot::Out(0)])],
            Arc::new(move |_, _| grasp_generator(grasps.clone())),
        ));
        let (spec2, o2) = (spec.clone(), o.clone());
        // objects without placement surfaces can only stay where they are
        if !o.surfaces.is_empty() {
            samplers.push(ConditionalSampler::new(
                &format!("pose-{n}"),
                &[],
                1,
                vec![Certified::new(&stable, &[Slot::Out(0)])],
                Arc::new(move |_, rng| pose_generator(&spec2, &o2, rng)),
            ));
        }
        let conf_ok = conf_check(
            spec.lo.clone(),
            spec.hi.clone(),
            spec.robot.clone(),
            spec.obstacles.clone(),
        );
        samplers.push(ConditionalSampler::new(
            &format!("ik-{n}"),
            &[&pose_ty, &grasp_ty],
            1,
            vec![Certified::new(
                &kin,
                &[Slot::In(1), Slot::In(0), Slot::Out(0)],
            )],
            Arc::new(move |inputs, _| {
                let (p, g) = (real(&inputs[0]), real(&inputs[1]));
                let q = Value::real(grasp_conf(p, g));
                let items = if conf_ok(std::slice::from_ref(&q)) {
                    vec![vec![q]]
                } else {
                    vec![]
                };
                Box::new(Enumerate::new(items))
            }),
        ));
    }
    clauses.insert(0, Clause::new("Move", move_clause));
    sys.clauses = clauses;

    let mut initial = vec![Constraint::constant(
        P::x(q),
        Value::real(spec.start.clone()),
    )];
    for (i, o) in spec.objects.iter().enumerate() {
        initial.push(Constraint::constant(
            P::x(layout.object(i)),
            Value::real(o.pose.clone()),
        ));
    }
    initial.push(Constraint::constant(P::x(h), Value::none()));
    let mut goal = Vec::new();
    for (i, o) in spec.objects.iter().enumerate() {
        if spec.goal.regions.contains_key(&o.name) {
            goal.push(Constraint::relation(
                &format!("Region-{}", o.name),
                vec![P::x(layout.object(i))],
            ));
        }
        if let Some(p) = spec.goal.poses.get(&o.name) {
            goal.push(Constraint::constant(
                P::x(layout.object(i)),
                Value::real(p.clone()),
            ));
        }
    }
    if let Some(qg) = &spec.goal.conf {
        goal.push(Constraint::constant(P::x(q), Value::real(qg.clone())));
        initial_elements.push(Element::new("Conf", vec![Value::real(qg.clone())]));
    }
    let problem = Problem {
        system: sys,
        initial: Clause::new("initial", initial),
        goal: Clause::new("goal", goal),
        initial_elements,
        types,
    };
    Ok(Bundle {
        problem,
        samplers: samplers.into(),
    })
}
