//! Pick-and-place where each pick or place is one manipulation trajectory
//! that leaves the home configuration, reaches the object and returns.
//!
//! State: one variable per object (pose or grasp) and the held-object
//! symbol. The robot configuration is implicit: it is home between steps.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    grasp_check, grasp_conf, grasp_generator, pose_generator, pred, real, region_test,
    stable_check, PickPlaceSpec,
};
use crate::error::FtsError;
use crate::geometry::{
    held_clear, legs, overlaps, segment_clear, swept_pair_clear, Body, Held, Shape,
};
use crate::model::{
    Clause, Constraint, Element, ParameterIndex as P, Predicate, Problem, Relation,
    TransitionSystem, ValueType, Variable, VariableDomain,
};
use crate::planners::Bundle;
use crate::samplers::{Certified, ConditionalSampler, Draw, DrawContext, Generator, Slot};
use crate::value::Value;

/// Waypoints `home, via.., q, ..via reversed, home`.
pub fn manip_path(home: &[f64], via: &[Vec<f64>], q: &[f64]) -> Vec<Vec<f64>> {
    let mut pts = vec![home.to_vec()];
    pts.extend(via.iter().cloned());
    pts.push(q.to_vec());
    pts.extend(via.iter().rev().cloned());
    pts.push(home.to_vec());
    pts
}

#[derive(Clone)]
struct Scene {
    spec: Arc<PickPlaceSpec>,
    object: usize,
}

impl Scene {
    fn radius(&self) -> f64 {
        self.spec.objects[self.object].radius
    }

    /// Everything checkable from the trajectory, pose and grasp alone.
    fn valid(&self, pts: &[Vec<f64>], p: &[f64], g: &[f64]) -> bool {
        let spec = &self.spec;
        let n = pts.len();
        if n < 3 || n.is_multiple_of(2) {
            return false;
        }
        if pts[0] != spec.start
            || pts[n - 1] != spec.start
            || (0..n).any(|i| pts[i] != pts[n - 1 - i])
        {
            return false;
        }
        if pts[n / 2] != grasp_conf(p, g) || pts.iter().any(|q| !spec.in_bounds(q)) {
            return false;
        }
        let held_shape = Shape::Disc {
            radius: self.radius(),
        };
        let target = Body::new(held_shape.clone(), p.to_vec());
        let eps = spec.resolution;
        legs(pts).all(|s| {
            segment_clear(&s, &spec.robot, &spec.obstacles, eps)
                && swept_pair_clear(&s, &spec.robot, None, &target, eps)
                && held_clear(
                    &s,
                    Held {
                        shape: &held_shape,
                        offset: g,
                    },
                    &spec.obstacles,
                    eps,
                )
        })
    }
}

struct ManipGenerator {
    scene: Scene,
    p: Vec<f64>,
    g: Vec<f64>,
    rng: ChaCha8Rng,
    straight_tried: bool,
    finished: bool,
}

impl Generator for ManipGenerator {
    fn next(&mut self, ctx: &DrawContext) -> Draw {
        let spec = &self.scene.spec;
        let q = grasp_conf(&self.p, &self.g);
        let target = Body::new(
            Shape::Disc {
                radius: self.scene.radius(),
            },
            self.p.clone(),
        );
        if !spec.in_bounds(&q)
            || spec
                .obstacles
                .iter()
                .any(|o| overlaps(&spec.robot, &q, &o.shape, &o.center))
            || overlaps(&spec.robot, &q, &target.shape, &target.center)
        {
            // no trajectory can end at an infeasible grasp configuration
            self.finished = true;
            return Draw::Exhausted;
        }
        if !self.straight_tried {
            self.straight_tried = true;
            let pts = manip_path(&spec.start, &[], &q);
            // one dimension offers no detours
            if spec.dim() == 1 {
                self.finished = true;
            }
            if self.scene.valid(&pts, &self.p, &self.g) {
                return Draw::Output(vec![Value::traj(pts)]);
            }
            if self.finished {
                return Draw::Exhausted;
            }
        }
        if self.finished {
            return Draw::Exhausted;
        }
        let robot = &spec.robot;
        for _ in 0..ctx.attempts {
            let via: Vec<f64> = spec
                .lo
                .iter()
                .zip(&spec.hi)
                .map(|(l, h)| self.rng.gen_range(*l..=*h))
                .collect();
            if spec
                .obstacles
                .iter()
                .any(|o| overlaps(robot, &via, &o.shape, &o.center))
            {
                continue;
            }
            let pts = manip_path(&spec.start, &[via], &q);
            if self.scene.valid(&pts, &self.p, &self.g) {
                return Draw::Output(vec![Value::traj(pts)]);
            }
        }
        Draw::Failed
    }

    fn finished(&self) -> bool {
        self.finished
    }
}

fn manip_check(scene: Scene) -> Predicate {
    pred(
        move |v| match (v[0].as_real(), v[1].as_real(), v[2].as_traj()) {
            (Some(p), Some(g), Some(pts)) => scene.valid(pts, p, g),
            _ => false,
        },
    )
}

/// Robot and held object along the trajectory against another object.
fn pair_test(spec: Arc<PickPlaceSpec>, held_radius: f64, other_radius: f64) -> Predicate {
    pred(move |v| {
        let (Some(g), Some(pts), Some(p)) = (v[0].as_real(), v[1].as_traj(), v[2].as_real()) else {
            return false;
        };
        let held_shape = Shape::Disc {
            radius: held_radius,
        };
        let other = Body::new(
            Shape::Disc {
                radius: other_radius,
            },
            p.to_vec(),
        );
        legs(pts).all(|s| {
            swept_pair_clear(
                &s,
                &spec.robot,
                Some(Held {
                    shape: &held_shape,
                    offset: g,
                }),
                &other,
                spec.resolution,
            )
        })
    })
}

pub fn build_manip_problem(spec: &PickPlaceSpec) -> Result<Bundle, FtsError> {
    spec.validate()?;
    let shared = Arc::new(spec.clone());
    let k = spec.objects.len();
    let h = k;
    let mut state_vars: Vec<Variable> = spec
        .objects
        .iter()
        .map(|o| Variable::new(&o.name, VariableDomain::Symbolic))
        .collect();
    let mut hand_values = vec![Value::none()];
    hand_values.extend(spec.objects.iter().map(|o| Value::sym(&o.name)));
    state_vars.push(Variable::new("h", VariableDomain::Finite(hand_values)));
    let mut sys = TransitionSystem {
        state_vars,
        control_vars: vec![Variable::new("m", VariableDomain::Symbolic)],
        ..Default::default()
    };
    let mut types = Vec::new();
    let mut samplers = Vec::new();
    let mut initial_elements = Vec::new();
    for (i, o) in spec.objects.iter().enumerate() {
        let n = &o.name;
        let (stable, grasp, manip) = (
            format!("Stable-{n}"),
            format!("Grasp-{n}"),
            format!("Manip-{n}"),
        );
        let (pose_ty, grasp_ty, traj_ty) = (
            format!("pose-{n}"),
            format!("grasp-{n}"),
            format!("traj-{n}"),
        );
        let grasps = spec.grasps(o);
        sys.add_relation(Relation::certified(&stable, 1, stable_check(spec, o)));
        sys.add_relation(Relation::certified(&grasp, 1, grasp_check(grasps.clone())));
        let scene = Scene {
            spec: shared.clone(),
            object: i,
        };
        sys.add_relation(Relation::certified(&manip, 3, manip_check(scene.clone())));
        if let Some(region) = spec.goal.regions.get(n) {
            sys.add_relation(Relation::tested(
                &format!("Region-{n}"),
                &[&pose_ty],
                region_test(region.clone()),
            ));
        }
        types.push(ValueType::new(&pose_ty, &[(&stable, 0), (&manip, 0)]));
        types.push(ValueType::new(&grasp_ty, &[(&grasp, 0), (&manip, 1)]));
        types.push(ValueType::new(&traj_ty, &[(&manip, 2)]));
        initial_elements.push(Element::new(&stable, vec![Value::real(o.pose.clone())]));
        if let Some(p) = spec.goal.poses.get(n) {
            initial_elements.push(Element::new(&stable, vec![Value::real(p.clone())]));
        }

        let mut pick = vec![
            Constraint::relation(&stable, vec![P::x(i)]),
            Constraint::relation(&grasp, vec![P::x2(i)]),
            Constraint::relation(&manip, vec![P::x(i), P::x2(i), P::u(0)]),
            Constraint::constant(P::x(h), Value::none()),
            Constraint::constant(P::x2(h), Value::sym(n)),
        ];
        let mut place = vec![
            Constraint::relation(&grasp, vec![P::x(i)]),
            Constraint::relation(&stable, vec![P::x2(i)]),
            Constraint::relation(&manip, vec![P::x2(i), P::x(i), P::u(0)]),
            Constraint::constant(P::x(h), Value::sym(n)),
            Constraint::constant(P::x2(h), Value::none()),
        ];
        for (j, o2) in spec.objects.iter().enumerate() {
            if j == i {
                continue;
            }
            let rel = format!("CFree-{n}-{}", o2.name);
            sys.add_relation(Relation::tested(
                &rel,
                &[&grasp_ty, &traj_ty, &format!("pose-{}", o2.name)],
                pair_test(shared.clone(), o.radius, o2.radius),
            ));
            pick.push(Constraint::pairwise(P::x(j), P::x2(j)));
            pick.push(Constraint::relation(&rel, vec![P::x2(i), P::u(0), P::x(j)]));
            place.push(Constraint::pairwise(P::x(j), P::x2(j)));
            place.push(Constraint::relation(&rel, vec![P::x(i), P::u(0), P::x(j)]));
        }
        sys.clauses.push(Clause::new(&format!("MPick-{n}"), pick));
        sys.clauses.push(Clause::new(&format!("MPlace-{n}"), place));

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
        samplers.push(ConditionalSampler::new(
            &format!("manip-{n}"),
            &[&pose_ty, &grasp_ty],
            1,
            vec![Certified::new(
                &manip,
                &[Slot::In(0), Slot::In(1), Slot::Out(0)],
            )],
            Arc::new(move |inputs, rng| {
                Box::new(ManipGenerator {
                    scene: scene.clone(),
                    p: real(&inputs[0]).to_vec(),
                    g: real(&inputs[1]).to_vec(),
                    rng,
                    straight_tried: false,
                    finished: false,
                })
            }),
        ));
    }
    let mut initial: Vec<Constraint> = spec
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| Constraint::constant(P::x(i), Value::real(o.pose.clone())))
        .collect();
    initial.push(Constraint::constant(P::x(h), Value::none()));
    let mut goal = Vec::new();
    for (i, o) in spec.objects.iter().enumerate() {
        if spec.goal.regions.contains_key(&o.name) {
            goal.push(Constraint::relation(
                &format!("Region-{}", o.name),
                vec![P::x(i)],
            ));
        }
        if let Some(p) = spec.goal.poses.get(&o.name) {
            goal.push(Constraint::constant(P::x(i), Value::real(p.clone())));
        }
    }
    goal.push(Constraint::constant(P::x(h), Value::none()));
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
