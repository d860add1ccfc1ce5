//! Resolution-sampled collision checking for translate-only bodies in one or
//! two dimensions.
//!
//! Overlap is strict: bodies that only touch are not in collision.

use serde::{Deserialize, Serialize};

pub const DEFAULT_RESOLUTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned box given by its half extents.
    Box {
        half: Vec<f64>,
    },
    Disc {
        radius: f64,
    },
}

impl Shape {
    pub fn square(half: f64, dim: usize) -> Self {
        Shape::Box {
            half: vec![half; dim],
        }
    }

    /// Half extent along each axis of the bounding box.
    pub fn extent(&self, axis: usize) -> f64 {
        match self {
            Shape::Box { half } => half[axis],
            Shape::Disc { radius } => *radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub shape: Shape,
    pub center: Vec<f64>,
}

impl Body {
    pub fn new(shape: Shape, center: Vec<f64>) -> Self {
        Self { shape, center }
    }

    pub fn overlaps(&self, other: &Body) -> bool {
        overlaps(&self.shape, &self.center, &other.shape, &other.center)
    }
}

fn box_disc(half: &[f64], cb: &[f64], radius: f64, cd: &[f64]) -> bool {
    let mut d2 = 0.0;
    for k in 0..half.len() {
        let excess = (cd[k] - cb[k]).abs() - half[k];
        if excess > 0.0 {
            d2 += excess * excess;
        }
    }
    d2 < radius * radius
}

/// Strict interior overlap of two shapes placed at `ca` and `cb`.
pub fn overlaps(a: &Shape, ca: &[f64], b: &Shape, cb: &[f64]) -> bool {
    match (a, b) {
        (Shape::Box { half: ha }, Shape::Box { half: hb }) => {
            (0..ha.len()).all(|k| (ca[k] - cb[k]).abs() < ha[k] + hb[k])
        }
        (Shape::Disc { radius: ra }, Shape::Disc { radius: rb }) => {
            let d2: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum();
            let r = ra + rb;
            d2 < r * r
        }
        (Shape::Box { half }, Shape::Disc { radius }) => box_disc(half, ca, *radius, cb),
        (Shape::Disc { radius }, Shape::Box { half }) => box_disc(half, cb, *radius, ca),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl Segment {
    pub fn new(start: Vec<f64>, end: Vec<f64>) -> Self {
        Self { start, end }
    }

    pub fn reversed(&self) -> Self {
        Self {
            start: self.end.clone(),
            end: self.start.clone(),
        }
    }

    /// Point `i` of an `n`-step grid, computed so that point `i` of the
    /// reversed segment is bitwise equal to point `n - i` of this one.
    pub fn grid_point(&self, i: usize, n: usize) -> Vec<f64> {
        let (wa, wb, nf) = ((n - i) as f64, i as f64, n as f64);
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| (wa * a + wb * b) / nf)
            .collect()
    }

    pub fn translated(&self, v: &[f64]) -> Self {
        let shift = |p: &[f64]| p.iter().zip(v).map(|(a, b)| a + b).collect();
        Self {
            start: shift(&self.start),
            end: shift(&self.end),
        }
    }
}

/// Number of grid steps for resolution `eps`: the smallest power of two
/// whose step does not exceed `eps`, so that finer resolutions always test
/// a superset of the points of coarser ones.
pub fn grid_steps(eps: f64) -> usize {
    assert!(eps > 0.0, "resolution must be positive");
    let mut n = 1usize;
    while 1.0 / (n as f64) > eps && n < (1 << 24) {
        n *= 2;
    }
    n
}

fn any_grid_point(seg: &Segment, eps: f64, mut hit: impl FnMut(&[f64]) -> bool) -> bool {
    let n = grid_steps(eps);
    (0..=n).any(|i| hit(&seg.grid_point(i, n)))
}

pub fn segment_clear(seg: &Segment, robot: &Shape, obstacles: &[Body], eps: f64) -> bool {
    if obstacles.is_empty() {
        return true;
    }
    !any_grid_point(seg, eps, |p| {
        obstacles
            .iter()
            .any(|o| overlaps(robot, p, &o.shape, &o.center))
    })
}

/// A body carried rigidly at `offset` from the robot's configuration.
#[derive(Clone, Copy, Debug)]
pub struct Held<'a> {
    pub shape: &'a Shape,
    pub offset: &'a [f64],
}

pub fn swept_pair_clear(
    seg: &Segment,
    robot: &Shape,
    held: Option<Held<'_>>,
    movable: &Body,
    eps: f64,
) -> bool {
    !any_grid_point(seg, eps, |p| {
        if overlaps(robot, p, &movable.shape, &movable.center) {
            return true;
        }
        held.is_some_and(|h| {
            let c: Vec<f64> = p.iter().zip(h.offset).map(|(a, b)| a + b).collect();
            overlaps(h.shape, &c, &movable.shape, &movable.center)
        })
    })
}

/// Held body alone against static obstacles.
pub fn held_clear(seg: &Segment, held: Held<'_>, obstacles: &[Body], eps: f64) -> bool {
    if obstacles.is_empty() {
        return true;
    }
    !any_grid_point(seg, eps, |p| {
        let c: Vec<f64> = p.iter().zip(held.offset).map(|(a, b)| a + b).collect();
        obstacles
            .iter()
            .any(|o| overlaps(held.shape, &c, &o.shape, &o.center))
    })
}

/// Consecutive segments of a waypoint list.
pub fn legs(points: &[Vec<f64>]) -> impl Iterator<Item = Segment> + '_ {
    points
        .windows(2)
        .map(|w| Segment::new(w[0].clone(), w[1].clone()))
}

pub fn inside_box(p: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    p.iter()
        .zip(lo.iter().zip(hi))
        .all(|(x, (l, h))| *l <= *x && *x <= *h)
}
