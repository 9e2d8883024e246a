//! Planar helpers shared by the lane, steering and collision code.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product; positive when `other` lies to the left of `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Projection of a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point measured from the first vertex. May be
    /// negative or exceed the polyline length when the point lies beyond an end.
    pub arc_length: f64,
    /// Signed distance from the polyline, positive to the left of travel direction.
    pub offset: f64,
    /// Unit tangent at the foot point.
    pub tangent: Vec2,
}

/// Ordered open polyline with cached cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Polyline {
    /// Returns `None` unless there are at least two points with strictly positive spacing.
    pub fn new(points: Vec<Vec2>) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for w in points.windows(2) {
            let seg = (w[1] - w[0]).norm();
            if !(seg > 0.0) {
                return None;
            }
            cumulative.push(cumulative.last().unwrap() + seg);
        }
        Some(Self { points, cumulative })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let n = self.points.len();
        let mut best: Option<(f64, Projection)> = None;
        for i in 0..n - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let seg = b - a;
            let len = self.cumulative[i + 1] - self.cumulative[i];
            let tangent = seg * (1.0 / len);
            let mut t = (p - a).dot(tangent);
            // the first and last segments extend to infinity
            if i > 0 {
                t = t.max(0.0);
            }
            if i < n - 2 {
                t = t.min(len);
            }
            let foot = a + tangent * t;
            let d = p - foot;
            let dist = d.norm();
            if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
                best = Some((
                    dist,
                    Projection {
                        arc_length: self.cumulative[i] + t,
                        offset: tangent.cross(d),
                        tangent,
                    },
                ));
            }
        }
        best.unwrap().1
    }

    /// Point at the given arc length, or `None` outside `[0, length]`.
    pub fn point_at(&self, s: f64) -> Option<Vec2> {
        if !(0.0..=self.length()).contains(&s) {
            return None;
        }
        let i = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            k => (k - 1).min(self.points.len() - 2),
        };
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let t = (s - self.cumulative[i]) / len;
        Some(self.points[i] + (self.points[i + 1] - self.points[i]) * t)
    }
}

/// Oriented rectangle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn corners(&self) -> [Vec2; 4] {
        let fwd = Vec2::from_angle(self.heading);
        let left = fwd.perp();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        [
            self.center + fwd * hl + left * hw,
            self.center + fwd * hl - left * hw,
            self.center - fwd * hl - left * hw,
            self.center - fwd * hl + left * hw,
        ]
    }

    /// Separating-axis overlap test. Touching edges do not count as overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let reach = (self.length.hypot(self.width) + other.length.hypot(other.width)) / 2.0;
        if (self.center - other.center).norm() > reach {
            return false;
        }
        let a = self.corners();
        let b = other.corners();
        let axes = [
            Vec2::from_angle(self.heading),
            Vec2::from_angle(self.heading).perp(),
            Vec2::from_angle(other.heading),
            Vec2::from_angle(other.heading).perp(),
        ];
        axes.iter().all(|&axis| {
            let (amin, amax) = extent(&a, axis);
            let (bmin, bmax) = extent(&b, axis);
            amax > bmin && bmax > amin
        })
    }
}

fn extent(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
        let p = c.dot(axis);
        (lo.min(p), hi.max(p))
    })
}
