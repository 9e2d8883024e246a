//! Ellipsoidal Gaussian collision risk and per-state reward features.
//!
//! Each vehicle is a bivariate normal centred on the vehicle with covariance
//! `R(heading) diag(L, W) R(heading)^T`. The risk between two vehicles is the
//! integral over the plane of the product of their densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Polyline, Vec2};
use crate::scene::{LaneGeometry, VehicleGeometry, VehicleState};

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    fn add(&self, o: &Sym2) -> Sym2 {
        Sym2 {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    pub fn cholesky(&self) -> Result<Cholesky2> {
        if !(self.xx > 0.0) {
            return Err(Error::SingularCovariance);
        }
        let l11 = self.xx.sqrt();
        let l21 = self.xy / l11;
        let rest = self.yy - l21 * l21;
        if !(rest > 0.0) || !rest.is_finite() {
            return Err(Error::SingularCovariance);
        }
        Ok(Cholesky2 {
            l11,
            l21,
            l22: rest.sqrt(),
        })
    }
}

/// Lower-triangular factor `L` with `L L^T` equal to the factored matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cholesky2 {
    l11: f64,
    l21: f64,
    l22: f64,
}

impl Cholesky2 {
    pub fn solve(&self, b: Vec2) -> Vec2 {
        let z1 = b.x / self.l11;
        let z2 = (b.y - self.l21 * z1) / self.l22;
        let x2 = z2 / self.l22;
        let x1 = (z1 - self.l21 * x2) / self.l11;
        Vec2::new(x1, x2)
    }

    pub fn det(&self) -> f64 {
        (self.l11 * self.l22).powi(2)
    }

    /// `b^T M^-1 b`.
    pub fn quad(&self, b: Vec2) -> f64 {
        let z1 = b.x / self.l11;
        let z2 = (b.y - self.l21 * z1) / self.l22;
        z1 * z1 + z2 * z2
    }
}

/// `R diag(l, w) R^T` for a rotation by `heading`.
pub fn ellipse_covariance(heading: f64, l: f64, w: f64) -> Result<Sym2> {
    if !(l > 0.0 && w > 0.0) || !l.is_finite() || !w.is_finite() {
        return Err(Error::NonPositiveScale { l, w });
    }
    let (s, c) = heading.sin_cos();
    Ok(Sym2 {
        xx: c * c * l + s * s * w,
        xy: c * s * (l - w),
        yy: s * s * l + c * c * w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseGaussian {
    pub mu: Vec2,
    /// Orientation of the longitudinal axis (rad).
    pub heading: f64,
    /// Variance along the heading (m^2).
    #[serde(rename = "L")]
    pub l: f64,
    /// Variance across the heading (m^2).
    #[serde(rename = "W")]
    pub w: f64,
}

/// Multipliers applied to the half length and half width before squaring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskScale {
    pub longitudinal: f64,
    pub lateral: f64,
}

impl Default for RiskScale {
    fn default() -> Self {
        Self {
            longitudinal: 1.0,
            lateral: 1.0,
        }
    }
}

impl EllipseGaussian {
    /// Footprint ellipse whose one-sigma contour reaches the scaled half extents.
    pub fn for_vehicle(state: &VehicleState, geom: &VehicleGeometry, scale: &RiskScale) -> Self {
        Self {
            mu: state.position(),
            heading: state.psi,
            l: (scale.longitudinal * geom.length / 2.0).powi(2),
            w: (scale.lateral * geom.width / 2.0).powi(2),
        }
    }

    pub fn covariance(&self) -> Result<Sym2> {
        ellipse_covariance(self.heading, self.l, self.w)
    }

    pub fn density(&self, p: Vec2) -> Result<f64> {
        let chol = self.covariance()?.cholesky()?;
        let q = chol.quad(p - self.mu);
        Ok((-0.5 * q).exp() / (2.0 * PI * chol.det().sqrt()))
    }
}

/// Integral of the product of the two densities over the plane, by the
/// completed-square closed form. Means are re-centred on their midpoint first.
pub fn gaussian_overlap_risk(ego: &EllipseGaussian, other: &EllipseGaussian) -> Result<f64> {
    let sigma = ego.covariance()?;
    let gamma = other.covariance()?;
    let cs = sigma.cholesky()?;
    let cg = gamma.cholesky()?;
    let sum = sigma.add(&gamma).cholesky()?;

    let mid = (ego.mu + other.mu) * 0.5;
    let mu = ego.mu - mid;
    let theta = other.mu - mid;

    // combined precision-weighted mean
    let b = cs.solve(mu) + cg.solve(theta);
    // (S^-1 + G^-1)^-1 = S (S + G)^-1 G, applied without forming inverses
    let combined_mean = sigma.mul_vec(sum.solve(gamma.mul_vec(b)));
    let det_omega = cs.det() * cg.det() / sum.det();

    let exponent = 0.5 * (combined_mean.dot(b) - cs.quad(mu) - cg.quad(theta));
    Ok(det_omega.sqrt() / (2.0 * PI * (cs.det() * cg.det()).sqrt()) * exponent.exp())
}

/// Lane-independent road edges; left and right of the travel direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadBoundaries {
    pub left: Polyline,
    pub right: Polyline,
}

impl RoadBoundaries {
    /// Edges of a straight road spanning the outermost given lanes.
    pub fn from_lanes(lanes: &[LaneGeometry]) -> Option<Self> {
        let first = lanes.first()?;
        let (x0, x1) = {
            let pts = first.centerline.points();
            (pts[0].x, pts[pts.len() - 1].x)
        };
        let mut top = f64::NEG_INFINITY;
        let mut bottom = f64::INFINITY;
        for lane in lanes {
            let y = lane.centerline.points()[0].y;
            top = top.max(y + lane.width / 2.0);
            bottom = bottom.min(y - lane.width / 2.0);
        }
        let line = |y| Polyline::new(vec![Vec2::new(x0, y), Vec2::new(x1, y)]);
        Some(Self {
            left: line(top)?,
            right: line(bottom)?,
        })
    }

    /// Distance to the nearer edge.
    pub fn distance(&self, p: Vec2) -> f64 {
        self.left.project(p).offset.abs().min(self.right.project(p).offset.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardFeatures {
    pub lane_center_distance: f64,
    pub boundary_distance: f64,
    pub speed: f64,
    /// Heading relative to the lane direction, wrapped into (-pi, pi].
    pub heading_error: f64,
    /// Summed overlap risk against every other vehicle.
    pub risk: f64,
}

impl RewardFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.lane_center_distance,
            self.boundary_distance,
            self.speed,
            self.heading_error,
            self.risk,
        ]
    }
}

pub fn reward_features(
    state: &VehicleState,
    geom: &VehicleGeometry,
    lane: &LaneGeometry,
    road: &RoadBoundaries,
    others: &[(VehicleState, VehicleGeometry)],
    scale: &RiskScale,
) -> Result<RewardFeatures> {
    let p = state.position();
    let proj = lane.project(p);
    let ego = EllipseGaussian::for_vehicle(state, geom, scale);
    let mut risk = 0.0;
    for (s, g) in others {
        risk += gaussian_overlap_risk(&ego, &EllipseGaussian::for_vehicle(s, g, scale))?;
    }
    Ok(RewardFeatures {
        lane_center_distance: proj.offset.abs(),
        boundary_distance: road.distance(p),
        speed: state.v,
        heading_error: wrap_angle(state.psi - proj.tangent.y.atan2(proj.tangent.x)),
        risk,
    })
}
