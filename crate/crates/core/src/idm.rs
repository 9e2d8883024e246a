//! Intelligent Driver Model acceleration law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::US101_SPEED_LIMIT;

/// The five driver-specific behavioral parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Maximum acceleration (m/s^2).
    pub a: f64,
    /// Desired deceleration (m/s^2).
    pub b: f64,
    /// Safe time headway (s).
    #[serde(rename = "T")]
    pub t_headway: f64,
    /// Jam distance (m).
    pub d0: f64,
    /// Velocity-dependent jam distance (m).
    pub d1: f64,
}

impl IdmParams {
    pub const DIM: usize = 5;
    pub const NAMES: [&'static str; 5] = ["a", "b", "T", "d0", "d1"];

    pub fn to_array(&self) -> [f64; 5] {
        [self.a, self.b, self.t_headway, self.d0, self.d1]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            t_headway: v[2],
            d0: v[3],
            d1: v[4],
        }
    }

    /// Component-wise arithmetic mean. `None` for an empty input.
    pub fn mean<'a>(params: impl IntoIterator<Item = &'a IdmParams>) -> Option<IdmParams> {
        let mut sum = [0.0; 5];
        let mut n = 0usize;
        for p in params {
            for (s, v) in sum.iter_mut().zip(p.to_array()) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| IdmParams::from_array(sum.map(|s| s / n as f64)))
    }
}

impl Default for IdmParams {
    /// Textbook highway values.
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.5,
            t_headway: 1.5,
            d0: 2.0,
            d1: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

/// Per-parameter search intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmBounds {
    pub a: Interval,
    pub b: Interval,
    #[serde(rename = "T")]
    pub t_headway: Interval,
    pub d0: Interval,
    pub d1: Interval,
}

impl Default for IdmBounds {
    fn default() -> Self {
        Self {
            a: Interval::new(0.3, 5.0),
            b: Interval::new(0.5, 5.0),
            t_headway: Interval::new(0.1, 3.0),
            d0: Interval::new(0.0, 10.0),
            d1: Interval::new(0.0, 20.0),
        }
    }
}

impl IdmBounds {
    pub fn intervals(&self) -> [Interval; 5] {
        [self.a, self.b, self.t_headway, self.d0, self.d1]
    }

    pub fn lower(&self) -> [f64; 5] {
        self.intervals().map(|i| i.lo)
    }

    pub fn upper(&self) -> [f64; 5] {
        self.intervals().map(|i| i.hi)
    }

    pub fn contains(&self, p: &IdmParams) -> bool {
        self.intervals()
            .iter()
            .zip(p.to_array())
            .all(|(i, v)| i.contains(v))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, i) in IdmParams::NAMES.iter().zip(self.intervals()) {
            if !(i.lo <= i.hi) || !i.lo.is_finite() || !i.hi.is_finite() {
                return Err(Error::Config(format!("bounds.{name}: [{}, {}]", i.lo, i.hi)));
            }
        }
        if self.a.lo <= 0.0 || self.b.lo <= 0.0 {
            return Err(Error::Config("bounds on a and b must be strictly positive".into()));
        }
        if self.t_headway.lo < 0.0 || self.d0.lo < 0.0 || self.d1.lo < 0.0 {
            return Err(Error::Config("bounds on T, d0, d1 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Parameters shared by every driver on a road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmGlobals {
    /// Desired speed, the road's speed limit (m/s).
    pub v0: f64,
    /// Acceleration exponent.
    pub phi: f64,
}

impl Default for IdmGlobals {
    fn default() -> Self {
        Self {
            v0: US101_SPEED_LIMIT,
            phi: 4.0,
        }
    }
}

/// Car-following state of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmState {
    /// Own speed (m/s).
    pub v: f64,
    /// Approach rate v - v_lead (m/s).
    pub dv: f64,
    /// Bumper gap to the lead (m); `None` on a free road.
    pub gap: Option<f64>,
}

impl IdmState {
    pub fn free(v: f64) -> Self {
        Self { v, dv: 0.0, gap: None }
    }
}

/// Desired minimum gap, clamped at zero.
pub fn desired_gap(params: &IdmParams, globals: &IdmGlobals, v: f64, dv: f64) -> f64 {
    let raw = params.d0
        + params.d1 * (v / globals.v0).sqrt()
        + params.t_headway * v
        + v * dv / (2.0 * (params.a * params.b).sqrt());
    raw.max(0.0)
}

/// IDM acceleration without the reversing guard.
pub fn idm_accel_raw(params: &IdmParams, globals: &IdmGlobals, state: &IdmState) -> Result<f64> {
    let free = 1.0 - (state.v / globals.v0).powf(globals.phi);
    let interaction = match state.gap {
        None => 0.0,
        Some(d) if d > 0.0 => {
            let ratio = desired_gap(params, globals, state.v, state.dv) / d;
            ratio * ratio
        }
        Some(d) => return Err(Error::InvalidGap(d)),
    };
    Ok(params.a * (free - interaction))
}

/// IDM acceleration, bounded below so that `v + accel * dt >= 0`.
pub fn idm_accel(params: &IdmParams, globals: &IdmGlobals, state: &IdmState, dt: f64) -> Result<f64> {
    let raw = idm_accel_raw(params, globals, state)?;
    Ok(raw.max(-state.v / dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const DT: f64 = 0.1;

    fn globals(v0: f64) -> IdmGlobals {
        IdmGlobals { v0, phi: 4.0 }
    }

    #[test]
    fn desired_gap_at_standstill_is_jam_distance() {
        let p = IdmParams::default();
        assert_eq!(desired_gap(&p, &globals(30.0), 0.0, 7.0), p.d0);
    }

    #[test]
    fn desired_gap_hand_value() {
        let p = IdmParams { a: 1.0, b: 1.0, t_headway: 1.0, d0: 2.0, d1: 0.0 };
        assert_eq!(desired_gap(&p, &globals(30.0), 10.0, 0.0), 12.0);
    }

    #[test]
    fn desired_gap_clamped_at_zero() {
        let p = IdmParams { a: 1.0, b: 1.0, t_headway: 0.1, d0: 0.0, d1: 0.0 };
        assert_eq!(desired_gap(&p, &globals(30.0), 10.0, -20.0), 0.0);
    }

    #[test]
    fn free_road_fixed_points() {
        let p = IdmParams::default();
        let g = globals(30.0);
        assert_eq!(idm_accel(&p, &g, &IdmState::free(0.0), DT).unwrap(), p.a);
        assert_eq!(idm_accel(&p, &g, &IdmState::free(30.0), DT).unwrap(), 0.0);
    }

    #[test]
    fn following_hand_value() {
        let p = IdmParams { a: 2.0, b: 2.0, t_headway: 1.5, d0: 2.0, d1: 0.0 };
        let s = IdmState { v: 20.0, dv: 0.0, gap: Some(64.0) };
        let acc = idm_accel(&p, &globals(30.0), &s, DT).unwrap();
        let expected = 2.0 * (1.0 - (2.0f64 / 3.0).powi(4) - 0.25);
        assert_relative_eq!(acc, expected, epsilon = 1e-12);
        assert_relative_eq!(acc, 1.1049, epsilon = 1e-4);
    }

    #[test]
    fn non_positive_gap_is_error() {
        let s = IdmState { v: 5.0, dv: 0.0, gap: Some(0.0) };
        assert!(matches!(
            idm_accel(&IdmParams::default(), &globals(30.0), &s, DT),
            Err(Error::InvalidGap(_))
        ));
    }

    #[test]
    fn reversing_guard_caps_braking() {
        let s = IdmState { v: 3.0, dv: 10.0, gap: Some(0.2) };
        let acc = idm_accel(&IdmParams::default(), &globals(30.0), &s, DT).unwrap();
        assert_eq!(acc, -30.0);
    }

    #[test]
    fn equilibrium_gap_matches_root() {
        let p = IdmParams { a: 1.2, b: 1.7, t_headway: 1.3, d0: 2.5, d1: 4.0 };
        let g = globals(30.0);
        for &v in &[3.0, 10.0, 20.0, 27.0] {
            let predicted = desired_gap(&p, &g, v, 0.0) / (1.0 - (v / g.v0).powi(4)).sqrt();
            // bisection on gap for zero acceleration
            let f = |d: f64| idm_accel_raw(&p, &g, &IdmState { v, dv: 0.0, gap: Some(d) }).unwrap();
            let (mut lo, mut hi) = (1e-3, 1e4);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert_relative_eq!(0.5 * (lo + hi), predicted, max_relative = 1e-10);
        }
    }

    #[test]
    fn strongly_negative_approach_breaks_speed_monotonicity() {
        // d* shrinks with v when dv < -2 T sqrt(ab); acceleration then grows with v
        let p = IdmParams { a: 1.0, b: 1.0, t_headway: 0.2, d0: 2.0, d1: 0.0 };
        let g = globals(30.0);
        let acc = |v: f64| idm_accel(&p, &g, &IdmState { v, dv: -1.0, gap: Some(3.0) }, DT).unwrap();
        assert!(acc(2.0) > acc(1.0));
    }

    #[test]
    fn mean_params() {
        let a = IdmParams { a: 1.0, b: 2.0, t_headway: 1.0, d0: 0.0, d1: 4.0 };
        let b = IdmParams { a: 3.0, b: 2.0, t_headway: 2.0, d0: 1.0, d1: 0.0 };
        let m = IdmParams::mean([&a, &b]).unwrap();
        assert_eq!(m.to_array(), [2.0, 2.0, 1.5, 0.5, 2.0]);
        assert!(IdmParams::mean(std::iter::empty()).is_none());
    }

    fn in_bounds() -> impl Strategy<Value = IdmParams> {
        (0.3..5.0, 0.5..5.0, 0.1..3.0, 0.0..10.0, 0.0..20.0).prop_map(|(a, b, t, d0, d1)| IdmParams {
            a,
            b,
            t_headway: t,
            d0,
            d1,
        })
    }

    proptest! {
        #[test]
        fn speed_never_negative_after_step(
            p in in_bounds(),
            v in 0.0..35.0f64,
            dv in -15.0..15.0f64,
            gap in prop::option::of(0.01..200.0f64),
        ) {
            let acc = idm_accel(&p, &globals(29.06), &IdmState { v, dv, gap }, DT).unwrap();
            prop_assert!(v + acc * DT >= -1e-12);
            prop_assert!(acc <= p.a);
        }

        #[test]
        fn accel_monotone_in_gap_and_approach(
            p in in_bounds(),
            v in 0.0..29.06f64,
            dv in -10.0..10.0f64,
            gap in 0.5..150.0f64,
            extra in 0.0..50.0f64,
        ) {
            let g = globals(29.06);
            let at = |dv: f64, gap: f64| idm_accel(&p, &g, &IdmState { v, dv, gap: Some(gap) }, DT).unwrap();
            prop_assert!(at(dv, gap + extra) >= at(dv, gap));
            prop_assert!(at(dv + extra / 5.0, gap) <= at(dv, gap));
        }
    }
}
