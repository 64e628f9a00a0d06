//! Closed-form trombone path geometry.
//!
//! An arrival enters the terminal area at a feeder gate, flies a straight
//! tangent leg onto a turn circle of radius `r`, follows the circular
//! Radius-to-Fix arc until it intercepts the final course, then flies the
//! Baseleg extension `d` straight to the Final Approach Fix. Every quantity
//! here is a smooth function of `d`, which is what makes the scheduling
//! problem tractable for a gradient solver.
//!
//! Coordinates are planar nautical miles, x east and y north. The final
//! course runs along +x through the FAF, so the extension moves the turn
//! upstream (west) of the FAF.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact hour/second conversion used everywhere (1 kt = 1/3600 NM/s).
pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Minimum clearance between the entry point and the turn circle. Below this
/// the tangent construction is treated as undefined instead of returning NaN.
pub const SINGULARITY_EPS: f64 = 1e-6;

/// Number of grid points used to validate tangent existence over `[0, d_max]`.
const CONFIG_GRID_POINTS: usize = 1001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("entry ({x}, {y}) lies inside the final-course band |y - y_faf| <= r")]
    InsideBand { x: f64, y: f64 },
    #[error("no tangent: entry is {distance} NM from the turn center, radius is {radius} NM")]
    NoTangent { distance: f64, radius: f64 },
    #[error("gradient unreliable: entry within {clearance} NM of the turn circle")]
    NearTangency { clearance: f64 },
    #[error("invalid geometry: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Which side of the final course an arrival comes from. Decides whether the
/// turn circle sits above or below the final course.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproachSide {
    North,
    South,
}

impl ApproachSide {
    fn sign(self) -> f64 {
        match self {
            ApproachSide::North => 1.0,
            ApproachSide::South => -1.0,
        }
    }

    /// Rotation sense of the arc. Exiting the bottom of a northern circle
    /// heading east is a counter-clockwise turn; the southern case mirrors it.
    pub fn turn(self) -> TurnDirection {
        match self {
            ApproachSide::North => TurnDirection::CounterClockwise,
            ApproachSide::South => TurnDirection::Clockwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    Clockwise,
    CounterClockwise,
}

impl TurnDirection {
    /// +1 for counter-clockwise, -1 for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            TurnDirection::CounterClockwise => 1.0,
            TurnDirection::Clockwise => -1.0,
        }
    }
}

/// Planar airspace definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub faf: Point,
    /// RF turn radius, NM.
    pub turn_radius: f64,
    pub gates: BTreeMap<String, Point>,
    /// Upper bound on the Baseleg extension, NM.
    pub d_max: f64,
    /// Radius of the terminal boundary circle around the runway threshold.
    /// Only used for drawing.
    #[serde(default = "default_tcp_radius")]
    pub tcp_radius: f64,
}

fn default_tcp_radius() -> f64 {
    30.0
}

impl Default for GeometryConfig {
    /// Runway threshold at the origin, final course along +x, FAF 5 NM out,
    /// four feeder gates on the 45 degree points of a 30 NM circle.
    fn default() -> Self {
        let g = 21.21;
        let gates = [
            ("DALAS", Point::new(-g, g)),
            ("LOGEN", Point::new(g, g)),
            ("HUSKY", Point::new(g, -g)),
            ("TIROE", Point::new(-g, -g)),
        ]
        .into_iter()
        .map(|(name, p)| (name.to_string(), p))
        .collect();
        Self { faf: Point::new(-5.0, 0.0), turn_radius: 2.0, gates, d_max: 15.0, tcp_radius: default_tcp_radius() }
    }
}

impl GeometryConfig {
    /// Checks the radius, the extension bound, the band condition for every
    /// gate, and tangent existence on a grid over `[0, d_max]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.turn_radius.is_finite() && self.turn_radius > 0.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "turn_radius must be positive, got {}",
                self.turn_radius
            )));
        }
        if !(self.d_max.is_finite() && self.d_max >= 0.0) {
            return Err(GeometryError::InvalidConfig(format!("d_max must be non-negative, got {}", self.d_max)));
        }
        if !self.faf.is_finite() {
            return Err(GeometryError::InvalidConfig("faf must be finite".into()));
        }
        if self.gates.is_empty() {
            return Err(GeometryError::InvalidConfig("no feeder gates configured".into()));
        }
        for (name, &gate) in &self.gates {
            if !gate.is_finite() {
                return Err(GeometryError::InvalidConfig(format!("gate {name} is not finite")));
            }
            self.check_entry(gate, self.d_max)?;
        }
        Ok(())
    }

    /// Band test plus tangent existence on a grid over `[0, d_max]`.
    pub fn check_entry(&self, entry: Point, d_max: f64) -> Result<()> {
        self.side(entry)?;
        for k in 0..CONFIG_GRID_POINTS {
            let d = d_max * k as f64 / (CONFIG_GRID_POINTS - 1) as f64;
            let (center, _) = turn_center(self, entry, d)?;
            check_clearance(entry.distance(center), self.turn_radius)?;
        }
        Ok(())
    }

    /// Band test: which branch of the turn-center placement applies.
    pub fn side(&self, entry: Point) -> Result<ApproachSide> {
        let r = self.turn_radius;
        if entry.y > self.faf.y + r {
            Ok(ApproachSide::North)
        } else if entry.y < self.faf.y - r {
            Ok(ApproachSide::South)
        } else {
            Err(GeometryError::InsideBand { x: entry.x, y: entry.y })
        }
    }

    pub fn gate(&self, name: &str) -> Option<Point> {
        self.gates.get(name).copied()
    }
}

fn check_clearance(center_distance: f64, radius: f64) -> Result<()> {
    if center_distance > radius + SINGULARITY_EPS {
        Ok(())
    } else {
        Err(GeometryError::NoTangent { distance: center_distance, radius })
    }
}

/// Segment speeds in knots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedProfile {
    pub v_l: f64,
    pub v_theta: f64,
    pub v_f: f64,
}

impl SpeedProfile {
    pub const fn new(v_l: f64, v_theta: f64, v_f: f64) -> Self {
        Self { v_l, v_theta, v_f }
    }

    /// Speeds decrease from the tangent leg to final.
    pub fn is_monotone(&self) -> bool {
        self.v_l >= self.v_theta && self.v_theta >= self.v_f && self.v_f > 0.0
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.v_l * k, self.v_theta * k, self.v_f * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGeometry {
    pub entry: Point,
    pub side: ApproachSide,
    pub turn_center: Point,
    pub reference_projection: Point,
    pub tangent_point: Point,
    pub d_l: f64,
    /// Arc angle in radians, in `[0, 2π)`.
    pub theta: f64,
    pub d_theta: f64,
    pub d_final: f64,
    pub total_length: f64,
}

impl PathGeometry {
    pub fn turn(&self) -> TurnDirection {
        self.side.turn()
    }

    /// Position after flying `s` NM along the path, clamped to `[0, total_length]`.
    pub fn point_at_distance(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.total_length);
        if s <= self.d_l {
            if self.d_l == 0.0 {
                return self.entry;
            }
            return self.entry + (self.tangent_point - self.entry) * (s / self.d_l);
        }
        let s = s - self.d_l;
        if s <= self.d_theta {
            let r = self.d_theta_radius();
            let radial = self.tangent_point - self.turn_center;
            let phi = radial.y.atan2(radial.x) + self.turn().sign() * s / r;
            return self.turn_center + Point::new(phi.cos(), phi.sin()) * r;
        }
        let s = (s - self.d_theta).min(self.d_final);
        self.reference_projection + Point::new(s, 0.0)
    }

    fn d_theta_radius(&self) -> f64 {
        (self.tangent_point - self.turn_center).norm()
    }
}

/// Turn center and its projection onto the final course.
pub fn turn_center(config: &GeometryConfig, entry: Point, d: f64) -> Result<(Point, Point)> {
    let side = config.side(entry)?;
    let x = config.faf.x - d;
    let center = Point::new(x, config.faf.y + side.sign() * config.turn_radius);
    Ok((center, Point::new(x, config.faf.y)))
}

/// Left tangent point on the turn circle, in closed form.
pub fn tangent_point(config: &GeometryConfig, entry: Point, d: f64) -> Result<Point> {
    let side = config.side(entry)?;
    let (center, _) = turn_center(config, entry, d)?;
    closed_form_tangent(side, center, entry, config.turn_radius)
}

fn closed_form_tangent(side: ApproachSide, center: Point, entry: Point, r: f64) -> Result<Point> {
    let v = entry - center;
    let d0_sq = v.dot(v);
    check_clearance(d0_sq.sqrt(), r)?;
    let a = r * r / d0_sq;
    let b = r * (d0_sq - r * r).sqrt() / d0_sq;
    Ok(center + v * a + v.perp() * (side.sign() * b))
}

/// Arc angle from the tangent point to the final-course intercept.
///
/// The short arc comes from the two radius vectors. When the inbound tangent
/// heading disagrees with the direction of that short arc, the aircraft has
/// to go the long way round and the reflex angle is returned instead.
pub fn rf_angle(config: &GeometryConfig, entry: Point, d: f64) -> Result<f64> {
    let side = config.side(entry)?;
    let (center, _) = turn_center(config, entry, d)?;
    let tangent = closed_form_tangent(side, center, entry, config.turn_radius)?;
    Ok(arc_angle(side, center, tangent, entry))
}

/// Short-arc angle between the tangent radius and the intercept radius, in `[0, π]`.
pub fn short_arc_angle(side: ApproachSide, center: Point, tangent: Point) -> f64 {
    let dx = tangent.x - center.x;
    let dy = tangent.y - center.y;
    dx.abs().atan2(-side.sign() * dy)
}

fn arc_angle(side: ApproachSide, center: Point, tangent: Point, entry: Point) -> f64 {
    let short = short_arc_angle(side, center, tangent);
    let radial = tangent - center;
    let exit_radial = Point::new(0.0, -side.sign() * radial.norm());
    // +1 when the short arc runs counter-clockwise from the tangent point.
    let orientation = radial.cross(exit_radial);
    if orientation == 0.0 {
        return short;
    }
    let arc_heading = radial.perp() * orientation.signum();
    let inbound = tangent - entry;
    if inbound.dot(arc_heading) <= 0.0 {
        TAU - short
    } else {
        short
    }
}

pub fn path_geometry(config: &GeometryConfig, entry: Point, d: f64) -> Result<PathGeometry> {
    let side = config.side(entry)?;
    let r = config.turn_radius;
    let (center, projection) = turn_center(config, entry, d)?;
    let tangent = closed_form_tangent(side, center, entry, r)?;
    let d0_sq = (entry - center).dot(entry - center);
    let d_l = (d0_sq - r * r).max(0.0).sqrt();
    let theta = arc_angle(side, center, tangent, entry);
    let d_theta = r * theta;
    Ok(PathGeometry {
        entry,
        side,
        turn_center: center,
        reference_projection: projection,
        tangent_point: tangent,
        d_l,
        theta,
        d_theta,
        d_final: d,
        total_length: d_l + d_theta + d,
    })
}

/// Seconds needed to fly each segment at the given speeds.
pub fn segment_times(path: &PathGeometry, speeds: &SpeedProfile) -> [f64; 3] {
    [
        SECONDS_PER_HOUR * path.d_l / speeds.v_l,
        SECONDS_PER_HOUR * path.d_theta / speeds.v_theta,
        SECONDS_PER_HOUR * path.d_final / speeds.v_f,
    ]
}

/// Elapsed seconds from the entry point to the FAF.
pub fn travel_time(config: &GeometryConfig, entry: Point, d: f64, speeds: &SpeedProfile) -> Result<f64> {
    let path = path_geometry(config, entry, d)?;
    Ok(segment_times(&path, speeds).iter().sum())
}

/// Partial derivatives of the elapsed time, seconds per NM and seconds per knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelTimeGradient {
    pub d: f64,
    pub v_l: f64,
    pub v_theta: f64,
    pub v_f: f64,
}

/// Elapsed time together with its analytic gradient.
pub fn travel_time_with_gradient(
    config: &GeometryConfig,
    entry: Point,
    d: f64,
    speeds: &SpeedProfile,
) -> Result<(f64, TravelTimeGradient)> {
    let path = path_geometry(config, entry, d)?;
    let r = config.turn_radius;
    let v = entry - path.turn_center;
    let d0_sq = v.dot(v);
    let clearance = d0_sq.sqrt() - r;
    if clearance < SINGULARITY_EPS {
        return Err(GeometryError::NearTangency { clearance });
    }
    // Moving the center west by dd shifts v by (+dd, 0).
    let dd_l = v.x / path.d_l;
    let dtheta = path.turn().sign() * v.y / d0_sq - r * v.x / (d0_sq * path.d_l);

    let h = SECONDS_PER_HOUR;
    let time = segment_times(&path, speeds).iter().sum();
    let grad = TravelTimeGradient {
        d: h * (dd_l / speeds.v_l + r * dtheta / speeds.v_theta + 1.0 / speeds.v_f),
        v_l: -h * path.d_l / (speeds.v_l * speeds.v_l),
        v_theta: -h * path.d_theta / (speeds.v_theta * speeds.v_theta),
        v_f: -h * path.d_final / (speeds.v_f * speeds.v_f),
    };
    Ok((time, grad))
}

pub fn travel_time_gradient(
    config: &GeometryConfig,
    entry: Point,
    d: f64,
    speeds: &SpeedProfile,
) -> Result<TravelTimeGradient> {
    travel_time_with_gradient(config, entry, d, speeds).map(|(_, g)| g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: Point,
}

/// Position `elapsed` seconds after entry. Clamped to the entry point before
/// zero and to the FAF after arrival.
pub fn position_at_time(path: &PathGeometry, speeds: &SpeedProfile, elapsed: f64) -> Point {
    let [t_l, t_theta, _] = segment_times(path, speeds);
    let h = SECONDS_PER_HOUR;
    let s = if elapsed <= 0.0 {
        0.0
    } else if elapsed <= t_l {
        elapsed * speeds.v_l / h
    } else if elapsed <= t_l + t_theta {
        path.d_l + (elapsed - t_l) * speeds.v_theta / h
    } else {
        path.d_l + path.d_theta + (elapsed - t_l - t_theta) * speeds.v_f / h
    };
    path.point_at_distance(s)
}

/// Samples the flight every `dt` seconds from entry; the last sample is at
/// the FAF at the exact arrival time.
pub fn sample_trajectory(
    config: &GeometryConfig,
    entry: Point,
    d: f64,
    speeds: &SpeedProfile,
    dt: f64,
) -> Result<Vec<TrajectorySample>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GeometryError::InvalidConfig(format!("sample interval must be positive, got {dt}")));
    }
    let path = path_geometry(config, entry, d)?;
    let total: f64 = segment_times(&path, speeds).iter().sum();
    let steps = (total / dt).ceil() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..steps {
        let time = k as f64 * dt;
        if time >= total {
            break;
        }
        samples.push(TrajectorySample { time, position: position_at_time(&path, speeds, time) });
    }
    samples.push(TrajectorySample { time: total, position: path.point_at_distance(path.total_length) });
    Ok(samples)
}
