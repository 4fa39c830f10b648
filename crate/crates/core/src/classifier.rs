//! Rule-based classification of a finished hand track.
//!
//! Coordinates are image coordinates: `x` is the column (rightward) and `y`
//! the row (downward). The angle of each point is `atan2(y - mean_y, x - mean_x)`
//! and a circle is clockwise when that angle decreases over the track.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracker::{Centroid, GestureTrack};

/// Shortest track the features are defined for.
pub const MIN_TRACK_LEN: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("track has {0} points, need at least {MIN_TRACK_LEN}")]
    TrackTooShort(usize),
    #[error("thresholds must be positive, got theta_c1={0} theta_c2={1}")]
    InvalidThreshold(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureClass {
    NoGesture,
    CirCw,
    CirCcw,
    Vertical,
    Horizontal,
}

impl GestureClass {
    /// Confusion-matrix order.
    pub const ALL: [GestureClass; 5] = [
        GestureClass::NoGesture,
        GestureClass::CirCw,
        GestureClass::CirCcw,
        GestureClass::Vertical,
        GestureClass::Horizontal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_circular(self) -> bool {
        matches!(self, GestureClass::CirCw | GestureClass::CirCcw)
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::NoGesture => "no-gesture",
            GestureClass::CirCw => "circular-cw",
            GestureClass::CirCcw => "circular-ccw",
            GestureClass::Vertical => "vertical",
            GestureClass::Horizontal => "horizontal",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown gesture class {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackFeatures {
    pub extent_x: f64,
    pub extent_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    /// Sum of unwrapped angle increments about the track mean, radians.
    pub angle_trend: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn population_variance(values: impl Iterator<Item = f64> + Clone, mean: f64) -> f64 {
    let n = values.clone().count() as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn features(points: &[Centroid]) -> Result<TrackFeatures, ClassifyError> {
    if points.len() < MIN_TRACK_LEN {
        return Err(ClassifyError::TrackTooShort(points.len()));
    }
    let n = points.len() as f64;
    let xs = points.iter().map(|p| p.x);
    let ys = points.iter().map(|p| p.y);
    let extent = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        hi - lo
    };
    let extent_x = extent(&mut xs.clone());
    let extent_y = extent(&mut ys.clone());
    let mean_x = xs.clone().sum::<f64>() / n;
    let mean_y = ys.clone().sum::<f64>() / n;
    let var_x = population_variance(xs, mean_x);
    let var_y = population_variance(ys, mean_y);

    let angles: Vec<f64> = points
        .iter()
        .map(|p| (p.y - mean_y).atan2(p.x - mean_x))
        .collect();
    let angle_trend = angles.windows(2).map(|w| wrap_angle(w[1] - w[0])).sum();

    Ok(TrackFeatures {
        extent_x,
        extent_y,
        var_x,
        var_y,
        angle_trend,
    })
}

/// Applies the circular / vertical / horizontal rules to precomputed features.
pub fn classify_features(f: &TrackFeatures, theta_c1: f64, theta_c2: f64) -> GestureClass {
    let circular =
        (f.extent_x - f.extent_y).abs() < theta_c1 && f.extent_x.min(f.extent_y) > theta_c2;
    if circular {
        if f.angle_trend < 0.0 {
            GestureClass::CirCw
        } else {
            GestureClass::CirCcw
        }
    } else if f.var_y > f.var_x {
        GestureClass::Vertical
    } else {
        GestureClass::Horizontal
    }
}

pub fn classify_points(
    points: &[Centroid],
    theta_c1: f64,
    theta_c2: f64,
) -> Result<GestureClass, ClassifyError> {
    if !(theta_c1 > 0.0 && theta_c2 > 0.0) {
        return Err(ClassifyError::InvalidThreshold(theta_c1, theta_c2));
    }
    Ok(classify_features(&features(points)?, theta_c1, theta_c2))
}

pub fn classify_track(
    track: &GestureTrack,
    theta_c1: f64,
    theta_c2: f64,
) -> Result<GestureClass, ClassifyError> {
    classify_points(&track.filtered_points(), theta_c1, theta_c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn circle(n: usize, radius: f64, clockwise: bool) -> Vec<Centroid> {
        let dir = if clockwise { -1.0 } else { 1.0 };
        (0..n)
            .map(|k| {
                let a = dir * 2.0 * PI * k as f64 / n as f64;
                Centroid::new(16.0 + radius * a.cos(), 12.0 + radius * a.sin())
            })
            .collect()
    }

    #[test]
    fn circle_features() {
        let f = features(&circle(10, 6.0, true)).unwrap();
        // cos spans [-1, 1]; sin over multiples of 36 degrees peaks at sin(72deg).
        assert_relative_eq!(f.extent_x, 12.0, epsilon = 1e-12);
        assert_relative_eq!(
            f.extent_y,
            12.0 * (72f64).to_radians().sin(),
            epsilon = 1e-12
        );
        assert_relative_eq!(f.angle_trend, -2.0 * PI * 0.9, epsilon = 1e-12);
        assert_eq!(classify_features(&f, 5.0, 5.0), GestureClass::CirCw);
        let ccw = classify_points(&circle(10, 6.0, false), 5.0, 5.0).unwrap();
        assert_eq!(ccw, GestureClass::CirCcw);
    }

    #[test]
    fn line_tracks() {
        let vertical: Vec<_> = (0..10).map(|y| Centroid::new(3.0, y as f64)).collect();
        let f = features(&vertical).unwrap();
        assert_eq!((f.extent_x, f.extent_y, f.var_x), (0.0, 9.0, 0.0));
        assert!(f.var_y > 0.0);
        assert_eq!(classify_features(&f, 5.0, 5.0), GestureClass::Vertical);

        let horizontal: Vec<_> = (0..10).map(|x| Centroid::new(x as f64, 4.0)).collect();
        assert_eq!(
            classify_points(&horizontal, 5.0, 5.0).unwrap(),
            GestureClass::Horizontal
        );
    }

    #[test]
    fn degenerate_and_short_tracks() {
        let same = vec![Centroid::new(2.0, 2.0); 3];
        let f = features(&same).unwrap();
        assert_eq!(
            (f.extent_x, f.extent_y, f.var_x, f.var_y),
            (0.0, 0.0, 0.0, 0.0)
        );
        // equal variances fall through to horizontal
        assert_eq!(classify_features(&f, 5.0, 5.0), GestureClass::Horizontal);
        assert_eq!(
            features(&same[..2]).unwrap_err(),
            ClassifyError::TrackTooShort(2)
        );
        assert!(classify_points(&same, 0.0, 5.0).is_err());
    }

    #[test]
    fn zero_trend_circle_is_counter_clockwise() {
        let f = TrackFeatures {
            extent_x: 10.0,
            extent_y: 10.0,
            var_x: 1.0,
            var_y: 1.0,
            angle_trend: 0.0,
        };
        assert_eq!(classify_features(&f, 5.0, 5.0), GestureClass::CirCcw);
    }

    #[test]
    fn class_names_round_trip() {
        for c in GestureClass::ALL {
            assert_eq!(c.name().parse::<GestureClass>().unwrap(), c);
            assert_eq!(GestureClass::from_index(c.index()), Some(c));
        }
    }
}
