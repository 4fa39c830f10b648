//! Hand centroid extraction from sparse images and the low-pass track history.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::thermal_io::FrameShape;

/// Default blob threshold on normalized sparse magnitudes.
pub const DEFAULT_BLOB_THRESHOLD: f64 = 0.1;

/// Pixel position; `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
}

impl Centroid {
    pub fn new(x: f64, y: f64) -> Self {
        Centroid { x, y }
    }
}

struct Component {
    pixels: Vec<usize>,
    mass: f64,
}

/// Centroid of the dominant blob in a sparse frame.
///
/// Pixels with `|s| > theta_blob` are grouped into 4-connected components.
/// The component with most pixels wins, then the larger summed `|s|`, then
/// the one whose first pixel comes earlier in row-major order. Returns the
/// `|s|`-weighted mean position of the winner, or `None` if no pixel passes.
pub fn extract_centroid(sparse: &[f64], shape: FrameShape, theta_blob: f64) -> Option<Centroid> {
    assert_eq!(sparse.len(), shape.pixels(), "sparse frame size mismatch");
    let (h, w) = (shape.height, shape.width);
    let on: Vec<bool> = sparse.iter().map(|v| v.abs() > theta_blob).collect();
    let mut seen = vec![false; on.len()];
    let mut best: Option<Component> = None;
    let mut stack = Vec::new();

    for start in 0..on.len() {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Component {
            pixels: Vec::new(),
            mass: 0.0,
        };
        while let Some(p) = stack.pop() {
            comp.pixels.push(p);
            comp.mass += sparse[p].abs();
            let (y, x) = (p / w, p % w);
            let mut visit = |q: usize| {
                if on[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
        }
        // strict comparison keeps the earlier component on a full tie
        let better = match &best {
            None => true,
            Some(b) => {
                comp.pixels.len() > b.pixels.len()
                    || (comp.pixels.len() == b.pixels.len() && comp.mass > b.mass)
            }
        };
        if better {
            best = Some(comp);
        }
    }

    let comp = best?;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &p in &comp.pixels {
        let m = sparse[p].abs();
        sx += m * (p % w) as f64;
        sy += m * (p / w) as f64;
    }
    Some(Centroid::new(sx / comp.mass, sy / comp.mass))
}

/// One registered track entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub k: usize,
    pub raw: Centroid,
    pub filtered: Centroid,
}

/// Bounded history of exponentially smoothed centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct GestureTrack {
    capacity: usize,
    beta: f64,
    points: VecDeque<TrackPoint>,
    state: Option<Centroid>,
    misses: usize,
}

impl GestureTrack {
    /// `capacity` is the track length, `beta` the filter decay in `[0, 1]`.
    pub fn new(capacity: usize, beta: f64) -> Self {
        assert!(capacity > 0, "track length must be positive");
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
        GestureTrack {
            capacity,
            beta,
            points: VecDeque::with_capacity(capacity),
            state: None,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.points.len() == self.capacity
    }

    pub fn points(&self) -> impl Iterator<Item = &TrackPoint> {
        self.points.iter()
    }

    pub fn filtered_points(&self) -> Vec<Centroid> {
        self.points.iter().map(|p| p.filtered).collect()
    }

    /// Last filtered point.
    pub fn lowpass_state(&self) -> Option<Centroid> {
        self.state
    }

    /// Consecutive frames without a centroid since the last update.
    pub fn misses(&self) -> usize {
        self.misses
    }

    /// Registers a raw centroid observed at frame `k` and returns the filtered point.
    ///
    /// The first centroid seeds the filter as-is.
    pub fn update(&mut self, k: usize, raw: Centroid) -> Centroid {
        let filtered = match self.state {
            None => raw,
            Some(prev) => lowpass(prev, raw, self.beta),
        };
        self.state = Some(filtered);
        self.misses = 0;
        if self.points.len() == self.capacity {
            self.points.pop_front();
        }
        self.points.push_back(TrackPoint { k, raw, filtered });
        filtered
    }

    /// Records a frame with no centroid; returns the current run of misses.
    pub fn mark_absent(&mut self) -> usize {
        self.misses += 1;
        self.misses
    }

    pub fn reset(&mut self) {
        self.points.clear();
        self.state = None;
        self.misses = 0;
    }

    /// Writes `k,x_raw,y_raw,x_filt,y_filt` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,x_raw,y_raw,x_filt,y_filt")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.k, p.raw.x, p.raw.y, p.filtered.x, p.filtered.y
            )?;
        }
        Ok(())
    }
}

/// One step of the smoothing filter, `beta * prev + (1 - beta) * p`.
pub fn lowpass(prev: Centroid, p: Centroid, beta: f64) -> Centroid {
    Centroid::new(
        beta * prev.x + (1.0 - beta) * p.x,
        beta * prev.y + (1.0 - beta) * p.y,
    )
}
