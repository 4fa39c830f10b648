//! Synthetic in-cabin thermal scenes.
//!
//! A static background (cabin air, a warm torso and head) plus Gaussian
//! pixel noise, optionally with a warm hand blob tracing one of the four
//! gesture paths. Noise is specified relative to the background's dynamic
//! range, so `noise_sigma = 0.02` is 2% of a normalized idle window.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::GestureClass;
use crate::thermal_io::{
    window_at, Acquisition, Daypart, GestureLabel, ThermalError, ThermalFrame, SENSOR_HEIGHT,
    SENSOR_PIXELS, SENSOR_WIDTH,
};
use crate::train::Sample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Pixel noise standard deviation as a fraction of the background range.
    pub noise_sigma: f64,
    /// Hand temperature above the local background, Celsius.
    pub blob_amplitude: f64,
    /// Gaussian radius of the hand blob in pixels.
    pub blob_sigma: f64,
    /// Static frames before the hand appears.
    pub lead_in: usize,
    /// Frames spent performing one gesture.
    pub gesture_frames: usize,
    /// Static frames after the hand leaves.
    pub tail: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            noise_sigma: 0.02,
            blob_amplitude: 8.0,
            blob_sigma: 1.5,
            lead_in: 8,
            gesture_frames: 12,
            tail: 8,
        }
    }
}

impl SceneConfig {
    pub fn sequence_len(&self) -> usize {
        self.lead_in + self.gesture_frames + self.tail
    }
}

/// Gaussian heat source.
#[derive(Clone, Copy, Debug)]
struct Blob {
    x: f64,
    y: f64,
    sx: f64,
    sy: f64,
    amp: f64,
}

impl Blob {
    fn draw(&self, px: &mut [f64]) {
        gaussian_bump(px, self.x, self.y, self.sx, self.sy, self.amp);
    }
}

/// Deterministic scene source; identical seeds give identical scenes.
pub struct SceneGenerator {
    cfg: SceneConfig,
    rng: ChaCha8Rng,
    counter: usize,
}

fn gaussian_bump(px: &mut [f64], cx: f64, cy: f64, sx: f64, sy: f64, amp: f64) {
    for y in 0..SENSOR_HEIGHT {
        for x in 0..SENSOR_WIDTH {
            let dx = (x as f64 - cx) / sx;
            let dy = (y as f64 - cy) / sy;
            px[y * SENSOR_WIDTH + x] += amp * (-0.5 * (dx * dx + dy * dy)).exp();
        }
    }
}

impl SceneGenerator {
    pub fn new(seed: u64) -> Self {
        Self::with_config(SceneConfig::default(), seed)
    }

    pub fn with_config(cfg: SceneConfig, seed: u64) -> Self {
        SceneGenerator {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        }
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    /// Noise-free cabin background in Celsius.
    pub fn background(&mut self) -> Vec<f64> {
        let (mut px, head) = self.cabin();
        head.draw(&mut px);
        px
    }

    /// Background without the head, plus the head as a separate blob.
    fn cabin(&mut self) -> (Vec<f64>, Blob) {
        let base = 21.0 + self.rng.random_range(-2.0..2.0);
        let mut px: Vec<f64> = (0..SENSOR_PIXELS)
            .map(|p| base + 0.04 * (p / SENSOR_WIDTH) as f64)
            .collect();
        let torso_x = 16.0 + self.rng.random_range(-2.0..2.0);
        gaussian_bump(
            &mut px,
            torso_x,
            23.0,
            7.0,
            4.0,
            6.0 + self.rng.random_range(-1.0..1.0),
        );
        let head = Blob {
            x: 26.0 + self.rng.random_range(-1.5..1.5),
            y: 7.0,
            sx: 2.5,
            sy: 3.0,
            amp: 7.0 + self.rng.random_range(-1.0..1.0),
        };
        (px, head)
    }

    /// An idle scene in which the occupant's head sways sideways: motion
    /// that is not a gesture.
    pub fn fidget_frames(&mut self) -> Vec<ThermalFrame> {
        let (px, head) = self.cabin();
        let n = self.cfg.sequence_len();
        let mut range_ref = px.clone();
        head.draw(&mut range_ref);
        let frames: Vec<Vec<Blob>> = (0..n)
            .map(|t| {
                let dx = 3.0 * (2.0 * PI * t as f64 / 16.0).sin();
                vec![Blob {
                    x: head.x - 1.5 + dx,
                    ..head
                }]
            })
            .collect();
        self.render_blobs(&px, &range_ref, &frames)
    }

    /// Hand centres for each gesture frame, `(x, y)` in pixels.
    ///
    /// Circles turn by one full revolution; `CirCw` has a decreasing
    /// `atan2(y, x)` angle in image coordinates. Vertical and horizontal
    /// gestures sweep out and back once.
    pub fn path(&mut self, class: GestureClass) -> Vec<(f64, f64)> {
        let n = self.cfg.gesture_frames;
        let cx = 15.5 + self.rng.random_range(-1.5..1.5);
        let cy = 10.5 + self.rng.random_range(-1.0..1.0);
        let phase = self.rng.random_range(0.0..2.0 * PI);
        let jitter = Normal::new(0.0, 0.25).unwrap();
        let mut pts: Vec<(f64, f64)> = match class {
            GestureClass::CirCw | GestureClass::CirCcw => {
                let r = self.rng.random_range(5.5..7.0);
                let dir = if class == GestureClass::CirCw {
                    -1.0
                } else {
                    1.0
                };
                (0..n)
                    .map(|t| {
                        let a = phase + dir * 2.0 * PI * t as f64 / n as f64;
                        (cx + r * a.cos(), cy + r * a.sin())
                    })
                    .collect()
            }
            GestureClass::Vertical => {
                let amp = self.rng.random_range(6.0..8.0);
                (0..n)
                    .map(|t| (cx, cy - amp * (2.0 * PI * t as f64 / n as f64).cos()))
                    .collect()
            }
            GestureClass::Horizontal => {
                let amp = self.rng.random_range(8.0..11.0);
                (0..n)
                    .map(|t| (cx + amp * (2.0 * PI * t as f64 / n as f64).cos(), cy))
                    .collect()
            }
            GestureClass::NoGesture => Vec::new(),
        };
        for p in &mut pts {
            p.0 = (p.0 + jitter.sample(&mut self.rng)).clamp(1.0, SENSOR_WIDTH as f64 - 2.0);
            p.1 = (p.1 + jitter.sample(&mut self.rng)).clamp(1.0, SENSOR_HEIGHT as f64 - 2.0);
        }
        pts
    }

    fn render(&mut self, background: &[f64], hands: &[Option<(f64, f64)>]) -> Vec<ThermalFrame> {
        let s = self.cfg.blob_sigma;
        let amp = self.cfg.blob_amplitude;
        let blobs: Vec<Vec<Blob>> = hands
            .iter()
            .map(|h| {
                h.iter()
                    .map(|&(x, y)| Blob {
                        x,
                        y,
                        sx: s,
                        sy: s,
                        amp,
                    })
                    .collect()
            })
            .collect();
        self.render_blobs(background, background, &blobs)
    }

    /// Noise is scaled to the range of `range_ref`, the idle scene.
    fn render_blobs(
        &mut self,
        background: &[f64],
        range_ref: &[f64],
        blobs: &[Vec<Blob>],
    ) -> Vec<ThermalFrame> {
        let (lo, hi) = range_ref
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        let noise = Normal::new(0.0, self.cfg.noise_sigma * (hi - lo)).unwrap();
        blobs
            .iter()
            .enumerate()
            .map(|(i, frame_blobs)| {
                let mut px = background.to_vec();
                for b in frame_blobs {
                    b.draw(&mut px);
                }
                for v in &mut px {
                    *v += noise.sample(&mut self.rng);
                }
                ThermalFrame::new(px, i).expect("synthetic frame is well formed")
            })
            .collect()
    }

    /// Frames of one sequence: lead-in, one gesture (absent for `NoGesture`), tail.
    pub fn frames(&mut self, class: GestureClass) -> Vec<ThermalFrame> {
        self.frames_with_hands(class).0
    }

    /// Like [`SceneGenerator::frames`], plus the hand center drawn in each frame.
    pub fn frames_with_hands(
        &mut self,
        class: GestureClass,
    ) -> (Vec<ThermalFrame>, Vec<Option<(f64, f64)>>) {
        let background = self.background();
        let path = self.path(class);
        let mut hands = vec![None; self.cfg.lead_in];
        if class == GestureClass::NoGesture {
            hands.extend(std::iter::repeat_n(None, self.cfg.gesture_frames));
        } else {
            hands.extend(path.into_iter().map(Some));
        }
        hands.extend(std::iter::repeat_n(None, self.cfg.tail));
        (self.render(&background, &hands), hands)
    }

    /// One labeled single-gesture acquisition.
    pub fn sequence(&mut self, class: GestureClass, daypart: Daypart) -> Acquisition {
        let frames = self.frames(class);
        self.counter += 1;
        let name = format!(
            "{}-gesture-{}-synth{:04}",
            GestureLabel::from_class(class).prefix(),
            daypart.suffix(),
            self.counter
        );
        Acquisition::new(name, frames).expect("synthetic acquisition is well formed")
    }

    /// Several gestures (or idle spans) in one stream separated by `gap` static frames.
    pub fn concatenated(&mut self, classes: &[GestureClass], gap: usize) -> Vec<ThermalFrame> {
        let background = self.background();
        let mut hands: Vec<Option<(f64, f64)>> = vec![None; self.cfg.lead_in];
        for (i, &class) in classes.iter().enumerate() {
            if i > 0 {
                hands.extend(std::iter::repeat_n(None, gap));
            }
            if class == GestureClass::NoGesture {
                hands.extend(std::iter::repeat_n(None, self.cfg.gesture_frames));
            } else {
                let path = self.path(class);
                hands.extend(path.into_iter().map(Some));
            }
        }
        hands.extend(std::iter::repeat_n(None, self.cfg.tail));
        self.render(&background, &hands)
    }

    /// `per_class` sequences of each gesture class plus `per_class` idle ones.
    pub fn suite(&mut self, per_class: usize) -> Vec<Acquisition> {
        let mut out = Vec::with_capacity(per_class * GestureClass::ALL.len());
        for class in GestureClass::ALL {
            for _ in 0..per_class {
                out.push(self.sequence(class, Daypart::Morning));
            }
        }
        out
    }

    /// Frame indices `k` whose window ends on a frame showing the moving hand.
    pub fn motion_window_ends(&self) -> std::ops::Range<usize> {
        self.cfg.lead_in..self.cfg.lead_in + self.cfg.gesture_frames
    }
}

/// Balanced wake-up dataset of `n` encoded windows: label 1 windows end on
/// a frame with the moving hand, label 0 windows come from idle scenes.
pub fn detection_samples(
    seed: u64,
    n: usize,
    n_c: usize,
    theta_s: f64,
) -> Result<Vec<Sample>, ThermalError> {
    let mut gen = SceneGenerator::new(seed);
    let mut pick = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let gestures = &GestureClass::ALL[1..];
    (0..n)
        .map(|i| {
            let positive = i % 2 == 1;
            let (class, k) = if positive {
                let class = gestures[pick.random_range(0..gestures.len())];
                (class, pick.random_range(gen.motion_window_ends()))
            } else {
                let len = gen.config().sequence_len();
                (GestureClass::NoGesture, pick.random_range(n_c - 1..len))
            };
            let frames = gen.frames(class);
            let raster = window_at(&frames, k, n_c)?.encode(theta_s)?;
            Ok(Sample {
                raster,
                label: usize::from(positive),
            })
        })
        .collect()
}

/// Single-window five-class dataset (labels are [`GestureClass::index`]),
/// `per_class` windows per class.
pub fn class_samples(
    seed: u64,
    per_class: usize,
    n_c: usize,
    theta_s: f64,
) -> Result<Vec<Sample>, ThermalError> {
    let mut gen = SceneGenerator::new(seed);
    let mut pick = ChaCha8Rng::seed_from_u64(seed ^ 0x51_7cc1_b727_220a);
    let mut out = Vec::with_capacity(per_class * GestureClass::ALL.len());
    for _ in 0..per_class {
        for class in GestureClass::ALL {
            let frames = gen.frames(class);
            let k = if class == GestureClass::NoGesture {
                pick.random_range(n_c - 1..frames.len())
            } else {
                pick.random_range(gen.motion_window_ends())
            };
            out.push(Sample {
                raster: window_at(&frames, k, n_c)?.encode(theta_s)?,
                label: class.index(),
            });
        }
    }
    Ok(out)
}
