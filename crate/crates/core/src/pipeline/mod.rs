//! The two-stage recognizer: an always-on MMV wake-up detector gating
//! R-PCA segmentation, centroid tracking and rule-based classification.
//!
//! Per frame index `k` (once `N_c` frames are available) the stream runs:
//!
//! * **Sleep**: only the detector runs. A positive window wakes the system.
//! * **Tracking**: each positive window is decomposed by R-PCA; the hand
//!   centroid of the newest sparse frame extends the track. A full track is
//!   classified and emitted, then the stream cools down. `N_gap` quiet
//!   windows in a row (negative, or positive without a blob) close the track
//!   early; it is still classified if it holds at least three points.
//! * **Cooldown**: the same gesture keeps the detector busy after its track
//!   filled; nothing is recorded until `N_gap` quiet windows pass.

pub mod cost;
pub mod eval;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{classify_track, ClassifyError, GestureClass, MIN_TRACK_LEN};
use crate::mmv::{MmvError, MmvNetwork};
use crate::rpca::{pcp, RpcaConfig, RpcaError};
use crate::thermal_io::{window_at, FrameShape, ThermalError, ThermalFrame, ThermalWindow};
use crate::tracker::{extract_centroid, Centroid, GestureTrack, DEFAULT_BLOB_THRESHOLD};

pub use cost::{
    avg_flops, count_params, flops_svd, mmv_ops_per_frame, param_bytes, rpca_ops_per_gesture,
    CostAssumptions, CostReport, ParamCount,
};
pub use eval::{evaluate, protocol_split, AcquisitionResult, EvaluationReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Mmv(#[from] MmvError),
    #[error(transparent)]
    Rpca(#[from] RpcaError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("nothing to evaluate")]
    EmptyDataset,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// System hyper-parameters; defaults are the reference operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Frames per window.
    pub n_c: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    /// Track length.
    pub track_len: usize,
    /// Low-pass decay.
    pub beta: f64,
    /// Spike threshold on normalized frame differences.
    pub theta_s: f64,
    /// Circularity tolerance on `|D_x - D_y|`.
    pub theta_c1: f64,
    /// Minimum extent of a circle.
    pub theta_c2: f64,
    /// R-PCA sparsity weight.
    pub lambda: f64,
    pub theta_blob: f64,
    /// Quiet windows that close a track or end a wake episode.
    pub n_gap: usize,
    pub rpca_max_iter: usize,
    pub rpca_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_c: 5,
            frame_height: 24,
            frame_width: 32,
            track_len: 10,
            beta: 0.5,
            theta_s: 0.2,
            theta_c1: 5.0,
            theta_c2: 5.0,
            lambda: 0.05,
            theta_blob: DEFAULT_BLOB_THRESHOLD,
            n_gap: 3,
            rpca_max_iter: 100,
            rpca_tol: 1e-7,
        }
    }
}

impl PipelineConfig {
    pub fn shape(&self) -> FrameShape {
        FrameShape::new(self.frame_height, self.frame_width)
    }

    /// MMV time steps per window.
    pub fn steps(&self) -> usize {
        (self.n_c - 1) * self.frame_height
    }

    pub fn rpca(&self) -> RpcaConfig {
        RpcaConfig {
            lambda: Some(self.lambda),
            mu: None,
            tol: self.rpca_tol,
            max_iter: self.rpca_max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.n_c < 2 {
            return bad(format!("n_c must be >= 2, got {}", self.n_c));
        }
        if self.frame_height == 0 || self.frame_width == 0 || self.track_len == 0 || self.n_gap == 0
        {
            return bad("dimensions, track length and n_gap must be positive".into());
        }
        if self.rpca_max_iter == 0 {
            return bad("rpca_max_iter must be positive".into());
        }
        let positive = [
            ("theta_s", self.theta_s),
            ("theta_c1", self.theta_c1),
            ("theta_c2", self.theta_c2),
            ("lambda", self.lambda),
            ("theta_blob", self.theta_blob),
            ("rpca_tol", self.rpca_tol),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(format!("{name} must be positive, got {v}"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        Ok(())
    }

    /// Checks that a detector fits these window dimensions.
    pub fn check_detector(&self, net: &MmvNetwork) -> Result<()> {
        if net.classes() != 2 {
            return Err(MmvError::NotDetector(net.classes()).into());
        }
        if net.inputs() != self.frame_width {
            return bad_dims(format!(
                "detector expects {} channels, windows have {}",
                net.inputs(),
                self.frame_width
            ));
        }
        if let Some(&p) = net.periods().iter().find(|&&p| p as usize > self.steps()) {
            return bad_dims(format!(
                "detector period {p} exceeds the {}-step window",
                self.steps()
            ));
        }
        Ok(())
    }
}

fn bad_dims(msg: String) -> Result<()> {
    Err(PipelineError::InvalidConfig(msg))
}

/// Anything that can decide whether a raw window shows a gesture.
pub trait WakeDetector: Sync {
    fn detect(&self, window: &ThermalWindow) -> Result<bool>;
}

/// The trained MMV network as a wake-up detector.
pub struct MmvDetector {
    pub net: MmvNetwork,
    pub theta_s: f64,
}

impl WakeDetector for MmvDetector {
    fn detect(&self, window: &ThermalWindow) -> Result<bool> {
        Ok(self.net.detect(window, self.theta_s)?)
    }
}

impl<F: Fn(&ThermalWindow) -> bool + Sync> WakeDetector for F {
    fn detect(&self, window: &ThermalWindow) -> Result<bool> {
        Ok(self(window))
    }
}

/// One recognized gesture.
#[derive(Clone, Debug, PartialEq)]
pub struct GestureEvent {
    /// Frame index of the first track point.
    pub start_index: usize,
    /// Frame index of the last track point.
    pub end_index: usize,
    pub predicted: GestureClass,
    pub track: GestureTrack,
}

/// Work counters for one stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamStats {
    pub windows: usize,
    pub mmv_runs: usize,
    pub detections: usize,
    pub rpca_calls: usize,
    pub rpca_iterations: usize,
    pub events: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Sleep,
    Tracking,
    Cooldown,
}

/// Newest-frame hand centroid of a window, from the sparse part of its R-PCA.
pub fn segment(window: &ThermalWindow, cfg: &PipelineConfig) -> Result<(Option<Centroid>, usize)> {
    let norm = window.normalize();
    let m = DMatrix::from_row_slice(norm.rows(), norm.cols(), norm.data());
    let res = pcp(&m, &cfg.rpca())?;
    let last = res.sparse.row(norm.rows() - 1);
    let sparse: Vec<f64> = last.iter().copied().collect();
    Ok((
        extract_centroid(&sparse, cfg.shape(), cfg.theta_blob),
        res.iterations,
    ))
}

/// Streaming recognizer; feed frames in order with [`GesturePipeline::push`].
pub struct GesturePipeline<'d, D: WakeDetector + ?Sized> {
    cfg: PipelineConfig,
    detector: &'d D,
    history: Vec<ThermalFrame>,
    phase: Phase,
    quiet: usize,
    track: GestureTrack,
    stats: StreamStats,
    next_k: usize,
}

impl<'d, D: WakeDetector + ?Sized> GesturePipeline<'d, D> {
    pub fn new(cfg: PipelineConfig, detector: &'d D) -> Result<Self> {
        cfg.validate()?;
        let track = GestureTrack::new(cfg.track_len, cfg.beta);
        Ok(GesturePipeline {
            history: Vec::with_capacity(cfg.n_c),
            cfg,
            detector,
            phase: Phase::Sleep,
            quiet: 0,
            track,
            stats: StreamStats::default(),
            next_k: 0,
        })
    }

    pub fn stats(&self) -> StreamStats {
        self.stats
    }

    pub fn is_awake(&self) -> bool {
        self.phase != Phase::Sleep
    }

    fn close(&mut self, events: &mut Vec<GestureEvent>) -> Result<()> {
        if self.track.len() >= MIN_TRACK_LEN {
            let predicted = classify_track(&self.track, self.cfg.theta_c1, self.cfg.theta_c2)?;
            let ks: Vec<usize> = self.track.points().map(|p| p.k).collect();
            log::debug!(
                "event {predicted} over frames {}..={}",
                ks[0],
                ks[ks.len() - 1]
            );
            events.push(GestureEvent {
                start_index: ks[0],
                end_index: ks[ks.len() - 1],
                predicted,
                track: self.track.clone(),
            });
            self.stats.events += 1;
        }
        self.track.reset();
        Ok(())
    }

    /// Processes the next frame; returns an event if one completed.
    pub fn push(&mut self, frame: ThermalFrame) -> Result<Option<GestureEvent>> {
        let k = self.next_k;
        self.next_k += 1;
        if self.history.len() == self.cfg.n_c {
            self.history.remove(0);
        }
        self.history.push(frame);
        if self.history.len() < self.cfg.n_c {
            return Ok(None);
        }
        let window = window_at(&self.history, self.cfg.n_c - 1, self.cfg.n_c)?;
        self.stats.windows += 1;
        self.stats.mmv_runs += 1;
        let positive = self.detector.detect(&window)?;
        self.stats.detections += usize::from(positive);

        let mut events = Vec::new();
        if self.phase == Phase::Sleep {
            if !positive {
                return Ok(None);
            }
            self.phase = Phase::Tracking;
            self.quiet = 0;
        }
        let centroid = if positive {
            self.stats.rpca_calls += 1;
            let (c, iters) = segment(&window, &self.cfg)?;
            self.stats.rpca_iterations += iters;
            c
        } else {
            None
        };
        match centroid {
            Some(_) => self.quiet = 0,
            None => self.quiet += 1,
        }
        match self.phase {
            Phase::Tracking => {
                match centroid {
                    Some(c) => {
                        self.track.update(k, c);
                    }
                    None => {
                        self.track.mark_absent();
                    }
                }
                if self.track.is_full() {
                    self.close(&mut events)?;
                    self.phase = Phase::Cooldown;
                } else if self.quiet >= self.cfg.n_gap {
                    self.close(&mut events)?;
                    self.phase = Phase::Sleep;
                }
            }
            Phase::Cooldown => {
                if self.quiet >= self.cfg.n_gap {
                    self.phase = Phase::Sleep;
                }
            }
            Phase::Sleep => unreachable!("woken above"),
        }
        Ok(events.pop())
    }

    /// Flushes a partially filled track at the end of the stream.
    pub fn finish(&mut self) -> Result<Option<GestureEvent>> {
        let mut events = Vec::new();
        if self.phase == Phase::Tracking {
            self.close(&mut events)?;
        }
        self.phase = Phase::Sleep;
        Ok(events.pop())
    }
}

/// Runs a whole frame sequence; returns the events and the work counters.
pub fn process_stream<D: WakeDetector + ?Sized>(
    frames: &[ThermalFrame],
    cfg: &PipelineConfig,
    detector: &D,
) -> Result<(Vec<GestureEvent>, StreamStats)> {
    let mut p = GesturePipeline::new(cfg.clone(), detector)?;
    let mut events = Vec::new();
    for f in frames {
        events.extend(p.push(f.clone())?);
    }
    events.extend(p.finish()?);
    Ok((events, p.stats()))
}
