//! Memory and compute accounting.
//!
//! Parameters: a ternary synapse takes 2 bits (input and recurrent matrices
//! in full), a period 8 bits, a readout weight or bias 32 bits; the packed
//! total is rounded up to whole bytes. The unpacked figure stores one byte
//! per synapse and per period.
//!
//! Compute: one operation per connected synapse and per neuron counter for
//! every MMV time step; one SVD per R-PCA iteration at the closed-form SVD
//! cost below.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::PipelineConfig;
use crate::mmv::MmvNetwork;
use crate::thermal_io::SENSOR_FPS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub packed_bytes: u64,
    pub unpacked_bytes: u64,
}

/// Parameter storage of a network with `c` neurons, `w` inputs and `k` classes.
pub fn param_bytes(c: u64, w: u64, k: u64) -> ParamCount {
    let synapses = w * c + c * c;
    let floats = c * k + k;
    let bits = 2 * synapses + 8 * c + 32 * floats;
    ParamCount {
        packed_bytes: bits.div_ceil(8),
        unpacked_bytes: synapses + c + 4 * floats,
    }
}

pub fn count_params(net: &MmvNetwork) -> ParamCount {
    param_bytes(
        net.neurons() as u64,
        net.inputs() as u64,
        net.classes() as u64,
    )
}

/// `2 n_c (h w)^2 + 11 (h w)^3`.
pub fn flops_svd(n_c: u64, h: u64, w: u64) -> u128 {
    let p = u128::from(h * w);
    2 * u128::from(n_c) * p * p + 11 * p * p * p
}

/// MMV operations per input frame (one window per frame).
pub fn mmv_ops_per_frame(net: &MmvNetwork, steps: usize) -> u64 {
    steps as u64 * (net.connectivity().connected() as u64 + net.neurons() as u64)
}

/// R-PCA operations for one gesture at `max_iter` SVDs per window.
pub fn rpca_ops_per_gesture(
    n_c: u64,
    h: u64,
    w: u64,
    max_iter: u64,
    windows_per_gesture: u64,
) -> u128 {
    u128::from(max_iter) * flops_svd(n_c, h, w) * u128::from(windows_per_gesture)
}

/// Average operations per second.
pub fn avg_flops(
    per_gesture_ops: u128,
    gesture_rate: f64,
    mmv_ops_per_frame: u64,
    frame_rate: f64,
) -> f64 {
    mmv_ops_per_frame as f64 * frame_rate + per_gesture_ops as f64 * gesture_rate
}

/// Operating assumptions behind the average-rate figures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostAssumptions {
    pub n_c: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub max_iter: usize,
    /// R-PCA decompositions per gesture.
    pub windows_per_gesture: usize,
    pub frame_rate: f64,
    /// Gestures per second.
    pub gesture_rate: f64,
}

impl CostAssumptions {
    /// One gesture per minute, one decomposition per track point.
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        CostAssumptions {
            n_c: cfg.n_c,
            frame_height: cfg.frame_height,
            frame_width: cfg.frame_width,
            max_iter: cfg.rpca_max_iter,
            windows_per_gesture: cfg.track_len,
            frame_rate: f64::from(SENSOR_FPS),
            gesture_rate: 1.0 / 60.0,
        }
    }
}

/// Everything the cost report prints for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub neurons: usize,
    pub connected_synapses: usize,
    pub params: ParamCount,
    pub mmv_ops_per_frame: u64,
    pub flops_svd: u128,
    pub rpca_ops_per_gesture: u128,
    pub frame_rate: f64,
    pub gesture_rate: f64,
    pub mmv_flops: f64,
    pub rpca_flops: f64,
    pub avg_flops: f64,
}

impl CostReport {
    pub fn new(net: &MmvNetwork, a: &CostAssumptions) -> Self {
        Self::for_size(
            net.neurons(),
            net.inputs(),
            net.classes(),
            net.connectivity().connected(),
            a,
        )
    }

    /// Report for a network of the given size with `connected` non-empty synapses.
    pub fn for_size(
        neurons: usize,
        inputs: usize,
        classes: usize,
        connected: usize,
        a: &CostAssumptions,
    ) -> Self {
        let (n_c, h, w) = (a.n_c as u64, a.frame_height as u64, a.frame_width as u64);
        let steps = (a.n_c as u64 - 1) * h;
        let mmv = steps * (connected as u64 + neurons as u64);
        let per_gesture =
            rpca_ops_per_gesture(n_c, h, w, a.max_iter as u64, a.windows_per_gesture as u64);
        CostReport {
            neurons,
            connected_synapses: connected,
            params: param_bytes(neurons as u64, inputs as u64, classes as u64),
            mmv_ops_per_frame: mmv,
            flops_svd: flops_svd(n_c, h, w),
            rpca_ops_per_gesture: per_gesture,
            frame_rate: a.frame_rate,
            gesture_rate: a.gesture_rate,
            mmv_flops: avg_flops(0, 0.0, mmv, a.frame_rate),
            rpca_flops: avg_flops(per_gesture, a.gesture_rate, 0, a.frame_rate),
            avg_flops: avg_flops(per_gesture, a.gesture_rate, mmv, a.frame_rate),
        }
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "neurons                 {}", self.neurons)?;
        writeln!(f, "connected synapses      {}", self.connected_synapses)?;
        writeln!(
            f,
            "parameters              {} B packed, {} B unpacked",
            self.params.packed_bytes, self.params.unpacked_bytes
        )?;
        writeln!(f, "MMV ops per frame       {}", self.mmv_ops_per_frame)?;
        writeln!(f, "SVD ops                 {}", self.flops_svd)?;
        writeln!(f, "R-PCA ops per gesture   {}", self.rpca_ops_per_gesture)?;
        writeln!(
            f,
            "average ops/s           {:.4e} MMV + {:.4e} R-PCA = {:.4e}",
            self.mmv_flops, self.rpca_flops, self.avg_flops
        )?;
        write!(
            f,
            "assumes {} frames/s and {:.4} gestures/s",
            self.frame_rate, self.gesture_rate
        )
    }
}
