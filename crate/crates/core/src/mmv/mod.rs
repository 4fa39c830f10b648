//! Networks of monostable multivibrator (MMV) timer neurons.
//!
//! Each neuron has an excitatory and an inhibitory input. Both are the
//! logical OR of the lines wired to them; a line is an input channel or the
//! previous-step output of another neuron. Per time step, neuron `j`:
//!
//! 1. if triggered and INH is active: resets, no spike;
//! 2. else if triggered: counter += 1; when the counter reaches `T_j` it
//!    emits a spike and resets, re-arming at once if EXC is active;
//! 3. else if EXC is active: becomes triggered with counter 0.
//!
//! Recurrent spikes arrive with a one-step delay and a neuron is never wired
//! to itself.

mod checkpoint;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError,
};

use thiserror::Error;

use crate::thermal_io::{SpikeRaster, ThermalError, ThermalWindow};

#[derive(Debug, Error)]
pub enum MmvError {
    #[error("input width {found} does not match network width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("neuron {neuron} has period {period}; periods must be >= 1")]
    ZeroPeriod { neuron: usize, period: u32 },
    #[error("neuron {neuron} has period {period} longer than the {steps}-step run")]
    PeriodExceedsRun {
        neuron: usize,
        period: u32,
        steps: usize,
    },
    #[error("recurrent self-connection on neuron {0}")]
    SelfConnection(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("detection needs a 2-class readout, network has {0} classes")]
    NotDetector(usize),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

pub type Result<T> = std::result::Result<T, MmvError>;

/// Ternary synapse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Synapse {
    #[default]
    None,
    Exc,
    Inh,
}

impl Synapse {
    /// Maps `-1, 0, +1` to INH, none, EXC.
    pub fn from_sign(s: i8) -> Self {
        match s.signum() {
            1 => Synapse::Exc,
            -1 => Synapse::Inh,
            _ => Synapse::None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Synapse::Exc => 1,
            Synapse::Inh => -1,
            Synapse::None => 0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Synapse::Exc => 'E',
            Synapse::Inh => 'I',
            Synapse::None => 'N',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'E' => Some(Synapse::Exc),
            'I' => Some(Synapse::Inh),
            'N' => Some(Synapse::None),
            _ => None,
        }
    }
}

/// Input (`inputs x neurons`) and recurrent (`neurons x neurons`) wiring, row-major
/// with the source as row and the target neuron as column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TernaryConnectivity {
    inputs: usize,
    neurons: usize,
    input: Vec<Synapse>,
    recurrent: Vec<Synapse>,
}

impl TernaryConnectivity {
    pub fn new(
        inputs: usize,
        neurons: usize,
        input: Vec<Synapse>,
        recurrent: Vec<Synapse>,
    ) -> Result<Self> {
        if input.len() != inputs * neurons {
            return Err(MmvError::Shape(format!(
                "input connectivity has {} entries, expected {}x{}",
                input.len(),
                inputs,
                neurons
            )));
        }
        if recurrent.len() != neurons * neurons {
            return Err(MmvError::Shape(format!(
                "recurrent connectivity has {} entries, expected {n}x{n}",
                recurrent.len(),
                n = neurons
            )));
        }
        if let Some(j) = (0..neurons).find(|&j| recurrent[j * neurons + j] != Synapse::None) {
            return Err(MmvError::SelfConnection(j));
        }
        Ok(TernaryConnectivity {
            inputs,
            neurons,
            input,
            recurrent,
        })
    }

    pub fn empty(inputs: usize, neurons: usize) -> Self {
        TernaryConnectivity {
            inputs,
            neurons,
            input: vec![Synapse::None; inputs * neurons],
            recurrent: vec![Synapse::None; neurons * neurons],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn input(&self, channel: usize, neuron: usize) -> Synapse {
        self.input[channel * self.neurons + neuron]
    }

    pub fn recurrent(&self, from: usize, to: usize) -> Synapse {
        self.recurrent[from * self.neurons + to]
    }

    pub fn set_input(&mut self, channel: usize, neuron: usize, s: Synapse) {
        self.input[channel * self.neurons + neuron] = s;
    }

    /// Panics on a self-connection.
    pub fn set_recurrent(&mut self, from: usize, to: usize, s: Synapse) {
        assert!(
            from != to || s == Synapse::None,
            "self-connection on neuron {from}"
        );
        self.recurrent[from * self.neurons + to] = s;
    }

    pub fn input_matrix(&self) -> &[Synapse] {
        &self.input
    }

    pub fn recurrent_matrix(&self) -> &[Synapse] {
        &self.recurrent
    }

    /// Number of EXC or INH synapses.
    pub fn connected(&self) -> usize {
        self.input
            .iter()
            .chain(&self.recurrent)
            .filter(|s| **s != Synapse::None)
            .count()
    }
}

/// Logistic readout on spike counts: `C x K` weights plus `K` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    neurons: usize,
    classes: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Readout {
    pub fn new(neurons: usize, classes: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != neurons * classes || bias.len() != classes {
            return Err(MmvError::Shape(format!(
                "readout expects {}x{} weights and {} biases, got {} and {}",
                neurons,
                classes,
                classes,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Readout {
            neurons,
            classes,
            weights,
            bias,
        })
    }

    pub fn zeros(neurons: usize, classes: usize) -> Self {
        Readout {
            neurons,
            classes,
            weights: vec![0.0; neurons * classes],
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weight(&self, neuron: usize, class: usize) -> f64 {
        self.weights[neuron * self.classes + class]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, counts: &[u32]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (j, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let row = &self.weights[j * self.classes..(j + 1) * self.classes];
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += w * n as f64;
            }
        }
        z
    }

    pub fn probabilities(&self, counts: &[u32]) -> Vec<f64> {
        self.logits(counts).into_iter().map(sigmoid).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Index of the largest value; the earliest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fixed-width bit set over the network's lines (inputs then neurons).
#[derive(Clone, Debug, PartialEq, Eq)]
struct LineMask(Vec<u64>);

impl LineMask {
    fn zeros(bits: usize) -> Self {
        LineMask(vec![0; bits.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self) {
        self.0.iter_mut().for_each(|w| *w = 0);
    }

    fn intersects(&self, other: &LineMask) -> bool {
        self.0.iter().zip(&other.0).any(|(a, b)| a & b != 0)
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }
}

/// Immutable MMV network with its readout.
#[derive(Clone, Debug, PartialEq)]
pub struct MmvNetwork {
    connectivity: TernaryConnectivity,
    periods: Vec<u32>,
    readout: Readout,
    exc: Vec<LineMask>,
    inh: Vec<LineMask>,
}

impl MmvNetwork {
    pub fn new(
        connectivity: TernaryConnectivity,
        periods: Vec<u32>,
        readout: Readout,
    ) -> Result<Self> {
        let c = connectivity.neurons();
        if periods.len() != c {
            return Err(MmvError::Shape(format!(
                "{} periods for {c} neurons",
                periods.len()
            )));
        }
        if let Some(j) = periods.iter().position(|&p| p == 0) {
            return Err(MmvError::ZeroPeriod {
                neuron: j,
                period: 0,
            });
        }
        if readout.neurons != c {
            return Err(MmvError::Shape(format!(
                "readout built for {} neurons, network has {c}",
                readout.neurons
            )));
        }
        let lines = connectivity.inputs() + c;
        let mut exc = vec![LineMask::zeros(lines); c];
        let mut inh = vec![LineMask::zeros(lines); c];
        for j in 0..c {
            let rows = (0..connectivity.inputs())
                .map(|i| (i, connectivity.input(i, j)))
                .chain((0..c).map(|k| (connectivity.inputs() + k, connectivity.recurrent(k, j))));
            for (line, s) in rows {
                match s {
                    Synapse::Exc => exc[j].set(line),
                    Synapse::Inh => inh[j].set(line),
                    Synapse::None => {}
                }
            }
        }
        Ok(MmvNetwork {
            connectivity,
            periods,
            readout,
            exc,
            inh,
        })
    }

    pub fn connectivity(&self) -> &TernaryConnectivity {
        &self.connectivity
    }

    pub fn periods(&self) -> &[u32] {
        &self.periods
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    pub fn neurons(&self) -> usize {
        self.periods.len()
    }

    pub fn inputs(&self) -> usize {
        self.connectivity.inputs()
    }

    pub fn classes(&self) -> usize {
        self.readout.classes
    }

    /// Neuron has at least one excitatory line, so it can ever be triggered.
    pub fn can_trigger(&self, neuron: usize) -> bool {
        !self.exc[neuron].is_empty()
    }

    pub fn fresh_state(&self) -> MmvState {
        MmvState::new(self.neurons(), self.inputs())
    }

    /// Advances one time step; returns this step's output spikes.
    pub fn step<'s>(&self, state: &'s mut MmvState, input: &[u8]) -> Result<&'s [bool]> {
        if input.len() != self.inputs() {
            return Err(MmvError::WidthMismatch {
                expected: self.inputs(),
                found: input.len(),
            });
        }
        let w = self.inputs();
        state.lines.clear();
        for (i, &b) in input.iter().enumerate() {
            if b != 0 {
                state.lines.set(i);
            }
        }
        for (k, &s) in state.last_output.iter().enumerate() {
            if s {
                state.lines.set(w + k);
            }
        }
        for j in 0..self.neurons() {
            let exc = self.exc[j].intersects(&state.lines);
            let mut out = false;
            if state.triggered[j] {
                let inh = self.inh[j].intersects(&state.lines);
                if inh {
                    state.triggered[j] = false;
                    state.counters[j] = 0;
                } else {
                    state.counters[j] += 1;
                    if state.counters[j] == self.periods[j] {
                        out = true;
                        state.counters[j] = 0;
                        state.triggered[j] = exc;
                    }
                }
            } else if exc {
                state.triggered[j] = true;
                state.counters[j] = 0;
            }
            state.next_output[j] = out;
        }
        std::mem::swap(&mut state.last_output, &mut state.next_output);
        Ok(&state.last_output)
    }

    /// Runs a fresh network over every raster step and counts output spikes per neuron.
    pub fn run(&self, raster: &SpikeRaster) -> Result<Vec<u32>> {
        if raster.width() != self.inputs() {
            return Err(MmvError::WidthMismatch {
                expected: self.inputs(),
                found: raster.width(),
            });
        }
        if let Some(j) = self
            .periods
            .iter()
            .position(|&p| p as usize > raster.steps())
        {
            return Err(MmvError::PeriodExceedsRun {
                neuron: j,
                period: self.periods[j],
                steps: raster.steps(),
            });
        }
        let mut state = self.fresh_state();
        let mut counts = vec![0u32; self.neurons()];
        for t in 0..raster.steps() {
            let out = self.step(&mut state, raster.step(t))?;
            for (c, &s) in counts.iter_mut().zip(out) {
                *c += u32::from(s);
            }
        }
        Ok(counts)
    }

    /// Readout logits for the given spike counts.
    pub fn logits(&self, counts: &[u32]) -> Vec<f64> {
        self.readout.logits(counts)
    }

    /// Per-class sigmoid probabilities.
    pub fn readout_probabilities(&self, counts: &[u32]) -> Vec<f64> {
        self.readout.probabilities(counts)
    }

    /// Class with the highest probability (ties go to the lower index).
    pub fn classify_raster(&self, raster: &SpikeRaster) -> Result<usize> {
        Ok(argmax(&self.readout_probabilities(&self.run(raster)?)))
    }

    /// Gesture-present decision for a 2-class detector: class 1 must strictly win.
    pub fn detect_raster(&self, raster: &SpikeRaster) -> Result<bool> {
        if self.classes() != 2 {
            return Err(MmvError::NotDetector(self.classes()));
        }
        let p = self.readout_probabilities(&self.run(raster)?);
        Ok(p[1] > p[0])
    }

    /// Encodes a raw window and runs the detector on it.
    pub fn detect(&self, window: &ThermalWindow, theta_s: f64) -> Result<bool> {
        self.detect_raster(&window.encode(theta_s)?)
    }
}

/// Per-stream mutable state of a network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MmvState {
    counters: Vec<u32>,
    triggered: Vec<bool>,
    last_output: Vec<bool>,
    next_output: Vec<bool>,
    lines: LineMask,
}

impl MmvState {
    pub fn new(neurons: usize, inputs: usize) -> Self {
        MmvState {
            counters: vec![0; neurons],
            triggered: vec![false; neurons],
            last_output: vec![false; neurons],
            next_output: vec![false; neurons],
            lines: LineMask::zeros(inputs + neurons),
        }
    }

    pub fn counters(&self) -> &[u32] {
        &self.counters
    }

    pub fn triggered(&self) -> &[bool] {
        &self.triggered
    }

    pub fn last_output(&self) -> &[bool] {
        &self.last_output
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// One neuron on a 2-channel input: channel 0 EXC, channel 1 INH.
    fn single(period: u32) -> MmvNetwork {
        let conn = TernaryConnectivity::new(
            1 + 1,
            1,
            vec![Synapse::Exc, Synapse::Inh],
            vec![Synapse::None],
        )
        .unwrap();
        MmvNetwork::new(conn, vec![period], Readout::zeros(1, 2)).unwrap()
    }

    fn trace(net: &MmvNetwork, inputs: &[[u8; 2]]) -> Vec<bool> {
        let mut st = net.fresh_state();
        inputs
            .iter()
            .map(|i| net.step(&mut st, i).unwrap()[0])
            .collect()
    }

    #[test]
    fn fires_after_period() {
        let net = single(3);
        let mut input = vec![[0, 0]; 8];
        input[0] = [1, 0];
        let out = trace(&net, &input);
        assert_eq!(out, [false, false, false, true, false, false, false, false]);

        let mut st = net.fresh_state();
        for (t, i) in input.iter().enumerate().take(4) {
            net.step(&mut st, i).unwrap();
            let expect_counter = [0, 1, 2, 0][t];
            assert_eq!(st.counters()[0], expect_counter);
        }
        assert!(!st.triggered()[0]);
    }

    #[test]
    fn inhibition_cancels_pending_spike() {
        let net = single(3);
        let mut input = vec![[0, 0]; 10];
        input[0] = [1, 0];
        input[1] = [0, 1];
        assert!(trace(&net, &input).iter().all(|s| !s));
    }

    #[test]
    fn inhibition_only_acts_on_triggered_neurons() {
        let net = single(2);
        // simultaneous EXC+INH on an idle neuron still triggers it
        let out = trace(&net, &[[1, 1], [0, 0], [0, 0]]);
        assert_eq!(out, [false, false, true]);
        // while triggered, INH wins over EXC
        let out = trace(&net, &[[1, 0], [1, 1], [0, 0], [0, 0]]);
        assert_eq!(out, [false; 4]);
    }

    #[test]
    fn silent_input_gives_silent_output() {
        let net = single(1);
        let raster = SpikeRaster::zeros(96, 2);
        assert_eq!(net.run(&raster).unwrap(), [0]);
    }

    #[test]
    fn period_one_with_constant_drive() {
        let net = single(1);
        let mut raster = SpikeRaster::zeros(96, 2);
        for t in 0..96 {
            raster.set(t, 0, true);
        }
        // trigger at t=0, then a spike (and re-arm) on every following step
        assert_eq!(net.run(&raster).unwrap(), [95]);
        let net = single(2);
        assert_eq!(net.run(&raster).unwrap(), [47]);
    }

    #[test]
    fn recurrent_spikes_arrive_one_step_late() {
        // neuron 0 driven by input; neuron 1 excited by neuron 0
        let mut conn = TernaryConnectivity::empty(1, 2);
        conn.set_input(0, 0, Synapse::Exc);
        conn.set_recurrent(0, 1, Synapse::Exc);
        let net = MmvNetwork::new(conn, vec![1, 1], Readout::zeros(2, 2)).unwrap();
        let mut st = net.fresh_state();
        let mut out = Vec::new();
        for t in 0..5 {
            let input = [u8::from(t == 0)];
            out.push(net.step(&mut st, &input).unwrap().to_vec());
        }
        // n0 spikes at t=1; n1 sees it at t=2 (trigger) and spikes at t=3
        assert_eq!(
            out,
            vec![
                vec![false, false],
                vec![true, false],
                vec![false, false],
                vec![false, true],
                vec![false, false]
            ]
        );
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = single(3);
        let mut st = net.fresh_state();
        assert!(matches!(
            net.step(&mut st, &[1, 0, 0]),
            Err(MmvError::WidthMismatch {
                expected: 2,
                found: 3
            })
        ));
        assert!(matches!(
            net.run(&SpikeRaster::zeros(2, 2)),
            Err(MmvError::PeriodExceedsRun { .. })
        ));
        let conn = TernaryConnectivity::empty(2, 1);
        assert!(matches!(
            MmvNetwork::new(conn, vec![0], Readout::zeros(1, 2)),
            Err(MmvError::ZeroPeriod { .. })
        ));
        assert!(matches!(
            TernaryConnectivity::new(1, 1, vec![Synapse::Exc], vec![Synapse::Inh]),
            Err(MmvError::SelfConnection(0))
        ));
    }

    #[test]
    fn readout_examples() {
        let r = Readout::zeros(3, 2);
        assert_eq!(r.probabilities(&[4, 0, 9]), [0.5, 0.5]);
        let r = Readout::new(3, 2, vec![1.0, -2.0, 0.3, 0.3, 7.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(r.probabilities(&[0, 0, 0]), [0.5, 0.5]);
        let r = Readout::new(1, 2, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let p = r.probabilities(&[3]);
        assert_relative_eq!(p[0], 0.9525741268224334, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.04742587317756678, epsilon = 1e-12);
    }

    #[test]
    fn detection_tie_means_no_gesture() {
        let net = single(3);
        assert!(!net.detect_raster(&SpikeRaster::zeros(8, 2)).unwrap());
        let five = MmvNetwork::new(
            TernaryConnectivity::empty(2, 1),
            vec![1],
            Readout::zeros(1, 5),
        )
        .unwrap();
        assert!(matches!(
            five.detect_raster(&SpikeRaster::zeros(8, 2)),
            Err(MmvError::NotDetector(5))
        ));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    }
}
