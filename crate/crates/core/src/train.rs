//! Surrogate-gradient training of MMV networks.
//!
//! The discrete network is relaxed into a differentiable one:
//!
//! * weights are real; the forward pass uses `(1 - rho) w + rho tern(w)`
//!   and periods `(1 - rho) p + rho round(p)`, with `rho` ramped from 0 to 1
//!   so the final epochs train exactly the network that gets deployed;
//! * the OR gates become probabilistic ORs,
//!   `E = 1 - prod_m (1 - v_m a_m)` with `a = clamp(w, 0, 1)` for EXC and
//!   `b = clamp(-w, 0, 1)` for INH;
//! * the spike decision is a Heaviside step whose backward pass uses the
//!   Gaussian surrogate [`surrogate_grad`]; ternarization and rounding
//!   pass gradients straight through.
//!
//! With `rho = 1` and binary inputs every relaxed quantity is 0 or 1 and
//! the forward pass reproduces [`MmvNetwork::run`] exactly.
//!
//! Gradients are computed by hand-written backpropagation through time.
//! [`GradMode::Exact`] swaps the step for its smooth antiderivative and
//! zeroes the straight-through terms, which makes the backward pass the true
//! gradient of the forward pass; the unit tests check it against finite
//! differences.

use std::f64::consts::PI;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mmv::{MmvError, MmvNetwork, Readout, Synapse, TernaryConnectivity};
use crate::thermal_io::{Acquisition, GestureLabel, SpikeRaster, ThermalError};

/// Ternarization threshold for trained weights.
pub const DEFAULT_TAU_B: f64 = 0.3;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("split left {train} training and {val} validation samples; both must be non-empty")]
    EmptySplit { train: usize, val: usize },
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("sample {index}: {msg}")]
    BadSample { index: usize, msg: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mmv(#[from] MmvError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Surrogate derivative of the spike step, `exp(-2 x^2) / sqrt(2 pi)`.
pub fn surrogate_grad(x: f64) -> f64 {
    (-2.0 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Antiderivative of [`surrogate_grad`] with value 0 at `-inf` (and 0.5 at `+inf`).
pub fn smooth_step(x: f64) -> f64 {
    0.25 * (1.0 + libm::erf(std::f64::consts::SQRT_2 * x))
}

/// `+1` above `tau`, `-1` below `-tau`, else 0.
pub fn ternarize(w: f64, tau: f64) -> i8 {
    if w > tau {
        1
    } else if w < -tau {
        -1
    } else {
        0
    }
}

fn round_half_up(p: f64) -> f64 {
    (p + 0.5).floor()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradMode {
    /// Heaviside forward, surrogate and straight-through backward.
    Surrogate,
    /// Smooth forward whose exact gradient the backward pass computes.
    Exact,
}

/// One training example: an encoded window and its class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub raster: SpikeRaster,
    pub label: usize,
}

/// Real-valued parameters of a trainable MMV network, stored flat:
/// input weights (`w x C`), recurrent weights (`C x C`, diagonal unused),
/// periods (`C`), readout weights (`C x K`) and readout biases (`K`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainableMmv {
    inputs: usize,
    neurons: usize,
    classes: usize,
    params: Vec<f64>,
}

impl TrainableMmv {
    pub fn zeros(inputs: usize, neurons: usize, classes: usize) -> Self {
        let len = inputs * neurons + neurons * neurons + neurons + neurons * classes + classes;
        let mut m = TrainableMmv {
            inputs,
            neurons,
            classes,
            params: vec![0.0; len],
        };
        m.periods_mut().fill(1.0);
        m
    }

    /// Weights uniform in `[-0.5, 0.5]`, integer periods in `[2, 16]`, zero readout.
    pub fn random(inputs: usize, neurons: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(inputs, neurons, classes);
        for w in m.w_in_mut() {
            *w = rng.random_range(-0.5..=0.5);
        }
        for w in m.w_rec_mut() {
            *w = rng.random_range(-0.5..=0.5);
        }
        for j in 0..neurons {
            m.w_rec_mut()[j * neurons + j] = 0.0;
        }
        for p in m.periods_mut() {
            *p = rng.random_range(2..=16) as f64;
        }
        m
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn rec_off(&self) -> usize {
        self.inputs * self.neurons
    }

    fn per_off(&self) -> usize {
        self.rec_off() + self.neurons * self.neurons
    }

    fn ro_off(&self) -> usize {
        self.per_off() + self.neurons
    }

    fn bias_off(&self) -> usize {
        self.ro_off() + self.neurons * self.classes
    }

    /// Input weight of channel `i` onto neuron `j` at `[i * C + j]`.
    pub fn w_in(&self) -> &[f64] {
        &self.params[..self.rec_off()]
    }

    pub fn w_in_mut(&mut self) -> &mut [f64] {
        let end = self.rec_off();
        &mut self.params[..end]
    }

    /// Recurrent weight from neuron `k` onto neuron `j` at `[k * C + j]`.
    pub fn w_rec(&self) -> &[f64] {
        &self.params[self.rec_off()..self.per_off()]
    }

    pub fn w_rec_mut(&mut self) -> &mut [f64] {
        let (a, b) = (self.rec_off(), self.per_off());
        &mut self.params[a..b]
    }

    pub fn periods(&self) -> &[f64] {
        &self.params[self.per_off()..self.ro_off()]
    }

    pub fn periods_mut(&mut self) -> &mut [f64] {
        let (a, b) = (self.per_off(), self.ro_off());
        &mut self.params[a..b]
    }

    pub fn readout_weights(&self) -> &[f64] {
        &self.params[self.ro_off()..self.bias_off()]
    }

    pub fn readout_bias(&self) -> &[f64] {
        &self.params[self.bias_off()..]
    }

    /// Keeps periods inside `[1, max_period]` and the recurrent diagonal at zero.
    pub fn project(&mut self, max_period: f64) {
        for p in self.periods_mut() {
            *p = p.clamp(1.0, max_period.max(1.0));
        }
        let c = self.neurons;
        for j in 0..c {
            self.w_rec_mut()[j * c + j] = 0.0;
        }
    }

    /// The deployable discrete network: ternarized weights, rounded periods.
    pub fn to_network(&self, tau_b: f64) -> Result<MmvNetwork> {
        let c = self.neurons;
        let input = self
            .w_in()
            .iter()
            .map(|&w| Synapse::from_sign(ternarize(w, tau_b)))
            .collect();
        let recurrent = self
            .w_rec()
            .iter()
            .enumerate()
            .map(|(idx, &w)| {
                if idx / c == idx % c {
                    Synapse::None
                } else {
                    Synapse::from_sign(ternarize(w, tau_b))
                }
            })
            .collect();
        let conn = TernaryConnectivity::new(self.inputs, c, input, recurrent)?;
        let periods = self
            .periods()
            .iter()
            .map(|&p| round_half_up(p).max(1.0) as u32)
            .collect();
        let readout = Readout::new(
            c,
            self.classes,
            self.readout_weights().to_vec(),
            self.readout_bias().to_vec(),
        )?;
        Ok(MmvNetwork::new(conn, periods, readout)?)
    }

    /// Relaxed forward pass; returns the readout logits.
    pub fn logits(&self, raster: &SpikeRaster, rho: f64, tau_b: f64, mode: GradMode) -> Vec<f64> {
        let eff = Effective::new(self, rho, tau_b, mode);
        let tape = forward(self, &eff, raster, mode);
        readout_logits(self, &tape.counts)
    }

    /// Loss and gradient for one sample.
    pub fn loss_and_grad(
        &self,
        sample: &Sample,
        rho: f64,
        tau_b: f64,
        mode: GradMode,
    ) -> (f64, Vec<f64>) {
        let eff = Effective::new(self, rho, tau_b, mode);
        sample_grad(self, &eff, sample, mode)
    }
}

/// Effective (relaxed) gate strengths and their derivatives w.r.t. the raw parameters.
struct Effective {
    a_in: Vec<f64>,
    b_in: Vec<f64>,
    da_in: Vec<f64>,
    db_in: Vec<f64>,
    a_rec: Vec<f64>,
    b_rec: Vec<f64>,
    da_rec: Vec<f64>,
    db_rec: Vec<f64>,
    periods: Vec<f64>,
    dp: Vec<f64>,
}

/// `(a, b, da/dw, db/dw)` for one weight.
fn gate(w: f64, rho: f64, tau: f64, mode: GradMode) -> (f64, f64, f64, f64) {
    let ste = if mode == GradMode::Surrogate {
        1.0
    } else {
        0.0
    };
    let weff = (1.0 - rho) * w + rho * ternarize(w, tau) as f64;
    let dweff = (1.0 - rho) + rho * ste;
    let a = weff.clamp(0.0, 1.0);
    let b = (-weff).clamp(0.0, 1.0);
    let (pass_a, pass_b) = match mode {
        GradMode::Surrogate => ((0.0..=1.0).contains(&weff), (-1.0..=0.0).contains(&weff)),
        GradMode::Exact => (weff > 0.0 && weff < 1.0, weff > -1.0 && weff < 0.0),
    };
    let da = if pass_a { dweff } else { 0.0 };
    let db = if pass_b { -dweff } else { 0.0 };
    (a, b, da, db)
}

impl Effective {
    fn new(m: &TrainableMmv, rho: f64, tau: f64, mode: GradMode) -> Self {
        let split = |ws: &[f64], diag: Option<usize>| {
            let n = ws.len();
            let (mut a, mut b, mut da, mut db) =
                (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for (idx, &w) in ws.iter().enumerate() {
                if let Some(c) = diag {
                    if idx / c == idx % c {
                        continue;
                    }
                }
                (a[idx], b[idx], da[idx], db[idx]) = gate(w, rho, tau, mode);
            }
            (a, b, da, db)
        };
        let (a_in, b_in, da_in, db_in) = split(m.w_in(), None);
        let (a_rec, b_rec, da_rec, db_rec) = split(m.w_rec(), Some(m.neurons));
        let ste = if mode == GradMode::Surrogate {
            1.0
        } else {
            0.0
        };
        let periods = m
            .periods()
            .iter()
            .map(|&p| (1.0 - rho) * p + rho * round_half_up(p))
            .collect();
        let dp = vec![(1.0 - rho) + rho * ste; m.neurons];
        Effective {
            a_in,
            b_in,
            da_in,
            db_in,
            a_rec,
            b_rec,
            da_rec,
            db_rec,
            periods,
            dp,
        }
    }
}

/// Product of the non-zero factors plus the number of zero factors, so that
/// leave-one-out products stay exact when a factor is 0.
#[derive(Clone, Copy)]
struct Product {
    nz: f64,
    zeros: u32,
}

impl Product {
    const ONE: Product = Product { nz: 1.0, zeros: 0 };

    fn mul(&mut self, f: f64) {
        if f == 0.0 {
            self.zeros += 1;
        } else {
            self.nz *= f;
        }
    }

    fn value(self) -> f64 {
        if self.zeros == 0 {
            self.nz
        } else {
            0.0
        }
    }

    /// Product of every factor except one equal to `f`.
    fn without(self, f: f64) -> f64 {
        match (self.zeros, f == 0.0) {
            (0, _) => self.nz / f,
            (1, true) => self.nz,
            _ => 0.0,
        }
    }
}

struct Tape {
    steps: usize,
    g_prev: Vec<f64>,
    c_prev: Vec<f64>,
    q: Vec<Product>,
    r: Vec<Product>,
    h: Vec<f64>,
    hd: Vec<f64>,
    s: Vec<f64>,
    counts: Vec<f64>,
}

fn forward(m: &TrainableMmv, eff: &Effective, raster: &SpikeRaster, mode: GradMode) -> Tape {
    let c = m.neurons;
    let steps = raster.steps();
    let mut tape = Tape {
        steps,
        g_prev: vec![0.0; steps * c],
        c_prev: vec![0.0; steps * c],
        q: vec![Product::ONE; steps * c],
        r: vec![Product::ONE; steps * c],
        h: vec![0.0; steps * c],
        hd: vec![0.0; steps * c],
        s: vec![0.0; steps * c],
        counts: vec![0.0; c],
    };
    let mut g = vec![0.0; c];
    let mut cnt_state = vec![0.0; c];
    let mut s_prev = vec![0.0; c];
    for t in 0..steps {
        let row = t * c;
        let q = &mut tape.q[row..row + c];
        let r = &mut tape.r[row..row + c];
        for (i, &x) in raster.step(t).iter().enumerate() {
            if x == 0 {
                continue;
            }
            let a = &eff.a_in[i * c..(i + 1) * c];
            let b = &eff.b_in[i * c..(i + 1) * c];
            for j in 0..c {
                q[j].mul(1.0 - a[j]);
                r[j].mul(1.0 - b[j]);
            }
        }
        for (k, &v) in s_prev.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let a = &eff.a_rec[k * c..(k + 1) * c];
            let b = &eff.b_rec[k * c..(k + 1) * c];
            for j in 0..c {
                q[j].mul(1.0 - v * a[j]);
                r[j].mul(1.0 - v * b[j]);
            }
        }
        for j in 0..c {
            let e = 1.0 - q[j].value();
            let i_ = 1.0 - r[j].value();
            let (gj, cj) = (g[j], cnt_state[j]);
            tape.g_prev[row + j] = gj;
            tape.c_prev[row + j] = cj;
            let cnt = gj * (1.0 - i_);
            let u = cj + 1.5 - eff.periods[j];
            let h = match mode {
                GradMode::Surrogate => f64::from(u8::from(u > 0.0)),
                GradMode::Exact => smooth_step(u),
            };
            let s = cnt * h;
            tape.h[row + j] = h;
            tape.hd[row + j] = surrogate_grad(u);
            tape.s[row + j] = s;
            tape.counts[j] += s;
            cnt_state[j] = cnt * (1.0 - h) * (cj + 1.0);
            g[j] = cnt * (1.0 - h + h * e) + (1.0 - gj) * e;
        }
        s_prev.copy_from_slice(&tape.s[row..row + c]);
    }
    tape
}

fn readout_logits(m: &TrainableMmv, counts: &[f64]) -> Vec<f64> {
    let k = m.classes;
    let w = m.readout_weights();
    let mut z = m.readout_bias().to_vec();
    for (j, &n) in counts.iter().enumerate() {
        if n != 0.0 {
            for cls in 0..k {
                z[cls] += n * w[j * k + cls];
            }
        }
    }
    z
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Sum of per-class binary cross-entropies against a one-hot target.
pub fn bce_loss(logits: &[f64], label: usize) -> f64 {
    logits
        .iter()
        .enumerate()
        .map(|(k, &z)| softplus(z) - if k == label { z } else { 0.0 })
        .sum()
}

fn sample_grad(
    m: &TrainableMmv,
    eff: &Effective,
    sample: &Sample,
    mode: GradMode,
) -> (f64, Vec<f64>) {
    let (c, k) = (m.neurons, m.classes);
    let tape = forward(m, eff, &sample.raster, mode);
    let z = readout_logits(m, &tape.counts);
    let loss = bce_loss(&z, sample.label);
    let zbar: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(cls, &zz)| crate::mmv::sigmoid(zz) - f64::from(u8::from(cls == sample.label)))
        .collect();

    let mut grad = vec![0.0; m.params.len()];
    let (ro, bo) = (m.ro_off(), m.bias_off());
    let w = m.readout_weights();
    let mut dn = vec![0.0; c];
    for j in 0..c {
        for cls in 0..k {
            grad[ro + j * k + cls] = tape.counts[j] * zbar[cls];
            dn[j] += w[j * k + cls] * zbar[cls];
        }
    }
    grad[bo..bo + k].copy_from_slice(&zbar);

    backward(m, eff, &sample.raster, &tape, &dn, &mut grad);
    (loss, grad)
}

fn backward(
    m: &TrainableMmv,
    eff: &Effective,
    raster: &SpikeRaster,
    tape: &Tape,
    dn: &[f64],
    grad: &mut [f64],
) {
    let c = m.neurons;
    let (rec_off, per_off) = (m.rec_off(), m.per_off());
    let mut g_bar = vec![0.0; c];
    let mut c_bar = vec![0.0; c];
    let mut s_bar_next = vec![0.0; c];
    let mut e_bar = vec![0.0; c];
    let mut i_bar = vec![0.0; c];
    let mut p_bar = vec![0.0; c];
    let zeros = vec![0.0; c];
    let (mut eq, mut ir) = (vec![0.0; c], vec![0.0; c]);
    for t in (0..tape.steps).rev() {
        let row = t * c;
        for j in 0..c {
            let q = tape.q[row + j];
            let r = tape.r[row + j];
            let e = 1.0 - q.value();
            let i_ = 1.0 - r.value();
            let (g, cc) = (tape.g_prev[row + j], tape.c_prev[row + j]);
            let (h, hd) = (tape.h[row + j], tape.hd[row + j]);
            let cnt = g * (1.0 - i_);
            let sb = dn[j] + s_bar_next[j];
            let (gb, cb) = (g_bar[j], c_bar[j]);
            let cnt_b = sb * h + cb * (1.0 - h) * (cc + 1.0) + gb * (1.0 - h + h * e);
            let h_b = sb * cnt - cb * cnt * (cc + 1.0) + gb * cnt * (e - 1.0);
            let u_b = h_b * hd;
            c_bar[j] = cb * cnt * (1.0 - h) + u_b;
            p_bar[j] -= u_b;
            e_bar[j] = gb * (cnt * h + 1.0 - g);
            g_bar[j] = cnt_b * (1.0 - i_) - gb * e;
            i_bar[j] = -cnt_b * g;
        }

        let q = &tape.q[row..row + c];
        let r = &tape.r[row..row + c];
        for (i, &x) in raster.step(t).iter().enumerate() {
            if x == 0 {
                continue;
            }
            let base = i * c;
            for j in 0..c {
                let (a, b) = (eff.a_in[base + j], eff.b_in[base + j]);
                let abar = e_bar[j] * q[j].without(1.0 - a);
                let bbar = i_bar[j] * r[j].without(1.0 - b);
                grad[base + j] += abar * eff.da_in[base + j] + bbar * eff.db_in[base + j];
            }
        }

        let s_prev = if t == 0 {
            &zeros[..]
        } else {
            &tape.s[row - c..row]
        };
        // silent lines have factor 1, so their leave-one-out product is the full product
        for j in 0..c {
            eq[j] = e_bar[j] * q[j].value();
            ir[j] = i_bar[j] * r[j].value();
        }
        // the adjoint of s_prev feeds the spike adjoint of step t-1
        for k in 0..c {
            let v = s_prev[k];
            let base = k * c;
            let a_row = &eff.a_rec[base..base + c];
            let b_row = &eff.b_rec[base..base + c];
            if v == 0.0 {
                s_bar_next[k] = a_row.iter().zip(&eq).map(|(a, x)| a * x).sum::<f64>()
                    + b_row.iter().zip(&ir).map(|(b, x)| b * x).sum::<f64>();
                continue;
            }
            let mut sb = 0.0;
            for j in 0..c {
                let (a, b) = (a_row[j], b_row[j]);
                let qx = q[j].without(1.0 - v * a);
                let rx = r[j].without(1.0 - v * b);
                sb += e_bar[j] * a * qx + i_bar[j] * b * rx;
                let abar = e_bar[j] * v * qx;
                let bbar = i_bar[j] * v * rx;
                grad[rec_off + base + j] +=
                    abar * eff.da_rec[base + j] + bbar * eff.db_rec[base + j];
            }
            s_bar_next[k] = sb;
        }
    }
    for j in 0..c {
        grad[per_off + j] = p_bar[j] * eff.dp[j];
    }
}

/// Adam with the usual defaults.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub neurons: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epoch at which the ramp towards the discrete network starts.
    pub binarize_start: usize,
    /// Epoch by whose end training runs fully discrete.
    pub binarize_end: usize,
    pub tau_b: f64,
    /// Training share of the shuffled samples in [`split_train_val`].
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            neurons: 125,
            learning_rate: 5e-3,
            batch_size: 32,
            epochs: 50,
            binarize_start: 10,
            binarize_end: 25,
            tau_b: DEFAULT_TAU_B,
            split_fraction: 0.7,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Blend factor for batch `b` of `nb` in `epoch`: 0 before
    /// `binarize_start`, rising linearly to exactly 1 on the last batch of
    /// epoch `binarize_end - 1`.
    pub fn rho(&self, epoch: usize, b: usize, nb: usize) -> f64 {
        let x = epoch as f64 + (b + 1) as f64 / nb.max(1) as f64;
        ((x - self.binarize_start as f64) / (self.binarize_end - self.binarize_start) as f64)
            .clamp(0.0, 1.0)
    }

    /// Epochs whose snapshot is eligible as the final model.
    pub fn is_post_binarization(&self, epoch: usize) -> bool {
        epoch + 1 >= self.binarize_end
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.neurons == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("neurons, batch size and epochs must be positive");
        }
        if !(self.binarize_start < self.binarize_end && self.binarize_end <= self.epochs) {
            return bad("need binarize_start < binarize_end <= epochs");
        }
        if !(self.learning_rate > 0.0 && self.tau_b > 0.0) {
            return bad("learning rate and tau_b must be positive");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
    pub rho: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Discrete network with the best validation accuracy.
    pub network: MmvNetwork,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub history: Vec<EpochRecord>,
    /// Real-valued parameters at the end of training.
    pub model: TrainableMmv,
}

/// Shuffles with `seed` and splits off the first `fraction` for training.
pub fn split_train_val<T>(
    mut samples: Vec<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((samples.len() as f64 * fraction).round() as usize).min(samples.len());
    let val = samples.split_off(n_train);
    if samples.is_empty() || val.is_empty() {
        return Err(TrainError::EmptySplit {
            train: samples.len(),
            val: val.len(),
        });
    }
    Ok((samples, val))
}

/// Every `stride`-th window of an acquisition, encoded and labeled `label`.
pub fn acquisition_samples(
    acq: &Acquisition,
    label: usize,
    n_c: usize,
    theta_s: f64,
    stride: usize,
) -> std::result::Result<Vec<Sample>, ThermalError> {
    (n_c.saturating_sub(1)..acq.len())
        .step_by(stride.max(1))
        .map(|k| {
            Ok(Sample {
                raster: acq.window_at(k, n_c)?.encode(theta_s)?,
                label,
            })
        })
        .collect()
}

/// Detector samples from recorded acquisitions: idle recordings are
/// negatives, multi-gesture recordings positives, anything else is ignored.
pub fn recorded_detection_samples(
    acqs: &[Acquisition],
    n_c: usize,
    theta_s: f64,
    stride: usize,
) -> std::result::Result<Vec<Sample>, ThermalError> {
    let mut out = Vec::new();
    for a in acqs {
        let label = match a.label {
            GestureLabel::NoGesture => 0,
            GestureLabel::AllGestures => 1,
            _ => continue,
        };
        out.extend(acquisition_samples(a, label, n_c, theta_s, stride)?);
    }
    Ok(out)
}

/// Fraction of samples the discrete network labels correctly.
pub fn accuracy(net: &MmvNetwork, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let hits: Vec<bool> = samples
        .par_iter()
        .map(|s| net.classify_raster(&s.raster).map(|p| p == s.label))
        .collect::<std::result::Result<_, _>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / samples.len() as f64)
}

fn check_samples(samples: &[Sample], width: usize, steps: usize, classes: usize) -> Result<()> {
    for (index, s) in samples.iter().enumerate() {
        let msg = if s.raster.width() != width || s.raster.steps() != steps {
            format!(
                "raster is {}x{}, expected {steps}x{width}",
                s.raster.steps(),
                s.raster.width()
            )
        } else if s.label >= classes {
            format!("label {} out of range for {classes} classes", s.label)
        } else {
            continue;
        };
        return Err(TrainError::BadSample { index, msg });
    }
    Ok(())
}

/// Trains a `classes`-way network; returns the best discrete snapshot.
pub fn train(
    train_set: &[Sample],
    val_set: &[Sample],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::EmptySplit {
            train: train_set.len(),
            val: val_set.len(),
        });
    }
    cfg.validate()?;
    if classes < 2 {
        return Err(TrainError::InvalidConfig(
            "need at least two classes".into(),
        ));
    }
    let (width, steps) = (train_set[0].raster.width(), train_set[0].raster.steps());
    check_samples(train_set, width, steps, classes)?;
    check_samples(val_set, width, steps, classes)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TrainableMmv::random(width, cfg.neurons, classes, &mut rng);
    model.project(steps as f64);
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let nb = train_set.len().div_ceil(cfg.batch_size);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MmvNetwork)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut rho = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            rho = cfg.rho(epoch, b, nb);
            let eff = Effective::new(&model, rho, cfg.tau_b, GradMode::Surrogate);
            let parts: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| sample_grad(&model, &eff, &train_set[i], GradMode::Surrogate))
                .collect();
            let mut grad = vec![0.0; model.params.len()];
            for (loss, g) in &parts {
                loss_sum += loss;
                for (acc, x) in grad.iter_mut().zip(g) {
                    *acc += x;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grad);
            model.project(steps as f64);
        }
        let loss = loss_sum / train_set.len() as f64;
        if !loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        let net = model.to_network(cfg.tau_b)?;
        let val_acc = accuracy(&net, val_set)?;
        log::info!("epoch {epoch:3} loss {loss:.4} val_acc {val_acc:.4} rho {rho:.3}");
        history.push(EpochRecord {
            epoch,
            loss,
            val_acc,
            rho,
        });
        // ties go to the later, more trained epoch
        let eligible = cfg.is_post_binarization(epoch);
        if eligible && best.as_ref().is_none_or(|(acc, _, _)| val_acc >= *acc) {
            best = Some((val_acc, epoch, net));
        }
    }
    let (best_val_acc, best_epoch, network) =
        best.expect("validated config has a post-binarization epoch");
    Ok(TrainOutcome {
        network,
        best_epoch,
        best_val_acc,
        history,
        model,
    })
}

/// Two-class (no gesture / gesture) wake-up detector.
pub fn train_detector(
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train(train_set, val_set, 2, cfg)
}

pub fn write_history_csv<W: Write>(history: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,loss,val_acc,rho")?;
    for r in history {
        writeln!(out, "{},{},{},{}", r.epoch, r.loss, r.val_acc, r.rho)?;
    }
    Ok(())
}
