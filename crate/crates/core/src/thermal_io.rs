//! Thermal acquisitions, sliding windows and the frame-to-spike encoding.
//!
//! A window of `n_c` consecutive frames is normalized to `[0, 1]` using the
//! window-global min/max, differentiated along time and thresholded on the
//! absolute change. The resulting `(n_c - 1) x (h * w)` bit matrix is read as
//! `(n_c - 1) * h` time steps of `w` channels, one image row per step.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::GestureClass;

/// Rows of the MLX90640 frame.
pub const SENSOR_HEIGHT: usize = 24;
/// Columns of the MLX90640 frame.
pub const SENSOR_WIDTH: usize = 32;
/// Pixels per flattened frame.
pub const SENSOR_PIXELS: usize = SENSOR_HEIGHT * SENSOR_WIDTH;
/// Acquisition frame rate in frames per second.
pub const SENSOR_FPS: u32 = 8;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported frame shape {height}x{width} (expected {SENSOR_HEIGHT}x{SENSOR_WIDTH})")]
    UnsupportedShape { height: usize, width: usize },
    #[error("acquisition has no frames")]
    EmptyAcquisition,
    #[error("frame row {row}: expected {expected} values, found {found}")]
    BadFrameWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame row {row}: unparsable value {value:?}")]
    BadNumber { row: usize, value: String },
    #[error("frame row {row}: non-finite value at column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("window of {n_c} frames ending at {end} reaches before frame 0")]
    InsufficientHistory { end: usize, n_c: usize },
    #[error("frame index {index} out of range for {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("window length must be >= 2, got {0}")]
    WindowTooShort(usize),
    #[error("spike threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("frame shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unrecognized acquisition name {0:?}")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, ThermalError>;

/// Height and width of a frame in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameShape {
    pub height: usize,
    pub width: usize,
}

impl FrameShape {
    pub const SENSOR: FrameShape = FrameShape {
        height: SENSOR_HEIGHT,
        width: SENSOR_WIDTH,
    };

    pub fn new(height: usize, width: usize) -> Self {
        FrameShape { height, width }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl Default for FrameShape {
    fn default() -> Self {
        FrameShape::SENSOR
    }
}

/// One 24x32 temperature frame in degrees Celsius, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalFrame {
    pixels: Vec<f64>,
    index: usize,
}

impl ThermalFrame {
    pub fn new(pixels: Vec<f64>, index: usize) -> Result<Self> {
        if pixels.len() != SENSOR_PIXELS {
            return Err(ThermalError::BadFrameWidth {
                row: index,
                expected: SENSOR_PIXELS,
                found: pixels.len(),
            });
        }
        if let Some(col) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(ThermalError::NonFinite { row: index, col });
        }
        Ok(ThermalFrame { pixels, index })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Temperature at image row `y`, column `x`.
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * SENSOR_WIDTH + x]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Daypart {
    Morning,
    Night,
}

impl Daypart {
    pub fn suffix(&self) -> &'static str {
        match self {
            Daypart::Morning => "m",
            Daypart::Night => "n",
        }
    }
}

/// Ground-truth content of an acquisition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GestureLabel {
    NoGesture,
    AllGestures,
    CirCw,
    CirCcw,
    Vertical,
    Horizontal,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 6] = [
        GestureLabel::NoGesture,
        GestureLabel::AllGestures,
        GestureLabel::CirCw,
        GestureLabel::CirCcw,
        GestureLabel::Vertical,
        GestureLabel::Horizontal,
    ];

    /// Name prefix used in acquisition file names.
    pub fn prefix(&self) -> &'static str {
        match self {
            GestureLabel::NoGesture => "no",
            GestureLabel::AllGestures => "all",
            GestureLabel::CirCw => "cirCW",
            GestureLabel::CirCcw => "cirCCW",
            GestureLabel::Vertical => "vert",
            GestureLabel::Horizontal => "hor",
        }
    }

    /// Single gesture class for this label. `AllGestures` mixes classes and has none.
    pub fn class(&self) -> Option<GestureClass> {
        match self {
            GestureLabel::NoGesture => Some(GestureClass::NoGesture),
            GestureLabel::AllGestures => None,
            GestureLabel::CirCw => Some(GestureClass::CirCw),
            GestureLabel::CirCcw => Some(GestureClass::CirCcw),
            GestureLabel::Vertical => Some(GestureClass::Vertical),
            GestureLabel::Horizontal => Some(GestureClass::Horizontal),
        }
    }

    pub fn from_class(class: GestureClass) -> Self {
        match class {
            GestureClass::NoGesture => GestureLabel::NoGesture,
            GestureClass::CirCw => GestureLabel::CirCw,
            GestureClass::CirCcw => GestureLabel::CirCcw,
            GestureClass::Vertical => GestureLabel::Vertical,
            GestureClass::Horizontal => GestureLabel::Horizontal,
        }
    }
}

/// Parses `<kind>-gesture-<m|n>[-<tag>]`, e.g. `cirCW-gesture-m`.
pub fn parse_acquisition_name(name: &str) -> Result<(GestureLabel, Daypart)> {
    let unknown = || ThermalError::UnknownName(name.to_string());
    let mut parts = name.splitn(4, '-');
    let kind = parts.next().ok_or_else(unknown)?;
    if parts.next() != Some("gesture") {
        return Err(unknown());
    }
    let daypart = match parts.next() {
        Some("m") => Daypart::Morning,
        Some("n") => Daypart::Night,
        _ => return Err(unknown()),
    };
    let label = GestureLabel::ALL
        .iter()
        .copied()
        .find(|l| l.prefix() == kind)
        .ok_or_else(unknown)?;
    Ok((label, daypart))
}

pub fn acquisition_name(label: GestureLabel, daypart: Daypart) -> String {
    format!("{}-gesture-{}", label.prefix(), daypart.suffix())
}

/// A named, labeled recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub name: String,
    pub daypart: Daypart,
    pub label: GestureLabel,
    frames: Vec<ThermalFrame>,
}

impl Acquisition {
    /// Builds an acquisition, parsing label and daypart from `name`.
    pub fn new(name: impl Into<String>, frames: Vec<ThermalFrame>) -> Result<Self> {
        let name = name.into();
        let (label, daypart) = parse_acquisition_name(&name)?;
        if frames.is_empty() {
            return Err(ThermalError::EmptyAcquisition);
        }
        Ok(Acquisition {
            name,
            daypart,
            label,
            frames,
        })
    }

    pub fn frames(&self) -> &[ThermalFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The `n_c` frames ending at `k`, flattened row-major.
    pub fn window_at(&self, k: usize, n_c: usize) -> Result<ThermalWindow> {
        window_at(&self.frames, k, n_c)
    }
}

fn parse_frame_row(line: &str, row: usize, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for (col, tok) in line.split(',').enumerate() {
        let tok = tok.trim();
        let v: f64 = tok.parse().map_err(|_| ThermalError::BadNumber {
            row,
            value: tok.to_string(),
        })?;
        if !v.is_finite() {
            return Err(ThermalError::NonFinite { row, col });
        }
        values.push(v);
    }
    if values.len() != expected {
        return Err(ThermalError::BadFrameWidth {
            row,
            expected,
            found: values.len(),
        });
    }
    Ok(values)
}

/// Reads the canonical text format: header `h,w,fps,name`, then one frame per line.
///
/// Row indices in errors count frames from 0 (file line = row + 2).
pub fn read_acquisition<R: Read>(reader: R) -> Result<Acquisition> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .transpose()?
        .filter(|h| !h.trim().is_empty())
        // a file without even a header holds no frames
        .ok_or(ThermalError::EmptyAcquisition)?;
    let fields: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(ThermalError::MalformedHeader(header.clone()));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ThermalError::MalformedHeader(header.clone()))
    };
    let height = parse_dim(fields[0])?;
    let width = parse_dim(fields[1])?;
    let _fps = parse_dim(fields[2])?;
    if (height, width) != (SENSOR_HEIGHT, SENSOR_WIDTH) {
        return Err(ThermalError::UnsupportedShape { height, width });
    }
    let name = fields[3].to_string();
    parse_acquisition_name(&name)?;

    let mut frames = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = frames.len();
        let pixels = parse_frame_row(&line, row, height * width)?;
        frames.push(ThermalFrame { pixels, index: row });
    }
    Acquisition::new(name, frames)
}

pub fn load_acquisition(path: impl AsRef<Path>) -> Result<Acquisition> {
    let file = fs::File::open(path)?;
    read_acquisition(file)
}

pub fn write_acquisition<W: Write>(acq: &Acquisition, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{},{},{},{}",
        SENSOR_HEIGHT, SENSOR_WIDTH, SENSOR_FPS, acq.name
    )?;
    let mut line = String::new();
    for frame in &acq.frames {
        line.clear();
        for (i, v) in frame.pixels.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_acquisition(acq: &Acquisition, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_acquisition(acq, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Loads every regular file of `dir` in name order.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<Acquisition>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    paths.iter().map(load_acquisition).collect()
}

/// Converts a raw frame dump into an [`Acquisition`].
///
/// Accepted layouts, separated by commas, semicolons or whitespace:
/// one frame per line (768 values, or 769 with a leading timestamp column),
/// or one image row per line (32 values, 24 consecutive lines per frame).
/// Lines that do not start with a number are skipped as headers/comments.
pub fn convert_raw<R: Read>(reader: R, name: &str) -> Result<Acquisition> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        match tokens.first() {
            None => continue,
            Some(t) if t.parse::<f64>().is_err() => continue,
            _ => {}
        }
        let mut row = Vec::with_capacity(tokens.len());
        for (col, t) in tokens.iter().enumerate() {
            let v: f64 = t.parse().map_err(|_| ThermalError::BadNumber {
                row: lineno,
                value: t.to_string(),
            })?;
            if !v.is_finite() {
                return Err(ThermalError::NonFinite { row: lineno, col });
            }
            row.push(v);
        }
        rows.push(row);
    }
    let width = rows
        .first()
        .map(Vec::len)
        .ok_or(ThermalError::EmptyAcquisition)?;
    let flat_frames: Vec<Vec<f64>> = match width {
        SENSOR_PIXELS => rows,
        w if w == SENSOR_PIXELS + 1 => rows.into_iter().map(|r| r[1..].to_vec()).collect(),
        SENSOR_WIDTH => {
            if !rows.len().is_multiple_of(SENSOR_HEIGHT) {
                return Err(ThermalError::ShapeMismatch(format!(
                    "{} image rows is not a multiple of {SENSOR_HEIGHT}",
                    rows.len()
                )));
            }
            rows.chunks(SENSOR_HEIGHT).map(|c| c.concat()).collect()
        }
        other => {
            return Err(ThermalError::BadFrameWidth {
                row: 0,
                expected: SENSOR_PIXELS,
                found: other,
            })
        }
    };
    let frames = flat_frames
        .into_iter()
        .enumerate()
        .map(|(i, px)| ThermalFrame::new(px, i))
        .collect::<Result<Vec<_>>>()?;
    Acquisition::new(name, frames)
}

/// `n_c` flattened frames ending at frame `end_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalWindow {
    shape: FrameShape,
    rows: usize,
    data: Vec<f64>,
    end_index: usize,
}

impl ThermalWindow {
    /// Builds a window from row-major data of `rows` frames of `shape`.
    pub fn from_rows(
        shape: FrameShape,
        rows: usize,
        data: Vec<f64>,
        end_index: usize,
    ) -> Result<Self> {
        if data.len() != rows * shape.pixels() {
            return Err(ThermalError::ShapeMismatch(format!(
                "{} values for {rows} frames of {}x{}",
                data.len(),
                shape.height,
                shape.width
            )));
        }
        Ok(ThermalWindow {
            shape,
            rows,
            data,
            end_index,
        })
    }

    pub fn shape(&self) -> FrameShape {
        self.shape
    }

    /// Number of frames (`n_c`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.pixels()
    }

    pub fn end_index(&self) -> usize {
        self.end_index
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.data[i * n..(i + 1) * n]
    }

    /// Min-max scaling over the whole window. A constant window maps to zeros.
    pub fn normalize(&self) -> ThermalWindow {
        let (min, max) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = max - min;
        let data = if range > 0.0 {
            self.data.iter().map(|v| (v - min) / range).collect()
        } else {
            vec![0.0; self.data.len()]
        };
        ThermalWindow {
            data,
            ..self.clone()
        }
    }

    /// Frame-to-frame differences, `(rows - 1) x cols`.
    pub fn temporal_diff(&self) -> DeltaMatrix {
        let n = self.cols();
        let rows = self.rows.saturating_sub(1);
        let mut data = Vec::with_capacity(rows * n);
        for i in 0..rows {
            let (prev, next) = (self.row(i), self.row(i + 1));
            data.extend(next.iter().zip(prev).map(|(b, a)| b - a));
        }
        DeltaMatrix {
            shape: self.shape,
            rows,
            data,
            end_index: self.end_index,
        }
    }

    /// Normalize, differentiate and threshold in one go.
    pub fn encode(&self, theta_s: f64) -> Result<SpikeRaster> {
        self.normalize().temporal_diff().to_spikes(theta_s)
    }
}

pub fn window_at(frames: &[ThermalFrame], k: usize, n_c: usize) -> Result<ThermalWindow> {
    if n_c < 2 {
        return Err(ThermalError::WindowTooShort(n_c));
    }
    if k + 1 < n_c {
        return Err(ThermalError::InsufficientHistory { end: k, n_c });
    }
    if k >= frames.len() {
        return Err(ThermalError::IndexOutOfRange {
            index: k,
            len: frames.len(),
        });
    }
    let mut data = Vec::with_capacity(n_c * SENSOR_PIXELS);
    for f in &frames[k + 1 - n_c..=k] {
        data.extend_from_slice(&f.pixels);
    }
    ThermalWindow::from_rows(FrameShape::SENSOR, n_c, data, k)
}

/// Temporal differences of a normalized window.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMatrix {
    shape: FrameShape,
    rows: usize,
    data: Vec<f64>,
    end_index: usize,
}

impl DeltaMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.pixels()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.data[i * n..(i + 1) * n]
    }

    /// `1` where `|delta| >= theta_s`.
    pub fn to_spikes(&self, theta_s: f64) -> Result<SpikeRaster> {
        if !(theta_s > 0.0 && theta_s.is_finite()) {
            return Err(ThermalError::InvalidThreshold(theta_s));
        }
        let bits = self
            .data
            .iter()
            .map(|d| u8::from(d.abs() >= theta_s))
            .collect();
        Ok(SpikeRaster {
            steps: self.rows * self.shape.height,
            width: self.shape.width,
            bits,
            origin: self.end_index,
        })
    }
}

/// Binary time x channel matrix fed one row per step to the MMV network.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpikeRaster {
    steps: usize,
    width: usize,
    bits: Vec<u8>,
    origin: usize,
}

impl SpikeRaster {
    pub fn new(steps: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != steps * width {
            return Err(ThermalError::ShapeMismatch(format!(
                "{} bits for a {steps}x{width} raster",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(ThermalError::ShapeMismatch(
                "raster entries must be 0 or 1".into(),
            ));
        }
        Ok(SpikeRaster {
            steps,
            width,
            bits,
            origin: 0,
        })
    }

    pub fn zeros(steps: usize, width: usize) -> Self {
        SpikeRaster {
            steps,
            width,
            bits: vec![0; steps * width],
            origin: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Frame index of the window this raster was encoded from.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn step(&self, t: usize) -> &[u8] {
        &self.bits[t * self.width..(t + 1) * self.width]
    }

    pub fn set(&mut self, t: usize, channel: usize, on: bool) {
        self.bits[t * self.width + channel] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// First `steps` rows only.
    pub fn truncated(&self, steps: usize) -> SpikeRaster {
        let steps = steps.min(self.steps);
        SpikeRaster {
            steps,
            width: self.width,
            bits: self.bits[..steps * self.width].to_vec(),
            origin: self.origin,
        }
    }

    /// Reverses the reshape: `frame_height` steps per frame difference.
    pub fn unreshape(&self, frame_height: usize) -> Vec<Vec<u8>> {
        self.bits
            .chunks(frame_height * self.width)
            .map(<[u8]>::to_vec)
            .collect()
    }
}

impl fmt::Display for SpikeRaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.steps {
            for &b in self.step(t) {
                f.write_str(if b == 1 { "|" } else { "." })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
