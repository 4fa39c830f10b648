//! Acquisition-level scoring.
//!
//! Each single-gesture acquisition is one sample. Its first event is scored
//! against the label; without any event the sample lands in the no-gesture
//! column, and further events count as spurious. An idle acquisition is
//! correct when nothing fires; otherwise its first event is the prediction.
//! Acquisitions holding several gestures in unknown order are skipped.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostReport;
use super::{process_stream, PipelineConfig, PipelineError, Result, StreamStats, WakeDetector};
use crate::classifier::GestureClass;
use crate::thermal_io::{Acquisition, Daypart, GestureLabel};

const N: usize = GestureClass::ALL.len();

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub name: String,
    pub expected: GestureClass,
    /// Classes of all events in stream order.
    pub events: Vec<GestureClass>,
    pub scored: GestureClass,
    pub correct: bool,
    pub spurious: usize,
    pub stats: StreamStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// `confusion[expected][predicted]` in [`GestureClass::ALL`] order.
    pub confusion: [[usize; N]; N],
    pub samples: usize,
    /// Gesture acquisitions without any event.
    pub missed: usize,
    /// Events beyond the first in an acquisition.
    pub spurious: usize,
    pub skipped: Vec<String>,
    pub cost: Option<CostReport>,
    pub acquisitions: Vec<AcquisitionResult>,
}

fn score(
    acq: &Acquisition,
    cfg: &PipelineConfig,
    detector: &(impl WakeDetector + ?Sized),
) -> Result<AcquisitionResult> {
    let expected = acq
        .label
        .class()
        .expect("multi-gesture acquisitions are filtered out");
    let (events, stats) = process_stream(acq.frames(), cfg, detector)?;
    let classes: Vec<GestureClass> = events.iter().map(|e| e.predicted).collect();
    let scored = classes.first().copied().unwrap_or(GestureClass::NoGesture);
    Ok(AcquisitionResult {
        name: acq.name.clone(),
        expected,
        scored,
        correct: scored == expected,
        spurious: classes.len().saturating_sub(1),
        events: classes,
        stats,
    })
}

/// Runs every acquisition through its own pipeline (in parallel) and scores it.
pub fn evaluate<D: WakeDetector + ?Sized>(
    dataset: &[Acquisition],
    cfg: &PipelineConfig,
    detector: &D,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let (usable, skipped): (Vec<&Acquisition>, Vec<&Acquisition>) = dataset
        .iter()
        .partition(|a| a.label != GestureLabel::AllGestures);
    for a in &skipped {
        log::warn!("skipping {}: several gestures in unknown order", a.name);
    }
    if usable.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let results: Vec<AcquisitionResult> = usable
        .par_iter()
        .map(|a| score(a, cfg, detector))
        .collect::<Result<_>>()?;

    let mut confusion = [[0usize; N]; N];
    for r in &results {
        confusion[r.expected.index()][r.scored.index()] += 1;
    }
    let hits: usize = (0..N).map(|i| confusion[i][i]).sum();
    Ok(EvaluationReport {
        accuracy: hits as f64 / results.len() as f64,
        confusion,
        samples: results.len(),
        missed: results
            .iter()
            .filter(|r| r.expected != GestureClass::NoGesture && r.events.is_empty())
            .count(),
        spurious: results.iter().map(|r| r.spurious).sum(),
        skipped: skipped.iter().map(|a| a.name.clone()).collect(),
        cost: None,
        acquisitions: results,
    })
}

/// Splits a recorded dataset into the detector's training acquisitions
/// (idle and multi-gesture, morning) and the evaluation acquisitions (all others).
pub fn protocol_split(dataset: Vec<Acquisition>) -> (Vec<Acquisition>, Vec<Acquisition>) {
    dataset.into_iter().partition(|a| {
        a.daypart == Daypart::Morning
            && matches!(a.label, GestureLabel::NoGesture | GestureLabel::AllGestures)
    })
}

impl EvaluationReport {
    pub fn with_cost(mut self, cost: CostReport) -> Self {
        self.cost = Some(cost);
        self
    }

    /// Samples per expected class.
    pub fn class_counts(&self) -> [usize; N] {
        self.confusion.map(|row| row.iter().sum())
    }

    /// One row per acquisition.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "name,expected,predicted,correct,events,spurious,windows,detections,rpca_calls"
        )?;
        for r in &self.acquisitions {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.name,
                r.expected,
                r.scored,
                r.correct,
                r.events.len(),
                r.spurious,
                r.stats.windows,
                r.stats.detections,
                r.stats.rpca_calls
            )?;
        }
        Ok(())
    }

    /// One JSON object per acquisition, then a summary object.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.acquisitions {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        }
        let summary = serde_json::json!({
            "accuracy": self.accuracy,
            "samples": self.samples,
            "missed": self.missed,
            "spurious": self.spurious,
            "skipped": self.skipped,
            "confusion": self.confusion,
            "cost": self.cost,
        });
        writeln!(out, "{summary}")
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "accuracy {:.2}% over {} acquisitions ({} missed, {} spurious events)",
            100.0 * self.accuracy,
            self.samples,
            self.missed,
            self.spurious
        )?;
        write!(f, "{:>14}", "expected \\ got")?;
        for c in GestureClass::ALL {
            write!(f, " {:>12}", c.name())?;
        }
        writeln!(f)?;
        for (i, row) in self.confusion.iter().enumerate() {
            write!(f, "{:>14}", GestureClass::ALL[i].name())?;
            for v in row {
                write!(f, " {v:>12}")?;
            }
            writeln!(f)?;
        }
        if !self.skipped.is_empty() {
            writeln!(f, "skipped: {}", self.skipped.join(", "))?;
        }
        if let Some(cost) = &self.cost {
            writeln!(f, "{cost}")?;
        }
        Ok(())
    }
}
