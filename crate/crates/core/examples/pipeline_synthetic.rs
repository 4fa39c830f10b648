//! End-to-end run on a synthetic suite: train the wake-up detector, then
//! recognize gestures in idle and single-gesture sequences.
//!
//! ```text
//! cargo run --release --example pipeline_synthetic -- [sequences_per_class] [epochs]
//! ```

use std::time::Instant;

use thermal_gesture::pipeline::{
    evaluate, CostAssumptions, CostReport, MmvDetector, PipelineConfig,
};
use thermal_gesture::synth::{detection_samples, SceneGenerator};
use thermal_gesture::train::{split_train_val, train_detector, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let per_class = args.next().map(|a| a.parse()).transpose()?.unwrap_or(50);
    let epochs = args.next().map(|a| a.parse()).transpose()?.unwrap_or(50);
    let cfg = PipelineConfig::default();

    let t0 = Instant::now();
    let samples = detection_samples(11, 500, cfg.n_c, cfg.theta_s)?;
    let (train, val) = split_train_val(samples, 0.7, 11)?;
    let tcfg = TrainConfig {
        epochs,
        binarize_end: TrainConfig::default().binarize_end.min(epochs),
        binarize_start: TrainConfig::default().binarize_start.min(epochs / 2),
        ..TrainConfig::default()
    };
    let outcome = train_detector(&train, &val, &tcfg)?;
    println!(
        "detector: {} neurons, val accuracy {:.3} (epoch {}), trained in {:.1?}",
        outcome.network.neurons(),
        outcome.best_val_acc,
        outcome.best_epoch,
        t0.elapsed()
    );

    let t1 = Instant::now();
    let suite = SceneGenerator::new(2024).suite(per_class);
    let cost = CostReport::new(&outcome.network, &CostAssumptions::from_config(&cfg));
    let detector = MmvDetector {
        net: outcome.network,
        theta_s: cfg.theta_s,
    };
    let report = evaluate(&suite, &cfg, &detector)?.with_cost(cost);
    println!("{report}");
    println!(
        "pipeline over {} sequences took {:.1?}",
        suite.len(),
        t1.elapsed()
    );
    Ok(())
}
