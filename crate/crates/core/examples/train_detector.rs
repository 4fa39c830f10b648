//! Trains the MMV wake-up detector on synthetic windows and saves a checkpoint.
//!
//! ```text
//! cargo run --release --example train_detector -- [neurons] [epochs] [out.mmv]
//! ```

use thermal_gesture::mmv::save_checkpoint;
use thermal_gesture::synth::detection_samples;
use thermal_gesture::train::{split_train_val, train_detector, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let neurons = args.next().map(|a| a.parse()).transpose()?.unwrap_or(125);
    let epochs = args.next().map(|a| a.parse()).transpose()?.unwrap_or(50);
    let out = args.next().unwrap_or_else(|| "detector.mmv".into());

    let samples = detection_samples(7, 500, 5, 0.2)?;
    let (train, val) = split_train_val(samples, 0.7, 7)?;
    let cfg = TrainConfig {
        neurons,
        epochs,
        ..TrainConfig::default()
    };
    let outcome = train_detector(&train, &val, &cfg)?;
    println!(
        "best validation accuracy {:.3} at epoch {} ({} connected synapses)",
        outcome.best_val_acc,
        outcome.best_epoch,
        outcome.network.connectivity().connected()
    );
    save_checkpoint(&outcome.network, &out)?;
    println!("wrote {out}");
    Ok(())
}
