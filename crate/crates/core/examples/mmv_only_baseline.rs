//! Ask the spiking network to recognize all five classes from a single
//! window, without segmentation or tracking.
//!
//! ```text
//! cargo run --release --example mmv_only_baseline -- [neurons] [epochs]
//! ```

use thermal_gesture::classifier::GestureClass;
use thermal_gesture::synth::class_samples;
use thermal_gesture::train::{split_train_val, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let neurons = args.next().map(|a| a.parse()).transpose()?.unwrap_or(125);
    let epochs: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(30);
    let cfg = TrainConfig {
        neurons,
        epochs,
        binarize_start: epochs / 5,
        binarize_end: epochs / 2,
        seed: 4,
        ..TrainConfig::default()
    };

    let samples = class_samples(4, 100, 5, 0.2)?;
    let (tr, val) = split_train_val(samples, cfg.split_fraction, cfg.seed)?;
    let out = train(&tr, &val, GestureClass::ALL.len(), &cfg)?;
    println!(
        "five-class MMV, C={neurons}: validation accuracy {:.3} (epoch {})",
        out.best_val_acc, out.best_epoch
    );

    let mut confusion = [[0usize; 5]; 5];
    for s in &val {
        let got = out.network.classify_raster(&s.raster)?;
        confusion[s.label][got] += 1;
    }
    for (i, row) in confusion.iter().enumerate() {
        println!("{:>12} {row:?}", GestureClass::ALL[i].name());
    }
    println!("a single window sees only part of a gesture, so the tracker-based pipeline does the classifying");
    Ok(())
}
