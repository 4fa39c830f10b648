//! Turn a window of thermal frames into the spike raster the detector reads.
//!
//! ```text
//! cargo run --example spike_encoding -- [theta_s]
//! ```

use thermal_gesture::classifier::GestureClass;
use thermal_gesture::synth::SceneGenerator;
use thermal_gesture::thermal_io::{window_at, SENSOR_HEIGHT, SENSOR_WIDTH};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta_s: f64 = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(0.2);
    let mut gen = SceneGenerator::new(3);
    let n_c = 5;

    for (label, class) in [
        ("idle", GestureClass::NoGesture),
        ("vertical swipe", GestureClass::Vertical),
    ] {
        let frames = gen.frames(class);
        let k = gen.motion_window_ends().start + 3;
        let window = window_at(&frames, k, n_c)?;
        let raster = window.encode(theta_s)?;
        println!(
            "{label}: window ending at frame {k}, {} steps x {} channels, {} spikes",
            raster.steps(),
            raster.width(),
            raster.count_ones()
        );
        // newest frame difference back as an image
        let diffs = raster.unreshape(SENSOR_HEIGHT);
        let newest = diffs.last().expect("window has at least one difference");
        for r in newest.chunks(SENSOR_WIDTH) {
            let line: String = r.iter().map(|&b| if b == 1 { '#' } else { '.' }).collect();
            println!("  {line}");
        }
    }
    Ok(())
}
