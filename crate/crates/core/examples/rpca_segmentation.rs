//! Separate a moving hand from the static cabin with robust PCA and locate it.
//!
//! ```text
//! cargo run --release --example rpca_segmentation -- [lambda]
//! ```

use nalgebra::DMatrix;
use thermal_gesture::classifier::GestureClass;
use thermal_gesture::rpca::{pcp, RpcaConfig};
use thermal_gesture::synth::SceneGenerator;
use thermal_gesture::thermal_io::{window_at, FrameShape, SENSOR_WIDTH};
use thermal_gesture::tracker::{extract_centroid, DEFAULT_BLOB_THRESHOLD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda: f64 = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(0.05);
    let mut gen = SceneGenerator::new(5);
    let frames = gen.frames(GestureClass::Horizontal);
    println!("horizontal swipe: x sweeps out and back while y stays put");

    for k in gen.motion_window_ends() {
        let w = window_at(&frames, k, 5)?.normalize();
        let m = DMatrix::from_row_slice(w.rows(), w.cols(), w.data());
        let res = pcp(&m, &RpcaConfig::with_lambda(lambda))?;
        let newest: Vec<f64> = res.sparse.row(w.rows() - 1).iter().copied().collect();
        let found = extract_centroid(&newest, FrameShape::SENSOR, DEFAULT_BLOB_THRESHOLD);
        match found {
            Some(c) => println!(
                "frame {k:>2}: centroid ({:5.2}, {:5.2}), {} iterations, residual {:.1e}",
                c.x, c.y, res.iterations, res.residual
            ),
            None => println!("frame {k:>2}: no blob"),
        }
        if k == gen.motion_window_ends().start + 3 {
            println!("sparse part of the newest frame:");
            let peak = newest.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for r in newest.chunks(SENSOR_WIDTH) {
                let line: String = r
                    .iter()
                    .map(|v| match v.abs() / peak {
                        x if x > 0.5 => '#',
                        x if x > 0.1 => '+',
                        _ => '.',
                    })
                    .collect();
                println!("  {line}");
            }
        }
    }
    Ok(())
}
