//! Rule-based classification of centroid tracks, from hand-made paths and
//! through the low-pass tracker.
//!
//! ```text
//! cargo run --example classify_tracks
//! ```

use std::f64::consts::PI;

use thermal_gesture::classifier::{classify_points, classify_track, features};
use thermal_gesture::tracker::{Centroid, GestureTrack};

fn circle(n: usize, r: f64, dir: f64) -> Vec<Centroid> {
    (0..n)
        .map(|t| {
            let a = dir * 2.0 * PI * t as f64 / n as f64;
            Centroid::new(16.0 + r * a.cos(), 12.0 + r * a.sin())
        })
        .collect()
}

fn sweep(n: usize, amp: f64, vertical: bool) -> Vec<Centroid> {
    (0..n)
        .map(|t| {
            let d = amp * (2.0 * PI * t as f64 / n as f64).cos();
            if vertical {
                Centroid::new(16.0, 12.0 + d)
            } else {
                Centroid::new(16.0 + d, 12.0)
            }
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (theta_c1, theta_c2) = (5.0, 5.0);
    let cases = [
        ("clockwise circle", circle(10, 6.0, -1.0)),
        ("counter-clockwise circle", circle(10, 6.0, 1.0)),
        ("vertical swipe", sweep(10, 7.0, true)),
        ("horizontal swipe", sweep(10, 9.0, false)),
        ("small circle", circle(10, 1.5, 1.0)),
    ];
    println!(
        "{:<26} {:>7} {:>7} {:>8}  class",
        "raw track", "D_x", "D_y", "trend"
    );
    for (name, pts) in &cases {
        let f = features(pts)?;
        let class = classify_points(pts, theta_c1, theta_c2)?;
        println!(
            "{name:<26} {:>7.2} {:>7.2} {:>8.2}  {class}",
            f.extent_x, f.extent_y, f.angle_trend
        );
    }

    // the tracker smooths raw centroids before classification
    println!("\nafter low-pass filtering (beta 0.5):");
    for (name, pts) in &cases {
        let mut track = GestureTrack::new(10, 0.5);
        for (k, &p) in pts.iter().enumerate() {
            track.update(k, p);
        }
        println!("{name:<26} {}", classify_track(&track, theta_c1, theta_c2)?);
    }
    Ok(())
}
