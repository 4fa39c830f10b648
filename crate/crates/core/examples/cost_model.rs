//! Memory and compute budget of the pipeline for several network sizes.
//!
//! ```text
//! cargo run --example cost_model -- [checkpoint.mmv]
//! ```

use thermal_gesture::mmv::load_checkpoint;
use thermal_gesture::pipeline::{
    flops_svd, param_bytes, CostAssumptions, CostReport, PipelineConfig,
};
use thermal_gesture::thermal_io::SENSOR_WIDTH;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::default();
    let a = CostAssumptions::from_config(&cfg);
    println!(
        "one SVD of a {}x{} window: {} operations",
        cfg.n_c,
        cfg.frame_height * cfg.frame_width,
        flops_svd(
            cfg.n_c as u64,
            cfg.frame_height as u64,
            cfg.frame_width as u64
        )
    );

    println!("\nparameter memory by size (packed ternary vs one byte per synapse):");
    for c in [64u64, 125, 250, 500] {
        let p = param_bytes(c, SENSOR_WIDTH as u64, 2);
        println!(
            "  C={c:<4} {:>8} B packed {:>9} B unpacked",
            p.packed_bytes, p.unpacked_bytes
        );
    }

    println!("\nfully connected upper bound at one gesture per minute:");
    for c in [125usize, 250, 500] {
        let r = CostReport::for_size(c, SENSOR_WIDTH, 2, SENSOR_WIDTH * c + c * c, &a);
        println!(
            "  C={c:<4} MMV {:.3e} ops/s, R-PCA {:.3e} ops/s, share of R-PCA {:.1}%",
            r.mmv_flops,
            r.rpca_flops,
            100.0 * r.rpca_flops / r.avg_flops
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        let net = load_checkpoint(&path)?;
        println!("\n{path}:\n{}", CostReport::new(&net, &a));
    }
    Ok(())
}
