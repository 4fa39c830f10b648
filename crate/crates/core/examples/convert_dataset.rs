//! Convert a raw frame dump into the canonical acquisition format and read it back.
//!
//! ```text
//! cargo run --example convert_dataset -- [raw_file name out_file]
//! ```
//!
//! Without arguments a small raw dump (one image row per line) is generated.

use std::fs::File;
use std::io::Write;

use thermal_gesture::thermal_io::{
    convert_raw, load_acquisition, save_acquisition, SENSOR_HEIGHT, SENSOR_WIDTH,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = std::env::temp_dir();
    let (raw, name, out) = match args.as_slice() {
        [raw, name, out] => (raw.into(), name.clone(), out.into()),
        _ => {
            let raw = dir.join("vert-gesture-n.raw");
            let mut f = File::create(&raw)?;
            writeln!(f, "# frame dump, 24 lines of 32 values per frame")?;
            for frame in 0..6 {
                for y in 0..SENSOR_HEIGHT {
                    let row: Vec<String> = (0..SENSOR_WIDTH)
                        .map(|x| {
                            format!(
                                "{:.2}",
                                22.0 + 0.1 * x as f64 + 0.05 * y as f64 + 0.3 * frame as f64
                            )
                        })
                        .collect();
                    writeln!(f, "{}", row.join(" "))?;
                }
            }
            (
                raw,
                "vert-gesture-n".to_string(),
                dir.join("vert-gesture-n.csv"),
            )
        }
    };

    let acq = convert_raw(File::open(&raw)?, &name)?;
    save_acquisition(&acq, &out)?;
    let back = load_acquisition(&out)?;
    println!(
        "{} -> {}: {} frames of {}x{}, label {:?}, {:?}",
        std::path::Path::new(&raw).display(),
        std::path::Path::new(&out).display(),
        back.len(),
        SENSOR_HEIGHT,
        SENSOR_WIDTH,
        back.label,
        back.daypart
    );
    assert_eq!(back, acq);
    Ok(())
}
