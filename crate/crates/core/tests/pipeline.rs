use nalgebra::DMatrix;

use thermal_gesture::classifier::GestureClass;
use thermal_gesture::pipeline::{process_stream, PipelineConfig};
use thermal_gesture::rpca::{pcp, RpcaConfig};
use thermal_gesture::synth::{SceneConfig, SceneGenerator};
use thermal_gesture::thermal_io::{window_at, ThermalWindow};
use thermal_gesture::tracker::{extract_centroid, DEFAULT_BLOB_THRESHOLD};

fn oracle(w: &ThermalWindow) -> bool {
    w.encode(0.2).unwrap().count_ones() > 0
}

#[test]
fn sparse_part_concentrates_on_the_hand() {
    // static background without sensor noise; the hand is in every frame of each window
    let scene = SceneConfig {
        noise_sigma: 0.0,
        ..SceneConfig::default()
    };
    let mut gen = SceneGenerator::with_config(scene, 12);
    let cfg = PipelineConfig::default();
    let radius = 3.0 * gen.config().blob_sigma;
    for class in [
        GestureClass::Vertical,
        GestureClass::CirCw,
        GestureClass::Horizontal,
    ] {
        let (frames, hands) = gen.frames_with_hands(class);
        for k in gen.motion_window_ends().skip(cfg.n_c - 1) {
            let w = window_at(&frames, k, cfg.n_c).unwrap().normalize();
            let m = DMatrix::from_row_slice(w.rows(), w.cols(), w.data());
            let r = pcp(&m, &RpcaConfig::with_lambda(cfg.lambda)).unwrap();

            // blob pixels: within three blob widths of the hand in any frame of the window
            let centers: Vec<(f64, f64)> = hands[k + 1 - cfg.n_c..=k]
                .iter()
                .flatten()
                .copied()
                .collect();
            let on_blob = |i: usize| {
                let (y, x) = ((i / 32) as f64, (i % 32) as f64);
                centers
                    .iter()
                    .any(|&(cx, cy)| (x - cx).hypot(y - cy) <= radius)
            };
            let total = r.sparse.norm();
            let off = r
                .sparse
                .row_iter()
                .flat_map(|row| row.iter().copied().enumerate().collect::<Vec<_>>())
                .filter(|&(i, _)| !on_blob(i))
                .map(|(_, v)| v * v)
                .sum::<f64>()
                .sqrt();
            assert!(
                off <= 0.1 * total,
                "{class} frame {k}: off-blob norm {off:.3} of {total:.3}"
            );

            let newest: Vec<f64> = r.sparse.row(w.rows() - 1).iter().copied().collect();
            let c =
                extract_centroid(&newest, cfg.shape(), DEFAULT_BLOB_THRESHOLD).expect("hand found");
            let (hx, hy) = hands[k].unwrap();
            assert!(
                (c.x - hx).hypot(c.y - hy) < 1.5,
                "{class} frame {k}: centroid {c:?} vs hand ({hx:.1}, {hy:.1})"
            );
        }
    }
}

#[test]
fn every_gesture_in_a_long_stream_is_reported_once() {
    let order = [
        GestureClass::Horizontal,
        GestureClass::CirCw,
        GestureClass::NoGesture,
        GestureClass::Vertical,
        GestureClass::CirCcw,
    ];
    let frames = SceneGenerator::new(31).concatenated(&order, 10);
    let (events, stats) = process_stream(&frames, &PipelineConfig::default(), &oracle).unwrap();
    let got: Vec<GestureClass> = events.iter().map(|e| e.predicted).collect();
    assert_eq!(
        got,
        [
            GestureClass::Horizontal,
            GestureClass::CirCw,
            GestureClass::Vertical,
            GestureClass::CirCcw
        ]
    );
    assert!(events.windows(2).all(|w| w[0].end_index < w[1].start_index));
    assert_eq!(stats.events, 4);
    assert!(stats.rpca_calls <= stats.detections);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let suite = SceneGenerator::new(40).suite(2);
    let cfg = PipelineConfig::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let single =
        pool.install(|| thermal_gesture::pipeline::evaluate(&suite, &cfg, &oracle).unwrap());
    let multi = thermal_gesture::pipeline::evaluate(&suite, &cfg, &oracle).unwrap();
    assert_eq!(single, multi);
}
