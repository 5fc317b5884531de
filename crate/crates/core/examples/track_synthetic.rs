//! Tracks a generated sequence in memory and prints per-frame diagnostics.
//!
//! cargo run --release --example track_synthetic -- occlude [seed]

use longtrack::config::TrackerConfig;
use longtrack::eval::{center_error, evaluate};
use longtrack::sequence::{synthesize, Scenario, SynthParams};
use longtrack::tracker::run_sequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario: Scenario = std::env::args().nth(1).unwrap_or_else(|| "translate".into()).parse()?;
    let seed = std::env::args().nth(2).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let seq = synthesize(&SynthParams { seed, ..SynthParams::new(scenario) });
    let start = std::time::Instant::now();
    let results = run_sequence(seq.frames.iter().cloned().map(Ok), seq.groundtruth[0], TrackerConfig::default(), None)?;
    let elapsed = start.elapsed();

    println!("frame      x      y      w      h  response  redet  scale   iou");
    for (r, gt) in results.iter().zip(&seq.groundtruth) {
        let b = r.bbox;
        println!(
            "{:5} {:6.1} {:6.1} {:6.1} {:6.1} {:9.3} {:>6} {:6.3} {:5.2}",
            r.frame + 1,
            b.x,
            b.y,
            b.w,
            b.h,
            r.response,
            if r.redetection_activated { if r.redetection_accepted { "acc" } else { "yes" } } else { "" },
            r.scale,
            b.iou(gt)
        );
    }
    let boxes: Vec<_> = results.iter().map(|r| r.bbox).collect();
    let e = evaluate(&boxes, &seq.groundtruth)?;
    let mean_err = boxes.iter().zip(&seq.groundtruth).map(|(b, g)| center_error(b, g)).sum::<f64>() / boxes.len() as f64;
    println!("precision@20={:.3} auc={:.3} mean_center_error={mean_err:.2} time={elapsed:.2?}", e.precision_score, e.auc);
    Ok(())
}
