//! Scores a results file against ground truth, or a made-up run when no
//! paths are given.
//!
//! cargo run --release --example evaluate -- results.csv groundtruth_rect.txt

use longtrack::bbox::BoundingBox;
use longtrack::eval::evaluate;
use longtrack::results::read_boxes;
use longtrack::sequence::read_groundtruth;

fn main() -> longtrack::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (preds, gts) = if let [results, gt] = args.as_slice() {
        (read_boxes(results)?, read_groundtruth(gt)?)
    } else {
        let gts: Vec<BoundingBox> = (0..50).map(|i| BoundingBox::new(2.0 * i as f64, 50.0, 40.0, 40.0)).collect();
        // Drifts away linearly.
        let preds = gts.iter().enumerate().map(|(i, b)| BoundingBox::new(b.x + i as f64, b.y, b.w, b.h)).collect();
        (preds, gts)
    };
    let e = evaluate(&preds, &gts)?;
    println!("frames {} (skipped {})", e.frames_used, e.frames_skipped);
    println!("precision@20 {:.3}  auc {:.3}", e.precision_score, e.auc);
    for (t, v) in e.success.thresholds.iter().zip(&e.success.values).step_by(4) {
        println!("  iou > {t:.2}: {v:.3}");
    }
    Ok(())
}
