//! Estimates target growth on the zoom sequence with the scale filter alone.
//!
//! cargo run --release --example scale_pyramid

use longtrack::scale::{ScaleModel, ScaleParams};
use longtrack::sequence::{synthesize, Scenario, SynthParams};

fn main() -> longtrack::Result<()> {
    let seq = synthesize(&SynthParams::new(Scenario::Zoom));
    let gt = &seq.groundtruth;
    let mut size = gt[0].size();
    let mut model = ScaleModel::train(&seq.frames[0], gt[0].center(), size, ScaleParams::default())?;
    println!("template {:?} px", model.template);
    println!("frame  true w  est w  level   peak");
    for (k, frame) in seq.frames.iter().enumerate().skip(1) {
        // True centers isolate the scale estimate from translation errors.
        let center = gt[k].center();
        let est = model.estimate_scale(&model.build_pyramid(frame, center)?)?;
        let m = model.params.damped(est.scale);
        size = (size.0 * m, size.1 * m);
        model = model.update_scale_model(frame, center, size)?;
        let peak = est.responses.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        println!("{:5} {:7.1} {:6.1} {:6} {:6.3}", k + 1, gt[k].w, size.0, est.exponent, peak);
    }
    Ok(())
}
