//! Writes a synthetic sequence in OTB layout.
//!
//! cargo run --release --example synthesize -- zoom /tmp/zoom [frames]

use longtrack::sequence::{synthesize, Scenario, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scenario: Scenario = args.next().unwrap_or_else(|| "translate".into()).parse()?;
    let out = args.next().unwrap_or_else(|| format!("synthetic-{scenario}"));
    let mut params = SynthParams::new(scenario);
    if let Some(n) = args.next() {
        params.frames = n.parse()?;
    }
    let seq = synthesize(&params);
    seq.write(&out)?;
    let hidden = seq.occluded.iter().filter(|o| **o).count();
    println!("{} frames ({hidden} occluded) in {out}", seq.frames.len());
    println!("first box {:?}", seq.groundtruth[0]);
    println!("last box  {:?}", seq.groundtruth.last().unwrap());
    Ok(())
}
