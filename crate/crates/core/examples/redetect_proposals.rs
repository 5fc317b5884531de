//! Trains the re-detector on the first frame of the occlusion sequence and
//! searches for the target after it reappears.
//!
//! cargo run --release --example redetect_proposals

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use longtrack::config::TrackerConfig;
use longtrack::redetect::Redetector;
use longtrack::sequence::{synthesize, Scenario, SynthParams};

fn main() -> longtrack::Result<()> {
    let seq = synthesize(&SynthParams::new(Scenario::Occlude));
    let config = TrackerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut detector = Redetector::new(
        config.svm_c,
        config.svm_sigma,
        config.sampling_params(),
        config.proposal_params(),
        config.max_support_vectors,
    )?;
    let samples = detector.train(&seq.frames[0], &seq.groundtruth[0], &mut rng)?;
    println!("trained on {samples} samples");

    // Search around where the target was last seen.
    let k = 64;
    let last_seen = seq.groundtruth[38].center();
    let truth = seq.groundtruth[k - 1];
    for (b, score) in detector.propose(&seq.frames[k - 1], last_seen, seq.groundtruth[0].size())? {
        println!("proposal ({:6.1}, {:6.1}) score {score:7.3} iou {:.2}", b.x, b.y, b.iou(&truth));
    }
    Ok(())
}
