//! Follows one target through cluttered detections with the GM-PHD filter.
//!
//! cargo run --release --example gmphd_filter

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longtrack::gmphd::{ClutterModel, PhdFilter, PhdSettings};

fn main() -> longtrack::Result<()> {
    let (width, height) = (320.0, 240.0);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut phd = PhdFilter::new(PhdSettings::new(ClutterModel::new(4.0, width * height)?));
    let mut target = (40.0, 60.0);
    println!("frame   true x  true y    est x   est y  weight  comps");
    for frame in 1..=30 {
        target = (target.0 + 6.0, target.1 + 3.0);
        let mut z: Vec<(f64, f64)> = (0..rng.gen_range(2..6)).map(|_| (rng.gen_range(0.0..width), rng.gen_range(0.0..height))).collect();
        // The target is missed now and then.
        if rng.gen_bool(0.9) {
            z.push((target.0 + rng.gen_range(-2.0..2.0), target.1 + rng.gen_range(-2.0..2.0)));
        }
        phd.cycle(&z)?;
        let ((x, y), w) = phd.estimate()?;
        println!("{frame:5} {:8.1} {:7.1} {x:8.1} {y:7.1} {w:7.3} {:6}", target.0, target.1, phd.len());
    }
    Ok(())
}
