//! Grows an SVM one sample at a time and shows how samples move between the
//! margin, error and reserve sets.
//!
//! cargo run --release --example incremental_svm

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longtrack::redetect::{IncrementalSvm, MarginSet, SvmKernel};

fn main() -> longtrack::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut svm = IncrementalSvm::new(2.0, SvmKernel::Gaussian { sigma: 0.8 })?;
    println!("   n  margin  error  reserve      bias  kkt");
    for n in 1..=60 {
        let label = if n % 2 == 0 { 1.0 } else { -1.0 };
        let p = vec![label * 0.6 + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        svm.increment(p, label)?;
        if n % 10 == 0 {
            let k = svm.kkt_report();
            println!(
                "{n:4} {:7} {:6} {:8} {:9.4} {:.1e}",
                svm.count(MarginSet::Margin),
                svm.count(MarginSet::Error),
                svm.count(MarginSet::Reserve),
                svm.bias(),
                k.max_violation
            );
        }
    }
    for x in [-1.5, -0.5, 0.0, 0.5, 1.5] {
        println!("f({x:4.1}, 0) = {:7.3}", svm.score(&[x, 0.0])?);
    }
    Ok(())
}
