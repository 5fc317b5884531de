//! Trains a two-layer filter on a random feature stack and detects a known
//! circular shift of it.
//!
//! cargo run --release --example correlation_filter

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longtrack::correlation::{estimate_translation, make_label, CorrelationModel, FilterParams, Kernel};
use longtrack::features::{normalize_and_window, FeatureLayer, FeatureStack};

fn shifted(x: &Array3<f64>, dy: usize, dx: usize) -> Array3<f64> {
    let (m, n, d) = x.dim();
    Array3::from_shape_fn((m, n, d), |(i, j, k)| x[[(i + m - dy) % m, (j + n - dx) % n, k]])
}

fn main() -> longtrack::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (rows, cols) = (24, 32);
    let base: Vec<Array3<f64>> = [31, 11].iter().map(|&d| Array3::from_shape_fn((rows, cols, d), |_| rng.gen_range(0.0..1.0))).collect();
    let stack = |dy, dx| -> longtrack::Result<FeatureStack> {
        let layers = base
            .iter()
            .enumerate()
            .map(|(id, x)| normalize_and_window(FeatureLayer::new(shifted(x, dy, dx), id, 0.5)))
            .collect();
        FeatureStack::new(layers)
    };
    let label = make_label(rows, cols, 0.1);
    println!("label {rows}x{cols}, sigma {:.2} cells", label.sigma_eff);

    for kernel in [Kernel::Linear, Kernel::Gaussian { sigma: 0.5 }] {
        let params = FilterParams { kernel, ..FilterParams::default() };
        let model = CorrelationModel::train(&stack(0, 0)?, &label, params)?;
        let own = model.detect(&stack(0, 0)?)?;
        let moved = model.detect(&stack(3, 5)?)?;
        let center = estimate_translation(&moved, (4.0, 4.0), (0.0, 0.0));
        println!(
            "{kernel:?}: self peak {:.3} at {:?}; shifted by (3, 5) cells -> peak {:.3} at {:?}, motion {:?} px",
            own.peak_value, own.peak, moved.peak_value, moved.peak, center
        );
    }
    Ok(())
}
