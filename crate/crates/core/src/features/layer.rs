use std::f64::consts::PI;

use ndarray::{Array1, Array2, Array3, Axis, Zip};

use crate::error::{Error, Result};

/// One layer of a feature stack: an `M×N×D` map plus its fusion weight.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayer {
    pub data: Array3<f64>,
    pub layer_id: usize,
    pub weight: f64,
}

impl FeatureLayer {
    pub fn new(data: Array3<f64>, layer_id: usize, weight: f64) -> Self {
        Self { data, layer_id, weight }
    }

    pub fn rows(&self) -> usize {
        self.data.dim().0
    }

    pub fn cols(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn spatial_size(&self) -> (usize, usize) {
        let (m, n, _) = self.data.dim();
        (m, n)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Ordered layers sharing one spatial size.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    layers: Vec<FeatureLayer>,
    spatial_size: (usize, usize),
}

impl FeatureStack {
    pub fn new(layers: Vec<FeatureLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::DegenerateInput("feature stack needs at least one layer".into()))?;
        let spatial_size = first.spatial_size();
        for layer in &layers {
            if layer.spatial_size() != spatial_size {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} is {:?}, stack is {:?}",
                    layer.layer_id,
                    layer.spatial_size(),
                    spatial_size
                )));
            }
            if layer.channels() == 0 {
                return Err(Error::DegenerateInput(format!("layer {} has no channels", layer.layer_id)));
            }
        }
        if layers.iter().map(|l| l.weight).sum::<f64>() <= 0.0 {
            return Err(Error::Config("layer weights must have a positive sum".into()));
        }
        Ok(Self { layers, spatial_size })
    }

    pub fn single(layer: FeatureLayer) -> Result<Self> {
        Self::new(vec![layer])
    }

    pub fn layers(&self) -> &[FeatureLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<FeatureLayer> {
        self.layers
    }

    pub fn spatial_size(&self) -> (usize, usize) {
        self.spatial_size
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn map_layers(self, f: impl FnMut(FeatureLayer) -> FeatureLayer) -> Result<Self> {
        Self::new(self.layers.into_iter().map(f).collect())
    }
}

/// Symmetric Hann window of length `n`; zero at both ends.
pub fn hann(n: usize) -> Array1<f64> {
    if n < 2 {
        return Array1::ones(n);
    }
    Array1::from_iter((0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos())))
}

/// Outer product of two Hann windows, shaped `M×N`.
pub fn cosine_window(rows: usize, cols: usize) -> Array2<f64> {
    let wr = hann(rows);
    let wc = hann(cols);
    Array2::from_shape_fn((rows, cols), |(m, n)| wr[m] * wc[n])
}

pub fn apply_cosine_window(mut layer: FeatureLayer) -> FeatureLayer {
    let (m, n) = layer.spatial_size();
    let window = cosine_window(m, n);
    for mut channel in layer.data.axis_iter_mut(Axis(2)) {
        channel *= &window;
    }
    layer
}

/// Bilinear resize of every channel to `target = (M, N)`.
///
/// Uses half-pixel alignment with clamped borders, so the output stays inside
/// the input's value range.
pub fn resize_layer(layer: &FeatureLayer, target: (usize, usize)) -> FeatureLayer {
    let (rows, cols, depth) = layer.data.dim();
    let (tr, tc) = target;
    assert!(tr >= 1 && tc >= 1, "target size must be positive");
    if (rows, cols) == (tr, tc) {
        return layer.clone();
    }
    let taps = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let row_taps = taps(rows, tr);
    let col_taps = taps(cols, tc);
    let src = &layer.data;
    let data = Array3::from_shape_fn((tr, tc, depth), |(m, n, d)| {
        let (r0, r1, ar) = row_taps[m];
        let (c0, c1, ac) = col_taps[n];
        let top = src[[r0, c0, d]] * (1.0 - ac) + src[[r0, c1, d]] * ac;
        let bottom = src[[r1, c0, d]] * (1.0 - ac) + src[[r1, c1, d]] * ac;
        top * (1.0 - ar) + bottom * ar
    });
    FeatureLayer { data, layer_id: layer.layer_id, weight: layer.weight }
}

/// Per-channel zero-mean standardization, cosine window, then scaling of the
/// whole layer to unit L2 energy.
///
/// This keeps the self-detection peak of a trained filter near 1 regardless of
/// feature magnitude, which is what the response thresholds are calibrated on.
pub fn normalize_and_window(mut layer: FeatureLayer) -> FeatureLayer {
    for mut channel in layer.data.axis_iter_mut(Axis(2)) {
        let mean = channel.mean().unwrap_or(0.0);
        channel -= mean;
    }
    let mut layer = apply_cosine_window(layer);
    let norm = layer.energy().sqrt();
    if norm > 1e-12 {
        layer.data.mapv_inplace(|v| v / norm);
    }
    layer
}

/// [`normalize_and_window`] restricted to cells where `valid` is true. Channel
/// means are taken over valid cells only and invalid cells are zeroed, so they
/// contribute nothing to correlations.
pub fn normalize_and_window_masked(mut layer: FeatureLayer, valid: &Array2<bool>) -> Result<FeatureLayer> {
    if valid.dim() != layer.spatial_size() {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs layer {:?}",
            valid.dim(),
            layer.spatial_size()
        )));
    }
    let count = valid.iter().filter(|v| **v).count();
    if count == valid.len() {
        return Ok(normalize_and_window(layer));
    }
    for mut channel in layer.data.axis_iter_mut(Axis(2)) {
        let sum: f64 = Zip::from(&channel).and(valid).fold(0.0, |acc, &v, &ok| if ok { acc + v } else { acc });
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        Zip::from(&mut channel).and(valid).for_each(|v, &ok| *v = if ok { *v - mean } else { 0.0 });
    }
    let mut layer = apply_cosine_window(layer);
    let norm = layer.energy().sqrt();
    if norm > 1e-12 {
        layer.data.mapv_inplace(|v| v / norm);
    }
    Ok(layer)
}

/// Concatenates layers along the channel axis.
pub(crate) fn concat_channels(parts: &[&Array3<f64>]) -> Array3<f64> {
    let (m, n, _) = parts[0].dim();
    let depth: usize = parts.iter().map(|p| p.dim().2).sum();
    let mut out = Array3::zeros((m, n, depth));
    let mut offset = 0;
    for part in parts {
        let d = part.dim().2;
        Zip::from(out.slice_mut(ndarray::s![.., .., offset..offset + d]))
            .and(*part)
            .for_each(|o, &v| *o = v);
        offset += d;
    }
    out
}
