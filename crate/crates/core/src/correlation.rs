//! Multi-layer kernelized correlation filters.
//!
//! Each layer is a ridge regression over all circular shifts of its feature
//! map, solved in the Fourier domain. Detection fuses per-layer response maps
//! with the layer weights and takes the row-major-first argmax.

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureLayer, FeatureStack};
use crate::fft::{fft2, ifft2};

/// Smallest regularizer used in the Fourier-domain division.
pub const MIN_LAMBDA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    /// `exp(-‖x − z‖² / σ²)`.
    Gaussian { sigma: f64 },
}

/// Gaussian regression target peaking at `(M/2, N/2)` (integer halves).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLabelMap {
    pub values: Array2<f64>,
    /// Bandwidth in cells.
    pub sigma_eff: f64,
}

impl GaussianLabelMap {
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn center(&self) -> (usize, usize) {
        let (m, n) = self.values.dim();
        (m / 2, n / 2)
    }
}

/// Label with bandwidth `sigma_factor · √(M·N)` cells.
pub fn make_label(rows: usize, cols: usize, sigma_factor: f64) -> GaussianLabelMap {
    assert!(rows >= 1 && cols >= 1, "label needs a non-empty grid");
    let sigma_eff = sigma_factor * ((rows * cols) as f64).sqrt();
    let (cm, cn) = ((rows / 2) as f64, (cols / 2) as f64);
    let denom = 2.0 * sigma_eff * sigma_eff;
    let values = Array2::from_shape_fn((rows, cols), |(m, n)| {
        let dm = m as f64 - cm;
        let dn = n as f64 - cn;
        (-(dm * dm + dn * dn) / denom).exp()
    });
    GaussianLabelMap { values, sigma_eff }
}

fn channel_ffts(data: &Array3<f64>) -> Vec<Array2<Complex64>> {
    data.axis_iter(Axis(2)).map(fft2).collect()
}

/// `‖x‖²` from unnormalized spectra (Parseval).
fn spectral_energy(xf: &[Array2<Complex64>]) -> f64 {
    let n = xf.first().map_or(1, |c| c.len()) as f64;
    xf.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum::<f64>() / n
}

/// `Σ_d conj(X_d) ⊙ Z_d`.
fn cross_spectrum(xf: &[Array2<Complex64>], zf: &[Array2<Complex64>]) -> Array2<Complex64> {
    let mut acc = Array2::<Complex64>::zeros(xf[0].dim());
    for (x, z) in xf.iter().zip(zf) {
        ndarray::Zip::from(&mut acc).and(x).and(z).for_each(|a, &x, &z| *a += x.conj() * z);
    }
    acc
}

/// Fourier transform of the kernel correlation of `x` with every shift of `z`.
fn kernel_spectrum(
    xf: &[Array2<Complex64>],
    x_energy: f64,
    zf: &[Array2<Complex64>],
    z_energy: f64,
    kernel: Kernel,
) -> Array2<Complex64> {
    let cross = cross_spectrum(xf, zf);
    match kernel {
        Kernel::Linear => cross,
        Kernel::Gaussian { sigma } => {
            let k = gaussian_from_cross(cross, x_energy, z_energy, sigma);
            fft2(k.view())
        }
    }
}

fn gaussian_from_cross(cross: Array2<Complex64>, x_energy: f64, z_energy: f64, sigma: f64) -> Array2<f64> {
    let xz = ifft2(cross);
    let s2 = sigma * sigma;
    xz.mapv(|v| (-(x_energy + z_energy - 2.0 * v.re).max(0.0) / s2).exp())
}

fn check_same_dims(x: &FeatureLayer, z: &FeatureLayer) -> Result<()> {
    if x.data.dim() != z.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "layer {} is {:?} but layer {} is {:?}",
            x.layer_id,
            x.data.dim(),
            z.layer_id,
            z.data.dim()
        )));
    }
    Ok(())
}

/// Kernel value between `x` and each circular shift of `z`:
/// `k(m, n) = κ(x, z shifted by (−m, −n))`, so for the linear kernel
/// `k(m, n) = Σ_{p,q,d} x(p, q, d) · z(p + m, q + n, d)`.
pub fn kernel_correlation(x: &FeatureLayer, z: &FeatureLayer, kernel: Kernel) -> Result<Array2<f64>> {
    check_same_dims(x, z)?;
    let xf = channel_ffts(&x.data);
    let zf = channel_ffts(&z.data);
    let cross = cross_spectrum(&xf, &zf);
    Ok(match kernel {
        Kernel::Linear => ifft2(cross).mapv(|v| v.re),
        Kernel::Gaussian { sigma } => gaussian_from_cross(cross, x.energy(), z.energy(), sigma),
    })
}

/// Learned filter for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    /// Dual coefficients in the Fourier domain.
    pub alphaf: Array2<Complex64>,
    /// Per-channel Fourier transform of the base template.
    pub xf: Vec<Array2<Complex64>>,
    pub layer_id: usize,
}

impl LayerModel {
    pub fn spatial_size(&self) -> (usize, usize) {
        self.alphaf.dim()
    }

    pub fn channels(&self) -> usize {
        self.xf.len()
    }

    fn template_energy(&self) -> f64 {
        spectral_energy(&self.xf)
    }

    /// Complex per-layer response before the real part is taken.
    fn response(&self, z: &FeatureLayer, kernel: Kernel) -> Result<Array2<Complex64>> {
        let (m, n, d) = z.data.dim();
        if (m, n) != self.spatial_size() || d != self.channels() {
            return Err(Error::DimensionMismatch(format!(
                "layer {}: model is {:?}x{}, features are {:?}",
                self.layer_id,
                self.spatial_size(),
                self.channels(),
                (m, n, d)
            )));
        }
        let zf = channel_ffts(&z.data);
        let kf = kernel_spectrum(&self.xf, self.template_energy(), &zf, z.energy(), kernel);
        Ok(ifft2(&self.alphaf * &kf))
    }

    fn interpolate(&mut self, fresh: &LayerModel, eta: f64) {
        let keep = 1.0 - eta;
        self.alphaf.zip_mut_with(&fresh.alphaf, |a, &b| *a = *a * keep + b * eta);
        for (x, y) in self.xf.iter_mut().zip(&fresh.xf) {
            x.zip_mut_with(y, |a, &b| *a = *a * keep + b * eta);
        }
    }
}

/// `A = F(y) / (F(k_xx) + λ)` and `X̃ = F(x)`.
pub fn train_layer(x: &FeatureLayer, label: &GaussianLabelMap, lambda: f64, kernel: Kernel) -> Result<LayerModel> {
    if x.spatial_size() != label.dim() {
        return Err(Error::DimensionMismatch(format!(
            "label is {:?}, features are {:?}",
            label.dim(),
            x.spatial_size()
        )));
    }
    let lambda = if lambda < MIN_LAMBDA {
        log::warn!("regularizer {lambda} raised to {MIN_LAMBDA}");
        MIN_LAMBDA
    } else {
        lambda
    };
    let xf = channel_ffts(&x.data);
    let energy = x.energy();
    let kf = kernel_spectrum(&xf, energy, &xf, energy, kernel);
    let yf = fft2(label.values.view());
    let mut alphaf = Array2::<Complex64>::zeros(yf.dim());
    for ((a, &y), &k) in alphaf.iter_mut().zip(yf.iter()).zip(kf.iter()) {
        let denom = k + lambda;
        *a = y / denom;
        if !a.is_finite() {
            return Err(Error::Numerical {
                component: x.layer_id,
                reason: "non-finite dual coefficient (zero-energy features?)".into(),
            });
        }
    }
    Ok(LayerModel { alphaf, xf, layer_id: x.layer_id })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub lambda: f64,
    pub sigma_label: f64,
    pub eta: f64,
    pub kernel: Kernel,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { lambda: 1e-4, sigma_label: 0.1, eta: 0.01, kernel: Kernel::Linear }
    }
}

/// Fused response over all layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub values: Array2<f64>,
    pub peak: (usize, usize),
    pub peak_value: f64,
    /// Largest imaginary magnitude discarded when taking the real part.
    pub imag_residue: f64,
}

impl ResponseMap {
    pub fn from_values(values: Array2<f64>) -> Self {
        let (peak, peak_value) = argmax(&values);
        Self { values, peak, peak_value, imag_residue: 0.0 }
    }
}

/// Row-major-first maximum.
pub fn argmax(values: &Array2<f64>) -> ((usize, usize), f64) {
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for ((m, n), &v) in values.indexed_iter() {
        if v > best.1 {
            best = ((m, n), v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    pub layers: Vec<LayerModel>,
    pub gammas: Vec<f64>,
    pub params: FilterParams,
}

impl CorrelationModel {
    /// Trains one filter per stack layer; layer weights become the fusion weights.
    pub fn train(stack: &FeatureStack, label: &GaussianLabelMap, params: FilterParams) -> Result<Self> {
        validate_params(&params)?;
        let layers = stack
            .layers()
            .par_iter()
            .map(|l| train_layer(l, label, params.lambda, params.kernel))
            .collect::<Result<Vec<_>>>()?;
        let gammas = stack.layers().iter().map(|l| l.weight).collect();
        let model = Self { layers, gammas, params };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.len() != self.layers.len() {
            return Err(Error::Config(format!(
                "{} fusion weights for {} layers",
                self.gammas.len(),
                self.layers.len()
            )));
        }
        if self.gammas.iter().any(|g| *g < 0.0 || !g.is_finite()) || self.gammas.iter().all(|g| *g == 0.0) {
            return Err(Error::Config("fusion weights must be non-negative and not all zero".into()));
        }
        validate_params(&self.params)
    }

    pub fn spatial_size(&self) -> (usize, usize) {
        self.layers[0].spatial_size()
    }

    fn check_alignment(&self, stack: &FeatureStack) -> Result<()> {
        if stack.len() != self.layers.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} layers, stack has {}",
                self.layers.len(),
                stack.len()
            )));
        }
        Ok(())
    }

    /// `r = Σ_l γ_l · F⁻¹(A_l ⊙ F(k(x̃_l, z_l)))`, real part.
    pub fn detect(&self, stack: &FeatureStack) -> Result<ResponseMap> {
        self.check_alignment(stack)?;
        let responses = self
            .layers
            .par_iter()
            .zip(stack.layers().par_iter())
            .map(|(model, z)| model.response(z, self.params.kernel))
            .collect::<Result<Vec<_>>>()?;
        let mut fused = Array2::<Complex64>::zeros(self.spatial_size());
        for (r, &g) in responses.iter().zip(&self.gammas) {
            fused.zip_mut_with(r, |a, &b| *a += b * g);
        }
        let imag_residue = fused.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let mut map = ResponseMap::from_values(fused.mapv(|v| v.re));
        map.imag_residue = imag_residue;
        Ok(map)
    }

    /// Linear interpolation toward a model trained on `new_stack` with rate η.
    pub fn update_model(&self, new_stack: &FeatureStack, label: &GaussianLabelMap) -> Result<Self> {
        self.check_alignment(new_stack)?;
        let fresh = Self::train(new_stack, label, self.params)?;
        let mut out = self.clone();
        for (old, new) in out.layers.iter_mut().zip(&fresh.layers) {
            if old.spatial_size() != new.spatial_size() || old.channels() != new.channels() {
                return Err(Error::DimensionMismatch(format!("layer {} changed shape", old.layer_id)));
            }
            old.interpolate(new, self.params.eta);
        }
        Ok(out)
    }
}

fn validate_params(p: &FilterParams) -> Result<()> {
    if !(0.0..=1.0).contains(&p.eta) {
        return Err(Error::Config(format!("learning rate {} outside [0, 1]", p.eta)));
    }
    if p.lambda < 0.0 {
        return Err(Error::Config(format!("negative regularizer {}", p.lambda)));
    }
    if let Kernel::Gaussian { sigma } = p.kernel {
        if sigma <= 0.0 {
            return Err(Error::Config(format!("gaussian kernel width {sigma} must be positive")));
        }
    }
    Ok(())
}

/// Signed offset of `peak` from the map center along one axis, wrapped into
/// `[-len/2, len/2)`.
pub fn wrapped_offset(peak: usize, len: usize) -> i64 {
    let mut off = peak as i64 - (len / 2) as i64;
    let half = len as i64 / 2;
    if off >= len as i64 - half {
        off -= len as i64;
    } else if off < -half {
        off += len as i64;
    }
    off
}

/// New target center from the response peak. `cell_size` is the size of one
/// feature cell in frame pixels along `(x, y)`.
pub fn estimate_translation(response: &ResponseMap, cell_size: (f64, f64), prev_center: (f64, f64)) -> (f64, f64) {
    let (rows, cols) = response.values.dim();
    let dy = wrapped_offset(response.peak.0, rows) as f64;
    let dx = wrapped_offset(response.peak.1, cols) as f64;
    (prev_center.0 + dx * cell_size.0, prev_center.1 + dy * cell_size.1)
}
