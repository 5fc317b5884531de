//! Gaussian-mixture PHD filter over image positions.
//!
//! State is `(x, y, vx, vy)` in pixels and pixels per frame; measurements are
//! `(x, y)` positions. Births are driven by the current measurements with zero
//! initial velocity.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { weight, mean, cov }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub transition: Matrix4<f64>,
    pub process_noise: Matrix4<f64>,
    pub observation: Matrix2x4<f64>,
    pub measurement_noise: Matrix2<f64>,
    pub p_survival: f64,
    pub p_detection: f64,
}

impl MotionModel {
    /// Constant-velocity model with unit time step.
    pub fn constant_velocity(q: [f64; 4], r: [f64; 2], p_survival: f64, p_detection: f64) -> Self {
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let observation = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        Self {
            transition,
            process_noise: Matrix4::from_diagonal(&Vector4::from(q)),
            observation,
            measurement_noise: Matrix2::from_diagonal(&Vector2::from(r)),
            p_survival,
            p_detection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_survival > 0.0 && self.p_survival <= 1.0) {
            return Err(Error::Config(format!("survival probability {} outside (0, 1]", self.p_survival)));
        }
        if !(self.p_detection > 0.0 && self.p_detection <= 1.0) {
            return Err(Error::Config(format!("detection probability {} outside (0, 1]", self.p_detection)));
        }
        if self.measurement_noise.cholesky().is_none() {
            return Err(Error::Config("measurement noise must be positive-definite".into()));
        }
        Ok(())
    }
}

impl Default for MotionModel {
    fn default() -> Self {
        Self::constant_velocity([4.0, 4.0, 1.0, 1.0], [9.0, 9.0], 0.99, 0.9)
    }
}

/// Uniform clutter: `c(z) = lambda_t / area`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterModel {
    pub lambda_t: f64,
    pub area: f64,
}

impl ClutterModel {
    pub fn new(lambda_t: f64, area: f64) -> Result<Self> {
        if lambda_t < 0.0 || area <= 0.0 {
            return Err(Error::Config(format!("invalid clutter model (rate {lambda_t}, area {area})")));
        }
        Ok(Self { lambda_t, area })
    }

    pub fn none() -> Self {
        Self { lambda_t: 0.0, area: 1.0 }
    }

    pub fn intensity(&self) -> f64 {
        self.lambda_t / self.area
    }
}

/// One zero-velocity component per measurement.
pub fn birth_components(measurements: &[(f64, f64)], birth_cov: &Matrix4<f64>, birth_weight: f64) -> Vec<GaussianComponent> {
    measurements
        .iter()
        .map(|&(x, y)| GaussianComponent::new(birth_weight, Vector4::new(x, y, 0.0, 0.0), *birth_cov))
        .collect()
}

pub fn predict(mixture: &[GaussianComponent], model: &MotionModel, births: &[GaussianComponent]) -> Vec<GaussianComponent> {
    let f = &model.transition;
    let mut out: Vec<GaussianComponent> = mixture
        .iter()
        .map(|c| {
            let cov = model.process_noise + f * c.cov * f.transpose();
            GaussianComponent::new(c.weight * model.p_survival, f * c.mean, symmetrize(&cov))
        })
        .collect();
    out.extend_from_slice(births);
    out
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

struct UpdateTerms {
    predicted_measurement: Vector2<f64>,
    innovation_inv: Matrix2<f64>,
    normalizer: f64,
    gain: Matrix4x2<f64>,
    cov: Matrix4<f64>,
}

fn update_terms(index: usize, c: &GaussianComponent, model: &MotionModel) -> Result<UpdateTerms> {
    let h = &model.observation;
    let s = model.measurement_noise + h * c.cov * h.transpose();
    let s = (s + s.transpose()) * 0.5;
    let det = s.determinant();
    let innovation_inv = s
        .try_inverse()
        .filter(|_| det > 0.0 && det.is_finite())
        .ok_or_else(|| Error::Numerical { component: index, reason: "singular innovation covariance".into() })?;
    let gain = c.cov * h.transpose() * innovation_inv;
    // Joseph form keeps the posterior covariance symmetric positive-definite.
    let ikh = Matrix4::identity() - gain * h;
    let cov = ikh * c.cov * ikh.transpose() + gain * model.measurement_noise * gain.transpose();
    Ok(UpdateTerms {
        predicted_measurement: h * c.mean,
        innovation_inv,
        normalizer: 1.0 / (2.0 * std::f64::consts::PI * det.sqrt()),
        gain,
        cov: symmetrize(&cov),
    })
}

/// PHD update: missed-detection terms followed by one Kalman-updated copy of
/// every predicted component per measurement.
pub fn update(
    predicted: &[GaussianComponent],
    measurements: &[(f64, f64)],
    model: &MotionModel,
    clutter: &ClutterModel,
) -> Result<Vec<GaussianComponent>> {
    let pd = model.p_detection;
    let mut out: Vec<GaussianComponent> = predicted
        .iter()
        .map(|c| GaussianComponent::new(c.weight * (1.0 - pd), c.mean, c.cov))
        .collect();
    if measurements.is_empty() {
        return Ok(out);
    }
    let terms = predicted
        .iter()
        .enumerate()
        .map(|(i, c)| update_terms(i, c, model))
        .collect::<Result<Vec<_>>>()?;
    let cs = clutter.intensity();
    for &(zx, zy) in measurements {
        let z = Vector2::new(zx, zy);
        let start = out.len();
        let mut total = 0.0;
        for (c, t) in predicted.iter().zip(&terms) {
            let innovation = z - t.predicted_measurement;
            let maha = (innovation.transpose() * t.innovation_inv * innovation)[(0, 0)];
            let q = t.normalizer * (-0.5 * maha).exp();
            let w = pd * c.weight * q;
            total += w;
            out.push(GaussianComponent::new(w, c.mean + t.gain * innovation, t.cov));
        }
        let denom = cs + total;
        for c in &mut out[start..] {
            c.weight = if denom > 0.0 { c.weight / denom } else { 0.0 };
        }
    }
    Ok(out)
}

/// Prunes weights below `threshold`, greedily merges components within squared
/// Mahalanobis distance `merge_distance` of the heaviest remaining one (using
/// that component's covariance), and keeps at most `max_components`.
pub fn prune_and_merge(
    mixture: &[GaussianComponent],
    threshold: f64,
    merge_distance: f64,
    max_components: usize,
) -> Vec<GaussianComponent> {
    let mut remaining: Vec<&GaussianComponent> = mixture.iter().filter(|c| c.weight >= threshold).collect();
    let mut merged = Vec::new();
    while !remaining.is_empty() {
        let mut lead = 0;
        for (i, c) in remaining.iter().enumerate() {
            if c.weight > remaining[lead].weight {
                lead = i;
            }
        }
        let leader = remaining[lead];
        let inv = leader.cov.try_inverse().unwrap_or_else(|| leader.cov.pseudo_inverse(1e-12).expect("svd"));
        let (close, far): (Vec<&GaussianComponent>, Vec<&GaussianComponent>) = remaining.into_iter().partition(|c| {
            let d = c.mean - leader.mean;
            (d.transpose() * inv * d)[(0, 0)] <= merge_distance
        });
        remaining = far;
        let weight: f64 = close.iter().map(|c| c.weight).sum();
        if weight <= 0.0 {
            merged.push(leader.clone());
            continue;
        }
        let mean = close.iter().fold(Vector4::zeros(), |acc, c| acc + c.mean * c.weight) / weight;
        let cov = close.iter().fold(Matrix4::zeros(), |acc, c| {
            let d = mean - c.mean;
            acc + (c.cov + d * d.transpose()) * c.weight
        }) / weight;
        merged.push(GaussianComponent::new(weight, mean, symmetrize(&cov)));
    }
    if merged.len() > max_components {
        merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        merged.truncate(max_components);
    }
    merged
}

/// Position and weight of the heaviest component; ties go to the lowest index.
pub fn max_weight_estimate(mixture: &[GaussianComponent]) -> Result<((f64, f64), f64)> {
    let mut best: Option<&GaussianComponent> = None;
    for c in mixture {
        if best.is_none_or(|b| c.weight > b.weight) {
            best = Some(c);
        }
    }
    best.map(|c| (c.position(), c.weight)).ok_or(Error::NoEstimate)
}

/// Settings for one predict → update → prune/merge cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhdSettings {
    pub motion: MotionModel,
    pub clutter: ClutterModel,
    pub birth_weight: f64,
    pub birth_cov: Matrix4<f64>,
    pub prune_threshold: f64,
    pub merge_distance: f64,
    pub max_components: usize,
}

impl PhdSettings {
    pub fn new(clutter: ClutterModel) -> Self {
        Self {
            motion: MotionModel::default(),
            clutter,
            birth_weight: 0.1,
            birth_cov: Matrix4::from_diagonal_element(25.0),
            prune_threshold: 1e-5,
            merge_distance: 4.0,
            max_components: 100,
        }
    }
}

/// A mixture plus the settings used to propagate it.
#[derive(Debug, Clone, PartialEq)]
pub struct PhdFilter {
    pub settings: PhdSettings,
    pub mixture: Vec<GaussianComponent>,
}

impl PhdFilter {
    pub fn new(settings: PhdSettings) -> Self {
        Self { settings, mixture: Vec::new() }
    }

    /// Measurement-driven births, prediction, update and reduction.
    pub fn cycle(&mut self, measurements: &[(f64, f64)]) -> Result<()> {
        let s = &self.settings;
        let births = birth_components(measurements, &s.birth_cov, s.birth_weight);
        let predicted = predict(&self.mixture, &s.motion, &births);
        let updated = update(&predicted, measurements, &s.motion, &s.clutter)?;
        self.mixture = prune_and_merge(&updated, s.prune_threshold, s.merge_distance, s.max_components);
        Ok(())
    }

    pub fn estimate(&self) -> Result<((f64, f64), f64)> {
        max_weight_estimate(&self.mixture)
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }
}
