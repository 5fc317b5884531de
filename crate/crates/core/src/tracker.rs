//! Per-frame tracking loop: translation filter, GM-PHD bookkeeping,
//! SVM re-detection, scale estimation and model updates.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bbox::BoundingBox;
use crate::config::TrackerConfig;
use crate::correlation::{estimate_translation, make_label, CorrelationModel, GaussianLabelMap, ResponseMap};
use crate::error::{Error, Result};
use crate::features::{
    build_handcrafted_layer, load_deep_layers, normalize_and_window_masked, ColorNameTable, FeatureLayer, FeatureStack,
};
use ndarray::Array2;
use crate::gmphd::PhdFilter;
use crate::image::Frame;
use crate::redetect::Redetector;
use crate::scale::ScaleModel;

/// Number of layers expected in a deep-feature file.
pub const DEEP_LAYERS: usize = 3;

/// Per-frame record of what the tracker did.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// 0-based frame index.
    pub frame: usize,
    pub bbox: BoundingBox,
    /// Peak of the translation response; NaN on the initialization frame.
    pub response: f64,
    pub redetection_activated: bool,
    /// Re-detected position passed the threshold and replaced the estimate.
    pub redetection_accepted: bool,
    /// Scale factor chosen this frame, before damping.
    pub scale_factor: f64,
    /// Current target size relative to the initial one.
    pub scale: f64,
    pub phd_components: usize,
    pub svm_trained: bool,
}

/// Pixel geometry shared by detection and training for a given target size.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    /// Region of the frame covered, in pixels.
    source: (f64, f64),
    /// Size of the resampled patch fed to feature extraction.
    model: (usize, usize),
}

impl Window {
    fn cell_size(&self, cell: usize) -> (f64, f64) {
        (self.source.0 / self.model.0 as f64 * cell as f64, self.source.1 / self.model.1 as f64 * cell as f64)
    }
}

fn even(v: f64) -> f64 {
    (2.0 * (v / 2.0).round()).max(2.0)
}

/// Frame region searched around a target of `size`: `padding × size`,
/// rounded to even pixels.
pub fn search_window(size: (f64, f64), config: &TrackerConfig) -> (f64, f64) {
    (even(size.0 * config.padding), even(size.1 * config.padding))
}

/// Model window for the initial target: `padding × size` rounded to even
/// pixels, then rescaled to respect the area cap and minimum side, and
/// snapped to an even number of cells.
pub fn model_window(size: (f64, f64), config: &TrackerConfig) -> (usize, usize) {
    let (w, h) = search_window(size, config);
    let mut k = 1.0f64;
    if w * h > config.max_window_area {
        k = (config.max_window_area / (w * h)).sqrt();
    }
    if w.min(h) * k < config.min_window_side {
        k = config.min_window_side / w.min(h);
    }
    let step = 2.0 * config.cell_size as f64;
    let snap = |v: f64| ((v * k / step).round().max(2.0) * step) as usize;
    (snap(w), snap(h))
}

/// Normalized fusion weights: deep layers in file order (shallow to deep),
/// then the hand-crafted layer.
fn fusion_weights(config: &TrackerConfig, deep: bool) -> Vec<f64> {
    let raw = if deep {
        vec![config.gamma_conv3, config.gamma_conv4, config.gamma_conv5, config.gamma_handcrafted]
    } else {
        vec![config.gamma_handcrafted]
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|g| g / total).collect()
}

/// Cells of a `rows × cols` grid over the window whose centers fall inside the frame.
pub fn frame_mask(frame_size: (usize, usize), center: (f64, f64), source: (f64, f64), rows: usize, cols: usize) -> Array2<bool> {
    let (x0, y0) = (center.0 - source.0 / 2.0, center.1 - source.1 / 2.0);
    let (cw, ch) = (source.0 / cols as f64, source.1 / rows as f64);
    Array2::from_shape_fn((rows, cols), |(m, n)| {
        let x = x0 + (n as f64 + 0.5) * cw;
        let y = y0 + (m as f64 + 0.5) * ch;
        x >= 0.0 && y >= 0.0 && x < frame_size.0 as f64 && y < frame_size.1 as f64
    })
}

/// Search-window feature stack: optional deep layers from `deep`, then the
/// hand-crafted HOG + color-name layer, each standardized and windowed.
/// Cells outside the frame are zeroed after standardization.
pub fn extract_stack(
    frame: &Frame,
    center: (f64, f64),
    source: (f64, f64),
    model: (usize, usize),
    config: &TrackerConfig,
    table: &ColorNameTable,
    deep: Option<&[FeatureLayer]>,
) -> Result<FeatureStack> {
    let patch = frame.sample(center, source, model);
    let hand = build_handcrafted_layer(&patch, table, config.cell_size)?;
    let weights = fusion_weights(config, deep.is_some());
    let mask = frame_mask(frame.size(), center, source, hand.rows(), hand.cols());
    let mut layers = Vec::with_capacity(weights.len());
    if let Some(deep) = deep {
        if deep.len() != DEEP_LAYERS {
            return Err(Error::Format(format!("expected {DEEP_LAYERS} deep layers, found {}", deep.len())));
        }
        for (id, l) in deep.iter().enumerate() {
            let mut l = normalize_and_window_masked(l.clone(), &mask)?;
            l.layer_id = id;
            l.weight = weights[id];
            layers.push(l);
        }
    }
    let mut hand = normalize_and_window_masked(hand, &mask)?;
    hand.layer_id = layers.len();
    hand.weight = *weights.last().expect("at least one weight");
    layers.push(hand);
    FeatureStack::new(layers)
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    table: &'static ColorNameTable,
    frame_size: (usize, usize),
    frame_index: usize,
    center: (f64, f64),
    size: (f64, f64),
    initial_size: (f64, f64),
    model_window: (usize, usize),
    label: GaussianLabelMap,
    correlation: CorrelationModel,
    scale: Option<ScaleModel>,
    redetector: Option<Redetector>,
    phd: PhdFilter,
    rng: ChaCha8Rng,
    deep: bool,
    last_response: f64,
}

impl Tracker {
    /// Trains every model on the first frame. `deep` is the frame's
    /// deep-feature file; when given, every later step needs one too.
    pub fn initialize(frame: &Frame, init: BoundingBox, config: TrackerConfig, deep: Option<&Path>) -> Result<Self> {
        config.validate()?;
        if !init.is_valid() {
            return Err(Error::Input(format!("invalid initial box {init:?}")));
        }
        if !init.inside(frame.size()) {
            return Err(Error::Input(format!("initial box {init:?} lies outside the {:?} frame", frame.size())));
        }
        let size = init.size();
        let center = init.center();
        let model_window = model_window(size, &config);
        let cell = config.cell_size;
        let label = make_label(model_window.1 / cell, model_window.0 / cell, config.sigma_label);
        let window = Window { source: search_window(size, &config), model: model_window };
        let deep_layers = deep.map(|p| load_deep_layers(p, label.dim())).transpose()?;
        let table = ColorNameTable::bundled();
        let stack = extract_stack(frame, center, window.source, window.model, &config, table, deep_layers.as_deref())?;
        let correlation = CorrelationModel::train(&stack, &label, config.filter_params())?;

        let scale = if config.enable_scale {
            Some(ScaleModel::train(frame, center, size, config.scale_params())?)
        } else {
            None
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let redetector = if config.enable_redetection {
            let mut r = Redetector::new(
                config.svm_c,
                config.svm_sigma,
                config.sampling_params(),
                config.proposal_params(),
                config.max_support_vectors,
            )?;
            r.train(frame, &init, &mut rng)?;
            Some(r)
        } else {
            None
        };

        let mut phd = PhdFilter::new(config.phd_settings(frame.size())?);
        phd.mixture = crate::gmphd::birth_components(&[center], &phd.settings.birth_cov, phd.settings.birth_weight);

        Ok(Self {
            config,
            table,
            frame_size: frame.size(),
            frame_index: 0,
            center,
            size,
            initial_size: size,
            model_window,
            label,
            correlation,
            scale,
            redetector,
            phd,
            rng,
            deep: deep.is_some(),
            last_response: f64::NAN,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn size(&self) -> (f64, f64) {
        self.size
    }

    pub fn correlation(&self) -> &CorrelationModel {
        &self.correlation
    }

    pub fn phd(&self) -> &PhdFilter {
        &self.phd
    }

    pub fn redetector(&self) -> Option<&Redetector> {
        self.redetector.as_ref()
    }

    pub fn scale_model(&self) -> Option<&ScaleModel> {
        self.scale.as_ref()
    }

    pub fn last_response(&self) -> f64 {
        self.last_response
    }

    /// Reported box: the current estimate clipped to the frame.
    pub fn bbox(&self) -> BoundingBox {
        let b = BoundingBox::from_center(self.center, self.size);
        b.clipped(self.frame_size).unwrap_or_else(|| b.shifted_inside(self.frame_size))
    }

    fn window(&self) -> Window {
        Window { source: search_window(self.size, &self.config), model: self.model_window }
    }

    fn stack_at(&self, frame: &Frame, center: (f64, f64), window: Window, deep: Option<&[FeatureLayer]>) -> Result<FeatureStack> {
        extract_stack(frame, center, window.source, window.model, &self.config, self.table, deep)
    }

    fn detect_at(&self, frame: &Frame, center: (f64, f64), window: Window, deep: Option<&[FeatureLayer]>) -> Result<ResponseMap> {
        self.correlation.detect(&self.stack_at(frame, center, window, deep)?)
    }

    /// Keeps the whole target box inside the frame when it fits.
    fn clamp_center(&self, c: (f64, f64)) -> (f64, f64) {
        let axis = |v: f64, half: f64, len: f64| if 2.0 * half <= len { v.clamp(half, len - half) } else { len / 2.0 };
        (
            axis(c.0, self.size.0 / 2.0, self.frame_size.0 as f64),
            axis(c.1, self.size.1 / 2.0, self.frame_size.1 as f64),
        )
    }

    /// Processes the next frame.
    pub fn step(&mut self, frame: &Frame, deep: Option<&Path>) -> Result<FrameResult> {
        if frame.size() != self.frame_size {
            return Err(Error::Input(format!("frame size {:?} differs from {:?}", frame.size(), self.frame_size)));
        }
        if deep.is_some() != self.deep {
            return Err(Error::Input("deep features must be supplied for every frame or none".into()));
        }
        let deep_layers = deep.map(|p| load_deep_layers(p, self.label.dim())).transpose()?;
        let deep_layers = deep_layers.as_deref();
        let window = self.window();
        let cell = window.cell_size(self.config.cell_size);

        // Translation.
        let response = self.detect_at(frame, self.center, window, deep_layers)?;
        let peak = response.peak_value;
        let mut center = self.clamp_center(estimate_translation(&response, cell, self.center));

        // PHD bookkeeping on the filter estimate; its output is not used here.
        self.phd.cycle(&[center])?;

        // Re-detection.
        let mut activated = false;
        let mut accepted = false;
        if let Some(redetector) = self.redetector.as_ref().filter(|r| r.is_trained()) {
            if peak < self.config.t_rd {
                activated = true;
                let proposals = redetector.propose(frame, center, self.size)?;
                let centers: Vec<(f64, f64)> = proposals.iter().map(|(b, _)| b.center()).collect();
                self.phd.cycle(&centers)?;
                if let Ok((candidate, _)) = self.phd.estimate() {
                    let candidate = self.clamp_center(candidate);
                    let r = self.detect_at(frame, candidate, window, deep_layers)?;
                    if r.peak_value > self.config.t_rd {
                        center = self.clamp_center(estimate_translation(&r, cell, candidate));
                        accepted = true;
                    }
                }
            }
        }

        // Scale. A target that is lost gets no size change: the pyramid then
        // holds only background.
        let lost = activated && !accepted;
        let mut scale_factor = 1.0;
        let mut size = self.size;
        if let Some(model) = self.scale.as_ref().filter(|_| !lost) {
            let pyramid = model.build_pyramid(frame, center)?;
            let est = model.estimate_scale(&pyramid)?;
            scale_factor = est.scale;
            let m = model.params.damped(est.scale);
            let (fw, fh) = (self.frame_size.0 as f64, self.frame_size.1 as f64);
            // Keep the aspect ratio while staying within [8 px, frame].
            let lo = (8.0 / size.0.min(size.1)).min(1.0);
            let hi = (fw / size.0).min(fh / size.1).max(1.0);
            let m = m.clamp(lo, hi);
            size = (size.0 * m, size.1 * m);
        }

        // Model updates, every frame.
        self.size = size;
        self.center = center;
        let window = self.window();
        let stack = self.stack_at(frame, center, window, deep_layers)?;
        self.correlation = self.correlation.update_model(&stack, &self.label)?;
        if let Some(model) = &self.scale {
            self.scale = Some(model.update_scale_model(frame, center, size)?);
        }

        // Detector update on confident frames.
        let mut svm_trained = false;
        if peak >= self.config.t_td {
            let target = self.bbox();
            if let Some(redetector) = self.redetector.as_mut() {
                redetector.train(frame, &target, &mut self.rng)?;
                svm_trained = true;
            }
        }

        self.frame_index += 1;
        self.last_response = peak;
        Ok(FrameResult {
            frame: self.frame_index,
            bbox: self.bbox(),
            response: peak,
            redetection_activated: activated,
            redetection_accepted: accepted,
            scale_factor,
            scale: self.size.0 / self.initial_size.0,
            phd_components: self.phd.len(),
            svm_trained,
        })
    }

    fn initial_result(&self) -> FrameResult {
        FrameResult {
            frame: 0,
            bbox: self.bbox(),
            response: f64::NAN,
            redetection_activated: false,
            redetection_accepted: false,
            scale_factor: 1.0,
            scale: 1.0,
            phd_components: self.phd.len(),
            svm_trained: self.redetector.as_ref().is_some_and(|r| r.is_trained()),
        }
    }
}

/// Tracks through `frames`, initializing on the first one. `deep_dir` holds
/// per-frame deep-feature files named by 1-based frame number.
pub fn run_sequence<I>(frames: I, init: BoundingBox, config: TrackerConfig, deep_dir: Option<&Path>) -> Result<Vec<FrameResult>>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let deep_file = |i: usize| -> Option<PathBuf> { deep_dir.map(|d| crate::features::deep::frame_file(d, i + 1)) };
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::Input("sequence has no frames".into()))?
        .map_err(|e| e.at_frame(1))?;
    let mut tracker = Tracker::initialize(&first, init, config, deep_file(0).as_deref()).map_err(|e| e.at_frame(1))?;
    let mut out = vec![tracker.initial_result()];
    for (i, frame) in frames.enumerate() {
        let index = i + 1;
        let result = frame
            .and_then(|f| tracker.step(&f, deep_file(index).as_deref()))
            .map_err(|e| e.at_frame(index + 1))?;
        out.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(width: usize, height: usize, target: BoundingBox) -> Frame {
        Frame::from_fn(width, height, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let bg = 110.0 + 8.0 * ((xf * 0.13).sin() + (yf * 0.11).cos());
            if xf >= target.x && xf < target.x + target.w && yf >= target.y && yf < target.y + target.h {
                let u = (xf - target.x) / target.w;
                let v = (yf - target.y) / target.h;
                let r = 128.0 + 110.0 * (9.0 * u).sin() * (7.0 * v).cos();
                let g = 128.0 + 100.0 * (5.0 * (u + v)).cos();
                [r as f32, g as f32, (255.0 * u) as f32]
            } else {
                [bg as f32; 3]
            }
        })
    }

    #[test]
    fn mask_marks_out_of_frame_cells() {
        // Window spans x in [-10, 30): cell centers at -8, -4, 0, ...
        let m = frame_mask((100, 80), (10.0, 40.0), (40.0, 40.0), 10, 10);
        assert!(!m[[5, 0]] && !m[[5, 1]]);
        assert!(m[[5, 2]] && m[[0, 9]]);
        assert!(frame_mask((100, 80), (50.0, 40.0), (40.0, 40.0), 10, 10).iter().all(|v| *v));
    }

    #[test]
    fn model_window_is_even_in_cells() {
        let c = TrackerConfig::default();
        let (w, h) = model_window((40.0, 30.0), &c);
        assert_eq!((w % 8, h % 8), (0, 0));
        let (w, h) = model_window((200.0, 150.0), &c);
        assert!((w * h) as f64 <= c.max_window_area * 1.2);
        let (w, h) = model_window((5.0, 5.0), &c);
        assert!(w.min(h) as f64 >= c.min_window_side);
    }

    #[test]
    fn fusion_weights_sum_to_one() {
        let c = TrackerConfig::default();
        assert_eq!(fusion_weights(&c, false), vec![1.0]);
        let w = fusion_weights(&c, true);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w[2] / w[3] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn initialization_state() {
        let b = BoundingBox::new(60.0, 50.0, 40.0, 40.0);
        let frame = textured(240, 180, b);
        let t = Tracker::initialize(&frame, b, TrackerConfig::default(), None).unwrap();
        assert_eq!(t.phd().len(), 1);
        assert!(t.redetector().unwrap().is_trained());
        assert_eq!(t.bbox(), b);
        // Self-detection peaks at the window center.
        let r = t.detect_at(&frame, t.center(), t.window(), None).unwrap();
        let (m, n) = t.correlation().spatial_size();
        assert_eq!(r.peak, (m / 2, n / 2));
        assert!(r.peak_value > 0.5 && r.peak_value < 1.5, "{}", r.peak_value);
    }

    #[test]
    fn follows_a_small_shift() {
        let b = BoundingBox::new(60.0, 50.0, 40.0, 40.0);
        let mut cfg = TrackerConfig::default();
        cfg.enable_scale = false;
        let mut t = Tracker::initialize(&textured(240, 180, b), b, cfg, None).unwrap();
        let moved = BoundingBox::new(64.0, 50.0, 40.0, 40.0);
        let r = t.step(&textured(240, 180, moved), None).unwrap();
        assert!((r.bbox.x - 64.0).abs() <= 1.0, "{r:?}");
        assert!(!r.redetection_activated);
        assert!(r.response >= cfg_default_t_td());
        assert!(r.svm_trained);
    }

    fn cfg_default_t_td() -> f64 {
        TrackerConfig::default().t_td
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = BoundingBox::new(60.0, 50.0, 40.0, 40.0);
        let frame = textured(240, 180, b);
        let outside = BoundingBox::new(220.0, 50.0, 40.0, 40.0);
        assert!(matches!(Tracker::initialize(&frame, outside, TrackerConfig::default(), None), Err(Error::Input(_))));
        let mut t = Tracker::initialize(&frame, b, TrackerConfig::default(), None).unwrap();
        assert!(matches!(t.step(&textured(200, 180, b), None), Err(Error::Input(_))));
    }

    #[test]
    fn single_frame_sequence_returns_init() {
        let b = BoundingBox::new(60.0, 50.0, 40.0, 40.0);
        let out = run_sequence([Ok(textured(240, 180, b))], b, TrackerConfig::default(), None).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, b);
    }

    #[test]
    fn errors_carry_the_frame_number() {
        let b = BoundingBox::new(60.0, 50.0, 40.0, 40.0);
        let frames = vec![Ok(textured(240, 180, b)), Ok(textured(240, 180, b)), Err(Error::Input("gone".into()))];
        match run_sequence(frames, b, TrackerConfig::default(), None) {
            Err(Error::AtFrame { frame, .. }) => assert_eq!(frame, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
