//! Scale estimation with a pyramid of resampled patches scored by a
//! dedicated single-layer HOG correlation filter.

use crate::correlation::{make_label, CorrelationModel, FilterParams, GaussianLabelMap};
use crate::error::{Error, Result};
use crate::features::{extract_hog, normalize_and_window, FeatureStack};
use crate::image::{Frame, ImagePatch};

/// Levels whose source region is smaller than this on either side are skipped.
pub const MIN_LEVEL_SIDE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleParams {
    pub levels: usize,
    pub step: f64,
    pub filter: FilterParams,
    pub cell_size: usize,
    /// Weight of the raw estimate in `size ← size · (d·ŝ + (1 − d))`.
    pub damping: f64,
    /// Smallest template side in pixels; smaller targets are upsampled.
    pub min_template_side: usize,
    /// Largest template area in pixels; larger targets are downsampled.
    pub max_template_area: usize,
}

impl Default for ScaleParams {
    fn default() -> Self {
        Self {
            levels: 31,
            step: 1.04,
            filter: FilterParams::default(),
            cell_size: 4,
            damping: 0.6,
            min_template_side: 32,
            max_template_area: 96 * 96,
        }
    }
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels % 2 == 0 || self.levels == 0 {
            return Err(Error::Config(format!("scale level count {} must be odd", self.levels)));
        }
        if self.step <= 1.0 {
            return Err(Error::Config(format!("scale step {} must exceed 1", self.step)));
        }
        Ok(())
    }

    pub fn exponents(&self) -> impl Iterator<Item = i32> {
        let half = (self.levels / 2) as i32;
        -half..=half
    }

    /// Damped size multiplier for a raw scale estimate.
    pub fn damped(&self, scale: f64) -> f64 {
        self.damping * scale + (1.0 - self.damping)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub exponent: i32,
    pub scale: f64,
    /// `None` when the scaled region is too small to sample.
    pub patch: Option<ImagePatch>,
}

/// Patches of size `a^n·P × a^n·Q` around `center`, each resampled to `P × Q`.
pub fn build_pyramid(frame: &Frame, center: (f64, f64), size: (f64, f64), levels: usize, step: f64) -> Result<Vec<PyramidLevel>> {
    if levels % 2 == 0 {
        return Err(Error::Config(format!("scale level count {levels} must be odd")));
    }
    let out = (size.0.round().max(1.0) as usize, size.1.round().max(1.0) as usize);
    let half = (levels / 2) as i32;
    Ok((-half..=half)
        .map(|n| {
            let scale = step.powi(n);
            let src = (size.0 * scale, size.1 * scale);
            let patch = (src.0 >= MIN_LEVEL_SIDE && src.1 >= MIN_LEVEL_SIDE).then(|| frame.sample(center, src, out));
            PyramidLevel { exponent: n, scale, patch }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEstimate {
    pub scale: f64,
    pub exponent: i32,
    /// Peak response per level, `None` for skipped levels.
    pub responses: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleModel {
    pub filter: CorrelationModel,
    pub params: ScaleParams,
    pub current_size: (f64, f64),
    /// Pixel size every level is resampled to before feature extraction.
    pub template: (usize, usize),
    label: GaussianLabelMap,
}

fn template_size(size: (f64, f64), params: &ScaleParams) -> (usize, usize) {
    let (w, h) = size;
    let mut k = 1.0;
    let min_side = params.min_template_side as f64;
    if w.min(h) < min_side {
        k = min_side / w.min(h);
    }
    let area = w * h * k * k;
    if area > params.max_template_area as f64 {
        k = (params.max_template_area as f64 / (w * h)).sqrt();
    }
    let cell = params.cell_size as f64;
    let snap = |v: f64| ((v * k / cell).round().max(3.0) * cell) as usize;
    (snap(w), snap(h))
}

impl ScaleModel {
    pub fn train(frame: &Frame, center: (f64, f64), size: (f64, f64), params: ScaleParams) -> Result<Self> {
        params.validate()?;
        if size.0 < MIN_LEVEL_SIDE || size.1 < MIN_LEVEL_SIDE {
            return Err(Error::DegenerateInput(format!("scale sample {size:?} is smaller than 8x8")));
        }
        let template = template_size(size, &params);
        let rows = template.1 / params.cell_size;
        let cols = template.0 / params.cell_size;
        let label = make_label(rows, cols, params.filter.sigma_label);
        let stack = Self::stack_for(frame.sample(center, size, template), template, params.cell_size)?;
        let filter = CorrelationModel::train(&stack, &label, params.filter)?;
        Ok(Self { filter, params, current_size: size, template, label })
    }

    fn stack_for(patch: ImagePatch, template: (usize, usize), cell_size: usize) -> Result<FeatureStack> {
        let patch = if (patch.width(), patch.height()) == template { patch } else { patch.resized(template.0, template.1) };
        FeatureStack::single(normalize_and_window(extract_hog(&patch, cell_size)?))
    }

    /// Peak of the scale filter's response on one pyramid level.
    pub fn level_response(&self, patch: &ImagePatch) -> Result<f64> {
        let stack = Self::stack_for(patch.clone(), self.template, self.params.cell_size)?;
        Ok(self.filter.detect(&stack)?.peak_value)
    }

    pub fn build_pyramid(&self, frame: &Frame, center: (f64, f64)) -> Result<Vec<PyramidLevel>> {
        build_pyramid(frame, center, self.current_size, self.params.levels, self.params.step)
    }

    /// Best level by peak response; ties prefer the level nearest `n = 0`, then
    /// the lower exponent.
    pub fn estimate_scale(&self, pyramid: &[PyramidLevel]) -> Result<ScaleEstimate> {
        let responses = pyramid
            .iter()
            .map(|level| level.patch.as_ref().map(|p| self.level_response(p)).transpose())
            .collect::<Result<Vec<_>>>()?;
        let best = select_level(pyramid, &responses).ok_or(Error::NoScale)?;
        Ok(ScaleEstimate { scale: pyramid[best].scale, exponent: pyramid[best].exponent, responses })
    }

    /// Interpolates toward a filter trained at `new_size`; the tracked size
    /// becomes `new_size`.
    pub fn update_scale_model(&self, frame: &Frame, center: (f64, f64), new_size: (f64, f64)) -> Result<Self> {
        let stack = Self::stack_for(frame.sample(center, new_size, self.template), self.template, self.params.cell_size)?;
        let filter = self.filter.update_model(&stack, &self.label)?;
        Ok(Self { filter, current_size: new_size, ..self.clone() })
    }
}

pub(crate) fn select_level(pyramid: &[PyramidLevel], responses: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in responses.iter().enumerate() {
        let Some(v) = *r else { continue };
        let better = match best {
            None => true,
            Some((j, bv)) => {
                let (ni, nj) = (pyramid[i].exponent, pyramid[j].exponent);
                v > bv || (v == bv && (ni.abs(), ni) < (nj.abs(), nj))
            }
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}
