//! Tracker configuration and its flat `key = value` text form.

use std::path::Path;

use crate::correlation::{FilterParams, Kernel};
use crate::error::{Error, Result};
use crate::gmphd::{ClutterModel, MotionModel, PhdSettings};
use crate::redetect::{ProposalParams, SamplingParams};
use crate::scale::ScaleParams;
use nalgebra::Matrix4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    // correlation filter
    pub lambda: f64,
    pub sigma_label: f64,
    pub eta: f64,
    pub kernel: Kernel,
    pub cell_size: usize,
    pub padding: f64,
    /// Upper bound on the model window area in pixels; larger windows are
    /// downsampled before feature extraction.
    pub max_window_area: f64,
    /// Lower bound on the model window side in pixels.
    pub min_window_side: f64,
    pub gamma_conv5: f64,
    pub gamma_conv4: f64,
    pub gamma_conv3: f64,
    pub gamma_handcrafted: f64,

    // thresholds
    pub t_rd: f64,
    pub t_td: f64,

    // detector
    pub svm_c: f64,
    pub svm_sigma: f64,
    pub delta_p: f64,
    pub delta_n: f64,
    pub jitter: f64,
    pub negative_ratio: usize,
    pub negative_region: f64,
    pub proposal_count: usize,
    pub proposal_region: f64,
    pub proposal_nms: f64,
    pub max_support_vectors: usize,

    // scale
    pub scale_levels: usize,
    pub scale_step: f64,
    pub scale_damping: f64,
    pub scale_min_template: usize,
    pub scale_max_template_area: usize,

    // GM-PHD
    pub lambda_t: f64,
    pub merge_distance: f64,
    pub prune_threshold: f64,
    pub max_components: usize,
    pub p_survival: f64,
    pub p_detection: f64,
    pub q_position: f64,
    pub q_velocity: f64,
    pub r_position: f64,
    pub birth_weight: f64,
    pub birth_variance: f64,

    pub seed: u64,
    pub enable_redetection: bool,
    pub enable_scale: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            sigma_label: 0.1,
            eta: 0.01,
            kernel: Kernel::Linear,
            cell_size: 4,
            padding: 2.8,
            max_window_area: 160.0 * 160.0,
            min_window_side: 48.0,
            gamma_conv5: 1.0,
            gamma_conv4: 0.4,
            gamma_conv3: 0.02,
            gamma_handcrafted: 0.1,
            t_rd: 0.15,
            t_td: 0.40,
            svm_c: 2.0,
            svm_sigma: 0.5,
            delta_p: 0.9,
            delta_n: 0.3,
            jitter: 2.0,
            negative_ratio: 3,
            negative_region: 4.0,
            proposal_count: 5,
            proposal_region: 6.0,
            proposal_nms: 0.5,
            max_support_vectors: 200,
            scale_levels: 31,
            scale_step: 1.04,
            scale_damping: 0.6,
            scale_min_template: 32,
            scale_max_template_area: 96 * 96,
            lambda_t: 4.0,
            merge_distance: 4.0,
            prune_threshold: 1e-5,
            max_components: 100,
            p_survival: 0.99,
            p_detection: 0.9,
            q_position: 4.0,
            q_velocity: 1.0,
            r_position: 9.0,
            birth_weight: 0.1,
            birth_variance: 25.0,
            seed: 42,
            enable_redetection: true,
            enable_scale: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

impl TrackerConfig {
    pub const KEYS: &'static [&'static str] = &[
        "lambda", "sigma_label", "eta", "kernel", "kernel_sigma", "cell_size", "padding", "max_window_area",
        "min_window_side", "gamma_conv5", "gamma_conv4", "gamma_conv3", "gamma_handcrafted", "t_rd", "t_td",
        "svm_c", "svm_sigma", "delta_p", "delta_n", "jitter", "negative_ratio", "negative_region",
        "proposal_count", "proposal_region", "proposal_nms", "max_support_vectors", "scale_levels", "scale_step",
        "scale_damping", "scale_min_template", "scale_max_template_area", "lambda_t", "merge_distance",
        "prune_threshold", "max_components", "p_survival", "p_detection", "q_position", "q_velocity",
        "r_position", "birth_weight", "birth_variance", "seed", "enable_redetection", "enable_scale",
    ];

    /// Sets one parameter by key. `kernel` takes `linear` or `gaussian`;
    /// `kernel_sigma` switches to a gaussian kernel of that width.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "lambda" => self.lambda = parse(key, v)?,
            "sigma_label" => self.sigma_label = parse(key, v)?,
            "eta" => self.eta = parse(key, v)?,
            "kernel" => {
                self.kernel = match v {
                    "linear" => Kernel::Linear,
                    "gaussian" => match self.kernel {
                        Kernel::Gaussian { sigma } => Kernel::Gaussian { sigma },
                        Kernel::Linear => Kernel::Gaussian { sigma: 0.5 },
                    },
                    _ => return Err(Error::Config(format!("unknown kernel {v:?}"))),
                }
            }
            "kernel_sigma" => self.kernel = Kernel::Gaussian { sigma: parse(key, v)? },
            "cell_size" => self.cell_size = parse(key, v)?,
            "padding" => self.padding = parse(key, v)?,
            "max_window_area" => self.max_window_area = parse(key, v)?,
            "min_window_side" => self.min_window_side = parse(key, v)?,
            "gamma_conv5" => self.gamma_conv5 = parse(key, v)?,
            "gamma_conv4" => self.gamma_conv4 = parse(key, v)?,
            "gamma_conv3" => self.gamma_conv3 = parse(key, v)?,
            "gamma_handcrafted" => self.gamma_handcrafted = parse(key, v)?,
            "t_rd" => self.t_rd = parse(key, v)?,
            "t_td" => self.t_td = parse(key, v)?,
            "svm_c" => self.svm_c = parse(key, v)?,
            "svm_sigma" => self.svm_sigma = parse(key, v)?,
            "delta_p" => self.delta_p = parse(key, v)?,
            "delta_n" => self.delta_n = parse(key, v)?,
            "jitter" => self.jitter = parse(key, v)?,
            "negative_ratio" => self.negative_ratio = parse(key, v)?,
            "negative_region" => self.negative_region = parse(key, v)?,
            "proposal_count" => self.proposal_count = parse(key, v)?,
            "proposal_region" => self.proposal_region = parse(key, v)?,
            "proposal_nms" => self.proposal_nms = parse(key, v)?,
            "max_support_vectors" => self.max_support_vectors = parse(key, v)?,
            "scale_levels" => self.scale_levels = parse(key, v)?,
            "scale_step" => self.scale_step = parse(key, v)?,
            "scale_damping" => self.scale_damping = parse(key, v)?,
            "scale_min_template" => self.scale_min_template = parse(key, v)?,
            "scale_max_template_area" => self.scale_max_template_area = parse(key, v)?,
            "lambda_t" => self.lambda_t = parse(key, v)?,
            "merge_distance" => self.merge_distance = parse(key, v)?,
            "prune_threshold" => self.prune_threshold = parse(key, v)?,
            "max_components" => self.max_components = parse(key, v)?,
            "p_survival" => self.p_survival = parse(key, v)?,
            "p_detection" => self.p_detection = parse(key, v)?,
            "q_position" => self.q_position = parse(key, v)?,
            "q_velocity" => self.q_velocity = parse(key, v)?,
            "r_position" => self.r_position = parse(key, v)?,
            "birth_weight" => self.birth_weight = parse(key, v)?,
            "birth_variance" => self.birth_variance = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "enable_redetection" => self.enable_redetection = parse_bool(key, v)?,
            "enable_scale" => self.enable_scale = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Resource {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    /// Text form accepted by [`TrackerConfig::from_text`].
    pub fn to_text(&self) -> String {
        let kernel = match self.kernel {
            Kernel::Linear => "kernel = linear\n".to_string(),
            Kernel::Gaussian { sigma } => format!("kernel_sigma = {sigma}\n"),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("lambda", self.lambda.to_string()),
            ("sigma_label", self.sigma_label.to_string()),
            ("eta", self.eta.to_string()),
            ("cell_size", self.cell_size.to_string()),
            ("padding", self.padding.to_string()),
            ("max_window_area", self.max_window_area.to_string()),
            ("min_window_side", self.min_window_side.to_string()),
            ("gamma_conv5", self.gamma_conv5.to_string()),
            ("gamma_conv4", self.gamma_conv4.to_string()),
            ("gamma_conv3", self.gamma_conv3.to_string()),
            ("gamma_handcrafted", self.gamma_handcrafted.to_string()),
            ("t_rd", self.t_rd.to_string()),
            ("t_td", self.t_td.to_string()),
            ("svm_c", self.svm_c.to_string()),
            ("svm_sigma", self.svm_sigma.to_string()),
            ("delta_p", self.delta_p.to_string()),
            ("delta_n", self.delta_n.to_string()),
            ("jitter", self.jitter.to_string()),
            ("negative_ratio", self.negative_ratio.to_string()),
            ("negative_region", self.negative_region.to_string()),
            ("proposal_count", self.proposal_count.to_string()),
            ("proposal_region", self.proposal_region.to_string()),
            ("proposal_nms", self.proposal_nms.to_string()),
            ("max_support_vectors", self.max_support_vectors.to_string()),
            ("scale_levels", self.scale_levels.to_string()),
            ("scale_step", self.scale_step.to_string()),
            ("scale_damping", self.scale_damping.to_string()),
            ("scale_min_template", self.scale_min_template.to_string()),
            ("scale_max_template_area", self.scale_max_template_area.to_string()),
            ("lambda_t", self.lambda_t.to_string()),
            ("merge_distance", self.merge_distance.to_string()),
            ("prune_threshold", self.prune_threshold.to_string()),
            ("max_components", self.max_components.to_string()),
            ("p_survival", self.p_survival.to_string()),
            ("p_detection", self.p_detection.to_string()),
            ("q_position", self.q_position.to_string()),
            ("q_velocity", self.q_velocity.to_string()),
            ("r_position", self.r_position.to_string()),
            ("birth_weight", self.birth_weight.to_string()),
            ("birth_variance", self.birth_variance.to_string()),
            ("seed", self.seed.to_string()),
            ("enable_redetection", self.enable_redetection.to_string()),
            ("enable_scale", self.enable_scale.to_string()),
        ];
        let mut out = kernel;
        for (k, v) in pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.t_rd < self.t_td) {
            return fail(format!("t_rd ({}) must be below t_td ({})", self.t_rd, self.t_td));
        }
        if !(self.delta_n < self.delta_p) {
            return fail(format!("delta_n ({}) must be below delta_p ({})", self.delta_n, self.delta_p));
        }
        if self.cell_size == 0 || self.padding <= 1.0 {
            return fail("cell_size must be positive and padding above 1".into());
        }
        if self.max_window_area <= 0.0 || self.min_window_side <= 0.0 {
            return fail("window bounds must be positive".into());
        }
        let gammas = [self.gamma_conv5, self.gamma_conv4, self.gamma_conv3, self.gamma_handcrafted];
        if gammas.iter().any(|g| *g < 0.0 || !g.is_finite()) || self.gamma_handcrafted <= 0.0 {
            return fail("fusion weights must be non-negative and gamma_handcrafted positive".into());
        }
        if self.svm_c <= 0.0 || self.svm_sigma <= 0.0 {
            return fail("svm_c and svm_sigma must be positive".into());
        }
        if self.proposal_count == 0 || self.max_support_vectors == 0 {
            return fail("proposal_count and max_support_vectors must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.scale_damping) {
            return fail(format!("scale_damping {} outside [0, 1]", self.scale_damping));
        }
        if self.lambda_t < 0.0 || self.prune_threshold < 0.0 || self.merge_distance < 0.0 {
            return fail("PHD parameters must be non-negative".into());
        }
        self.motion_model().validate()?;
        self.scale_params().validate()?;
        if !(0.0..=1.0).contains(&self.eta) {
            return fail(format!("eta {} outside [0, 1]", self.eta));
        }
        Ok(())
    }

    pub fn filter_params(&self) -> FilterParams {
        FilterParams { lambda: self.lambda, sigma_label: self.sigma_label, eta: self.eta, kernel: self.kernel }
    }

    pub fn scale_params(&self) -> ScaleParams {
        ScaleParams {
            levels: self.scale_levels,
            step: self.scale_step,
            filter: self.filter_params(),
            cell_size: self.cell_size,
            damping: self.scale_damping,
            min_template_side: self.scale_min_template,
            max_template_area: self.scale_max_template_area,
        }
    }

    pub fn sampling_params(&self) -> SamplingParams {
        SamplingParams {
            jitter: self.jitter,
            negative_ratio: self.negative_ratio,
            negative_region: self.negative_region,
            delta_p: self.delta_p,
            delta_n: self.delta_n,
        }
    }

    pub fn proposal_params(&self) -> ProposalParams {
        ProposalParams { count: self.proposal_count, search_region: self.proposal_region, nms_iou: self.proposal_nms }
    }

    pub fn motion_model(&self) -> MotionModel {
        let (q, r) = (self.q_position, self.r_position);
        MotionModel::constant_velocity([q, q, self.q_velocity, self.q_velocity], [r, r], self.p_survival, self.p_detection)
    }

    /// PHD settings with clutter spread uniformly over a `width × height` frame.
    pub fn phd_settings(&self, frame_size: (usize, usize)) -> Result<PhdSettings> {
        let area = (frame_size.0 * frame_size.1) as f64;
        let mut s = PhdSettings::new(ClutterModel::new(self.lambda_t, area)?);
        s.motion = self.motion_model();
        s.birth_weight = self.birth_weight;
        s.birth_cov = Matrix4::from_diagonal_element(self.birth_variance);
        s.prune_threshold = self.prune_threshold;
        s.merge_distance = self.merge_distance;
        s.max_components = self.max_components;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_parameters() {
        let c = TrackerConfig::default();
        assert_eq!((c.lambda, c.sigma_label, c.eta), (1e-4, 0.1, 0.01));
        assert_eq!((c.svm_c, c.t_rd, c.t_td), (2.0, 0.15, 0.40));
        assert_eq!((c.delta_p, c.delta_n), (0.9, 0.3));
        assert_eq!((c.scale_levels, c.scale_step), (31, 1.04));
        assert_eq!((c.lambda_t, c.merge_distance, c.prune_threshold), (4.0, 4.0, 1e-5));
        assert_eq!(c.seed, 42);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrackerConfig::default();
        c.set("kernel_sigma", "0.7").unwrap();
        c.set("seed", "7").unwrap();
        c.set("enable_scale", "off").unwrap();
        let back = TrackerConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn every_key_is_settable() {
        let reference = TrackerConfig::default().to_text();
        let listed: Vec<&str> = reference.lines().map(|l| l.split('=').next().unwrap().trim()).collect();
        for key in TrackerConfig::KEYS {
            if *key == "kernel_sigma" {
                continue;
            }
            assert!(listed.contains(key), "{key} missing from text form");
        }
        let mut c = TrackerConfig::default();
        for line in reference.lines() {
            let (k, v) = line.split_once('=').unwrap();
            c.set(k, v).unwrap();
        }
    }

    #[test]
    fn comments_and_errors() {
        let c = TrackerConfig::from_text("# tuned\n\nt_rd = 0.1 # lower\n").unwrap();
        assert_eq!(c.t_rd, 0.1);
        assert!(matches!(TrackerConfig::from_text("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(TrackerConfig::from_text("t_rd"), Err(Error::Config(_))));
        assert!(matches!(TrackerConfig::from_text("eta = fast"), Err(Error::Config(_))));
    }

    #[test]
    fn threshold_ordering_is_enforced() {
        assert!(TrackerConfig::from_text("t_rd = 0.5").is_err());
        assert!(TrackerConfig::from_text("delta_n = 0.95").is_err());
        assert!(TrackerConfig::from_text("scale_levels = 30").is_err());
    }
}
