//! Hand-crafted and precomputed features, windowing and resizing.

pub mod color_names;
pub mod deep;
pub mod detector;
pub mod hog;
mod layer;

pub use color_names::{extract_color_names, ColorNameTable, COLOR_NAMES};
pub use deep::load_deep_layers;
pub use detector::{extract_detector_features, DETECTOR_FEATURE_LEN};
pub use hog::{extract_hog, HOG_CHANNELS};
pub use layer::{
    apply_cosine_window, cosine_window, hann, normalize_and_window, normalize_and_window_masked, resize_layer, FeatureLayer, FeatureStack,
};

use crate::error::Result;
use crate::image::ImagePatch;

pub const HANDCRAFTED_CHANNELS: usize = HOG_CHANNELS + COLOR_NAMES;

/// HOG followed by color names: a 42-channel layer.
pub fn build_handcrafted_layer(patch: &ImagePatch, table: &ColorNameTable, cell_size: usize) -> Result<FeatureLayer> {
    let hog = extract_hog(patch, cell_size)?;
    let cn = extract_color_names(patch, table, cell_size)?;
    let data = layer::concat_channels(&[&hog.data, &cn.data]);
    Ok(FeatureLayer::new(data, 0, 1.0))
}
