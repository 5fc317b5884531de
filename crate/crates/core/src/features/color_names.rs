//! RGB → 11 color-name probabilities via a 32×32×32 lookup table.
//!
//! File layout: 32768 rows × 11 little-endian `f32`, row-major, row index
//! `(R >> 3) * 1024 + (G >> 3) * 32 + (B >> 3)`. Column order: black, blue,
//! brown, grey, green, orange, pink, purple, red, white, yellow.

use std::path::Path;
use std::sync::OnceLock;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::features::FeatureLayer;
use crate::image::ImagePatch;

pub const COLOR_NAMES: usize = 11;
pub const TABLE_ROWS: usize = 32 * 32 * 32;
const TABLE_BYTES: usize = TABLE_ROWS * COLOR_NAMES * 4;

pub const COLOR_NAME_LABELS: [&str; COLOR_NAMES] = [
    "black", "blue", "brown", "grey", "green", "orange", "pink", "purple", "red", "white", "yellow",
];

static EMBEDDED: &[u8] = include_bytes!("../../data/color_names.bin");

#[derive(Debug, Clone, PartialEq)]
pub struct ColorNameTable {
    entries: Vec<f32>,
}

impl ColorNameTable {
    /// Validates that every row is a probability vector (non-negative, sum 1 ± 1e-3).
    pub fn new(entries: Vec<f32>) -> Result<Self> {
        if entries.len() != TABLE_ROWS * COLOR_NAMES {
            return Err(Error::Format(format!(
                "color-name table needs {} values, got {}",
                TABLE_ROWS * COLOR_NAMES,
                entries.len()
            )));
        }
        for (row, probs) in entries.chunks_exact(COLOR_NAMES).enumerate() {
            let sum: f32 = probs.iter().sum();
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-3 {
                return Err(Error::Format(format!("color-name row {row} is not a probability vector")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != TABLE_BYTES {
            return Err(Error::Format(format!(
                "color-name table must be {TABLE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let entries = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::Resource {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_bytes(&bytes).map_err(|e| Error::Resource {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// The table bundled with the crate, parsed once.
    pub fn bundled() -> &'static ColorNameTable {
        static TABLE: OnceLock<ColorNameTable> = OnceLock::new();
        TABLE.get_or_init(|| ColorNameTable::from_bytes(EMBEDDED).expect("bundled color-name table is valid"))
    }

    /// Soft assignment of each quantized RGB bin to 11 prototype colors by
    /// distance in CIELAB. This is the generator of the bundled table.
    pub fn prototype() -> Self {
        const PROTOTYPES: [[f64; 3]; COLOR_NAMES] = [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 255.0],
            [136.0, 84.0, 40.0],
            [128.0, 128.0, 128.0],
            [0.0, 200.0, 0.0],
            [255.0, 140.0, 0.0],
            [255.0, 160.0, 200.0],
            [128.0, 0.0, 160.0],
            [220.0, 0.0, 0.0],
            [255.0, 255.0, 255.0],
            [255.0, 255.0, 0.0],
        ];
        const TEMPERATURE: f64 = 20.0;
        let protos: Vec<[f64; 3]> = PROTOTYPES.iter().map(|p| srgb_to_lab(*p)).collect();
        let mut entries = Vec::with_capacity(TABLE_ROWS * COLOR_NAMES);
        for index in 0..TABLE_ROWS {
            let r = ((index >> 10) & 31) as f64 * 8.0 + 4.0;
            let g = ((index >> 5) & 31) as f64 * 8.0 + 4.0;
            let b = (index & 31) as f64 * 8.0 + 4.0;
            let lab = srgb_to_lab([r, g, b]);
            let d2: Vec<f64> = protos
                .iter()
                .map(|p| (0..3).map(|c| (lab[c] - p[c]).powi(2)).sum::<f64>())
                .collect();
            let min = d2.iter().cloned().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = d2
                .iter()
                .map(|d| (-(d - min) / (2.0 * TEMPERATURE * TEMPERATURE)).exp())
                .collect();
            let total: f64 = w.iter().sum();
            entries.extend(w.iter().map(|v| (v / total) as f32));
        }
        Self { entries }
    }

    #[inline]
    pub fn index(rgb: [f32; 3]) -> usize {
        let q = |v: f32| (v.clamp(0.0, 255.0) as u32 >> 3) as usize;
        q(rgb[0]) * 1024 + q(rgb[1]) * 32 + q(rgb[2])
    }

    #[inline]
    pub fn row(&self, index: usize) -> &[f32] {
        &self.entries[index * COLOR_NAMES..(index + 1) * COLOR_NAMES]
    }

    pub fn lookup(&self, rgb: [f32; 3]) -> &[f32] {
        self.row(Self::index(rgb))
    }
}

fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let xyz = srgb_to_xyz(rgb);
    let (xn, yn, zn) = (0.950_47, 1.0, 1.088_83);
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(xyz[0] / xn), f(xyz[1] / yn), f(xyz[2] / zn));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// sRGB in `[0, 255]` to CIE XYZ under D65.
pub(crate) fn srgb_to_xyz(rgb: [f64; 3]) -> [f64; 3] {
    let lin = |v: f64| {
        let v = v / 255.0;
        if v <= 0.040_45 {
            v / 12.92
        } else {
            ((v + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(rgb[0]), lin(rgb[1]), lin(rgb[2]));
    [
        0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b,
        0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b,
        0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b,
    ]
}

/// Per-pixel color-name probabilities averaged over `cell_size × cell_size` cells.
pub fn extract_color_names(patch: &ImagePatch, table: &ColorNameTable, cell_size: usize) -> Result<FeatureLayer> {
    if cell_size == 0 {
        return Err(Error::DegenerateInput("cell size must be positive".into()));
    }
    let rows = patch.height() / cell_size;
    let cols = patch.width() / cell_size;
    if rows == 0 || cols == 0 {
        return Err(Error::DegenerateInput(format!(
            "patch {}x{} is smaller than one {cell_size}px cell",
            patch.width(),
            patch.height()
        )));
    }
    let mut out = Array3::<f64>::zeros((rows, cols, COLOR_NAMES));
    let inv = 1.0 / (cell_size * cell_size) as f64;
    for m in 0..rows {
        for n in 0..cols {
            let mut acc = [0.0f64; COLOR_NAMES];
            for y in m * cell_size..(m + 1) * cell_size {
                for x in n * cell_size..(n + 1) * cell_size {
                    for (a, p) in acc.iter_mut().zip(table.lookup(patch.pixel(x, y))) {
                        *a += *p as f64;
                    }
                }
            }
            for (k, a) in acc.iter().enumerate() {
                out[[m, n, k]] = a * inv;
            }
        }
    }
    Ok(FeatureLayer::new(out, 0, 1.0))
}
