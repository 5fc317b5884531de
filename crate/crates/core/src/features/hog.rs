//! Felzenszwalb-style 31-channel HOG.
//!
//! Channel layout per cell: 18 contrast-sensitive orientations, 9
//! contrast-insensitive orientations, 4 texture (gradient energy) channels.
//! The map covers `floor(H / cell) × floor(W / cell)` cells; pixels past the
//! last full cell are ignored. Gradients at the patch border use replicated
//! edge pixels.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::features::FeatureLayer;
use crate::image::ImagePatch;

pub const HOG_CHANNELS: usize = 31;
const ORIENTATIONS: usize = 9;
const TRUNCATION: f64 = 0.2;
const EPS: f64 = 1e-4;
const TEXTURE_SCALE: f64 = 0.2357;

/// Per-pixel gradient of the strongest color channel.
pub(crate) struct Gradients {
    pub magnitude: Array2<f64>,
    pub dx: Array2<f64>,
    pub dy: Array2<f64>,
}

pub(crate) fn gradients(patch: &ImagePatch, width: usize, height: usize) -> Gradients {
    let img = &patch.image;
    let mut magnitude = Array2::zeros((height, width));
    let mut gx = Array2::zeros((height, width));
    let mut gy = Array2::zeros((height, width));
    for y in 0..height {
        for x in 0..width {
            let (xi, yi) = (x as i64, y as i64);
            let right = img.pixel_clamped(xi + 1, yi);
            let left = img.pixel_clamped(xi - 1, yi);
            let down = img.pixel_clamped(xi, yi + 1);
            let up = img.pixel_clamped(xi, yi - 1);
            let mut best = (0.0f64, 0.0f64, 0.0f64);
            for c in 0..3 {
                let dx = (right[c] - left[c]) as f64;
                let dy = (down[c] - up[c]) as f64;
                let v = dx * dx + dy * dy;
                if v > best.0 {
                    best = (v, dx, dy);
                }
            }
            magnitude[[y, x]] = best.0.sqrt();
            gx[[y, x]] = best.1;
            gy[[y, x]] = best.2;
        }
    }
    Gradients { magnitude, dx: gx, dy: gy }
}

pub fn extract_hog(patch: &ImagePatch, cell_size: usize) -> Result<FeatureLayer> {
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
    let width = cols * cell_size;
    let height = rows * cell_size;
    let grad = gradients(patch, width, height);

    let (uu, vv): (Vec<f64>, Vec<f64>) = (0..ORIENTATIONS)
        .map(|o| {
            let a = o as f64 * PI / ORIENTATIONS as f64;
            (a.cos(), a.sin())
        })
        .unzip();

    // Orientation histograms with bilinear spatial voting into cell centers.
    let mut hist = Array3::<f64>::zeros((rows, cols, 2 * ORIENTATIONS));
    let cs = cell_size as f64;
    for y in 0..height {
        for x in 0..width {
            let mag = grad.magnitude[[y, x]];
            if mag == 0.0 {
                continue;
            }
            let (dx, dy) = (grad.dx[[y, x]], grad.dy[[y, x]]);
            let mut best_dot = 0.0;
            let mut best_o = 0;
            for o in 0..ORIENTATIONS {
                let dot = uu[o] * dx + vv[o] * dy;
                if dot > best_dot {
                    best_dot = dot;
                    best_o = o;
                } else if -dot > best_dot {
                    best_dot = -dot;
                    best_o = o + ORIENTATIONS;
                }
            }
            let xp = (x as f64 + 0.5) / cs - 0.5;
            let yp = (y as f64 + 0.5) / cs - 0.5;
            let ixp = xp.floor();
            let iyp = yp.floor();
            let vx0 = xp - ixp;
            let vy0 = yp - iyp;
            let (ixp, iyp) = (ixp as i64, iyp as i64);
            for (oy, wy) in [(0i64, 1.0 - vy0), (1, vy0)] {
                for (ox, wx) in [(0i64, 1.0 - vx0), (1, vx0)] {
                    let (cy, cx) = (iyp + oy, ixp + ox);
                    if cy >= 0 && cx >= 0 && (cy as usize) < rows && (cx as usize) < cols {
                        hist[[cy as usize, cx as usize, best_o]] += wy * wx * mag;
                    }
                }
            }
        }
    }

    let mut energy = Array2::<f64>::zeros((rows, cols));
    for m in 0..rows {
        for n in 0..cols {
            energy[[m, n]] = (0..ORIENTATIONS)
                .map(|o| {
                    let s = hist[[m, n, o]] + hist[[m, n, o + ORIENTATIONS]];
                    s * s
                })
                .sum();
        }
    }
    let e = |m: i64, n: i64| -> f64 {
        let m = m.clamp(0, rows as i64 - 1) as usize;
        let n = n.clamp(0, cols as i64 - 1) as usize;
        energy[[m, n]]
    };

    let mut out = Array3::<f64>::zeros((rows, cols, HOG_CHANNELS));
    for m in 0..rows {
        for n in 0..cols {
            let (mi, ni) = (m as i64, n as i64);
            let block = |dm: i64, dn: i64| {
                let s = e(mi, ni) + e(mi + dm, ni) + e(mi, ni + dn) + e(mi + dm, ni + dn);
                1.0 / (s + EPS).sqrt()
            };
            let norms = [block(1, 1), block(-1, 1), block(1, -1), block(-1, -1)];
            let mut texture = [0.0f64; 4];
            for o in 0..2 * ORIENTATIONS {
                let h = hist[[m, n, o]];
                let mut acc = 0.0;
                for (k, nk) in norms.iter().enumerate() {
                    let t = (h * nk).min(TRUNCATION);
                    acc += t;
                    texture[k] += t;
                }
                out[[m, n, o]] = 0.5 * acc;
            }
            for o in 0..ORIENTATIONS {
                let h = hist[[m, n, o]] + hist[[m, n, o + ORIENTATIONS]];
                let acc: f64 = norms.iter().map(|nk| (h * nk).min(TRUNCATION)).sum();
                out[[m, n, 2 * ORIENTATIONS + o]] = 0.5 * acc;
            }
            for (k, t) in texture.iter().enumerate() {
                out[[m, n, 3 * ORIENTATIONS + k]] = TEXTURE_SCALE * t;
            }
        }
    }
    Ok(FeatureLayer::new(out, 0, 1.0))
}
