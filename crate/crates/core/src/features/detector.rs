//! Feature vectors for the re-detection classifier.
//!
//! A window is resampled to `DETECTOR_WINDOW × DETECTOR_WINDOW` pixels and
//! described by three blocks, concatenated in this order:
//!
//! 1. HOG, `8×8×31`, flattened `(row, col, channel)` with channel fastest;
//! 2. mean LUV color per cell, `8×8×3`, same order;
//! 3. mean normalized gradient magnitude per cell, `8×8`, row-major.
//!
//! Total length is `8·8·(31 + 3 + 1) = 2240`.

use ndarray::Array2;

use crate::error::Result;
use crate::features::color_names::srgb_to_xyz;
use crate::features::hog::{extract_hog, gradients, HOG_CHANNELS};
use crate::image::ImagePatch;

pub const DETECTOR_WINDOW: usize = 32;
pub const DETECTOR_CELL: usize = 4;
const GRID: usize = DETECTOR_WINDOW / DETECTOR_CELL;
pub const DETECTOR_FEATURE_LEN: usize = GRID * GRID * (HOG_CHANNELS + 3 + 1);

/// Radius of the box filter used to normalize gradient magnitude.
const NORM_RADIUS: usize = 5;
const NORM_CONST: f64 = 0.005;

pub fn extract_detector_features(patch: &ImagePatch) -> Result<Vec<f64>> {
    let window = if (patch.width(), patch.height()) == (DETECTOR_WINDOW, DETECTOR_WINDOW) {
        patch.clone()
    } else {
        patch.resized(DETECTOR_WINDOW, DETECTOR_WINDOW)
    };
    let mut out = Vec::with_capacity(DETECTOR_FEATURE_LEN);
    let hog = extract_hog(&window, DETECTOR_CELL)?;
    out.extend(hog.data.iter().copied());

    let luv = luv_image(&window);
    for m in 0..GRID {
        for n in 0..GRID {
            for c in 0..3 {
                out.push(cell_mean(&luv[c], m, n));
            }
        }
    }

    let grad = normalized_gradient_magnitude(&window);
    for m in 0..GRID {
        for n in 0..GRID {
            out.push(cell_mean(&grad, m, n));
        }
    }
    debug_assert_eq!(out.len(), DETECTOR_FEATURE_LEN);
    Ok(out)
}

fn cell_mean(img: &Array2<f64>, m: usize, n: usize) -> f64 {
    let mut acc = 0.0;
    for y in m * DETECTOR_CELL..(m + 1) * DETECTOR_CELL {
        for x in n * DETECTOR_CELL..(n + 1) * DETECTOR_CELL {
            acc += img[[y, x]];
        }
    }
    acc / (DETECTOR_CELL * DETECTOR_CELL) as f64
}

/// CIE L*u*v* per pixel, each channel rescaled to roughly `[0, 1]`.
fn luv_image(patch: &ImagePatch) -> [Array2<f64>; 3] {
    let (w, h) = (patch.width(), patch.height());
    let mut l = Array2::zeros((h, w));
    let mut u = Array2::zeros((h, w));
    let mut v = Array2::zeros((h, w));
    let (un, vn) = {
        let (xn, yn, zn) = (0.950_47, 1.0, 1.088_83);
        let d = xn + 15.0 * yn + 3.0 * zn;
        (4.0 * xn / d, 9.0 * yn / d)
    };
    for y in 0..h {
        for x in 0..w {
            let p = patch.pixel(x, y);
            let [cx, cy, cz] = srgb_to_xyz([p[0] as f64, p[1] as f64, p[2] as f64]);
            let lum = if cy > 216.0 / 24389.0 { 116.0 * cy.cbrt() - 16.0 } else { 24389.0 / 27.0 * cy };
            let d = cx + 15.0 * cy + 3.0 * cz;
            let (up, vp) = if d > 1e-12 { (4.0 * cx / d, 9.0 * cy / d) } else { (un, vn) };
            let uu = 13.0 * lum * (up - un);
            let vv = 13.0 * lum * (vp - vn);
            l[[y, x]] = lum / 100.0;
            u[[y, x]] = (uu + 134.0) / 354.0;
            v[[y, x]] = (vv + 140.0) / 262.0;
        }
    }
    [l, u, v]
}

/// Gradient magnitude divided by its local box-filtered average.
fn normalized_gradient_magnitude(patch: &ImagePatch) -> Array2<f64> {
    let (w, h) = (patch.width(), patch.height());
    let mag = gradients(patch, w, h).magnitude.mapv(|v| v / 255.0);
    let mut out = Array2::zeros((h, w));
    let r = NORM_RADIUS as i64;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            let mut count = 0.0;
            for yy in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
                    acc += mag[[yy as usize, xx as usize]];
                    count += 1.0;
                }
            }
            let m = mag[[y as usize, x as usize]];
            out[[y as usize, x as usize]] = m / (acc / count + NORM_CONST);
        }
    }
    out
}
