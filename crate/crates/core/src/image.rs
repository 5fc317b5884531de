//! RGB frames and patches sampled from them.
//!
//! Pixel values are stored as `f32` in `[0, 255]`, interleaved RGB, row-major.
//! Coordinates follow the continuous convention where pixel `(x, y)` covers
//! `[x, x + 1) × [y, y + 1)`, so a box `(x, y, w, h)` has center
//! `(x + w / 2, y + h / 2)`.

use std::path::Path;

use crate::error::{Error, Result};

/// A full RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DegenerateInput(format!("image size {width}x{height}")));
        }
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {width}x{height} RGB image, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        assert!(width > 0 && height > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Resource {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.into_raw().into_iter().map(f32::from).collect();
        Self::new(w as usize, h as usize, data)
    }

    /// Writes the image as 8-bit RGB; the format follows the file extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u8> = self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions");
        buf.save(path).map_err(|e| Error::Resource {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn pixel_clamped(&self, x: i64, y: i64) -> [f32; 3] {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixel(x, y)
    }

    /// Integer crop; parts outside the frame replicate the nearest edge pixel.
    pub fn crop(&self, x: i64, y: i64, width: usize, height: usize) -> ImagePatch {
        let image = Frame::from_fn(width, height, |i, j| self.pixel_clamped(x + i as i64, y + j as i64));
        ImagePatch { image, origin: (x as f64, y as f64) }
    }

    /// Bilinearly samples the `source_size` region centered at `center` onto an
    /// `out_size` grid. Sampling outside the frame replicates edge pixels.
    pub fn sample(&self, center: (f64, f64), source_size: (f64, f64), out_size: (usize, usize)) -> ImagePatch {
        let (out_w, out_h) = out_size;
        assert!(out_w > 0 && out_h > 0, "output size must be non-empty");
        let x0 = center.0 - source_size.0 / 2.0;
        let y0 = center.1 - source_size.1 / 2.0;
        let sx = source_size.0 / out_w as f64;
        let sy = source_size.1 / out_h as f64;
        let image = Frame::from_fn(out_w, out_h, |i, j| {
            let u = x0 + (i as f64 + 0.5) * sx - 0.5;
            let v = y0 + (j as f64 + 0.5) * sy - 0.5;
            self.bilinear(u, v)
        });
        ImagePatch { image, origin: (x0, y0) }
    }

    /// Bilinear interpolation at index-space coordinates (pixel centers at integers).
    pub fn bilinear(&self, u: f64, v: f64) -> [f32; 3] {
        let fx = u.floor();
        let fy = v.floor();
        let ax = (u - fx) as f32;
        let ay = (v - fy) as f32;
        let (x, y) = (fx as i64, fy as i64);
        if ax == 0.0 && ay == 0.0 {
            return self.pixel_clamped(x, y);
        }
        let p00 = self.pixel_clamped(x, y);
        let p10 = self.pixel_clamped(x + 1, y);
        let p01 = self.pixel_clamped(x, y + 1);
        let p11 = self.pixel_clamped(x + 1, y + 1);
        let mut out = [0.0f32; 3];
        for c in 0..3 {
            let top = p00[c] + (p10[c] - p00[c]) * ax;
            let bottom = p01[c] + (p11[c] - p01[c]) * ax;
            out[c] = top + (bottom - top) * ay;
        }
        out
    }

    /// Whole-image bilinear resize.
    pub fn resized(&self, width: usize, height: usize) -> Frame {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let c = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        self.sample(c, (self.width as f64, self.height as f64), (width, height)).image
    }
}

/// A rectangular piece of a frame together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub image: Frame,
    /// Top-left corner of the sampled region in source-frame coordinates.
    pub origin: (f64, f64),
}

impl ImagePatch {
    pub fn from_image(image: Frame) -> Self {
        Self { image, origin: (0.0, 0.0) }
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        self.image.pixel(x, y)
    }

    pub fn resized(&self, width: usize, height: usize) -> ImagePatch {
        ImagePatch { image: self.image.resized(width, height), origin: self.origin }
    }

    pub fn is_grayscale(&self) -> bool {
        self.image.data.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }
}
