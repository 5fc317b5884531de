//! OTB-style sequence directories and synthetic test sequences.
//!
//! A sequence directory holds `img/0001.jpg` (or `.png`), `img/0002.jpg`, ...
//! and optionally `groundtruth_rect.txt` with one `x,y,w,h` row per frame.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::image::Frame;

pub const GROUNDTRUTH_FILE: &str = "groundtruth_rect.txt";
pub const IMAGE_DIR: &str = "img";

/// Frame paths of an OTB-layout sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub root: PathBuf,
    pub frames: Vec<PathBuf>,
}

impl Sequence {
    /// Collects `img/NNNN.{jpg,png}` starting at 0001; numbering must be contiguous.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let img = root.join(IMAGE_DIR);
        if !img.is_dir() {
            return Err(Error::Input(format!("{} has no {IMAGE_DIR}/ directory", root.display())));
        }
        let mut numbered = Vec::new();
        for entry in std::fs::read_dir(&img)? {
            let path = entry?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !matches!(ext.as_deref(), Some("jpg" | "jpeg" | "png")) {
                continue;
            }
            if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<usize>().ok()) {
                numbered.push((n, path));
            }
        }
        numbered.sort();
        if numbered.is_empty() {
            return Err(Error::Input(format!("no frames in {}", img.display())));
        }
        for (i, (n, path)) in numbered.iter().enumerate() {
            if *n != i + 1 {
                return Err(Error::Input(format!("expected frame {} but found {}", i + 1, path.display())));
            }
        }
        Ok(Self { root, frames: numbered.into_iter().map(|(_, p)| p).collect() })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Loads frame `index` (0-based).
    pub fn load_frame(&self, index: usize) -> Result<Frame> {
        let path = self.frames.get(index).ok_or_else(|| Error::Input(format!("frame {} out of range", index + 1)))?;
        Frame::load(path)
    }

    /// Lazily loads every frame in order.
    pub fn iter_frames(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        self.frames.iter().map(Frame::load)
    }

    pub fn groundtruth_path(&self) -> PathBuf {
        self.root.join(GROUNDTRUTH_FILE)
    }

    pub fn groundtruth(&self) -> Result<Vec<BoundingBox>> {
        read_groundtruth(self.groundtruth_path())
    }
}

/// Parses one box per non-empty line; fields separated by commas, tabs or spaces.
pub fn parse_groundtruth(text: &str) -> Result<Vec<BoundingBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, line)| parse_box(line).map_err(|e| Error::Input(format!("line {}: {e}", no + 1))))
        .collect()
}

/// Parses `x,y,w,h` (commas, tabs or spaces).
pub fn parse_box(text: &str) -> std::result::Result<BoundingBox, String> {
    let fields: Vec<&str> = text.split([',', '\t', ' ']).map(str::trim).filter(|f| !f.is_empty()).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 values, found {}", fields.len()));
    }
    let mut v = [0.0; 4];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = f.parse::<f64>().map_err(|_| format!("invalid number {f:?}"))?;
        if !slot.is_finite() {
            return Err(format!("non-finite value {f:?}"));
        }
    }
    Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
}

pub fn read_groundtruth(path: impl AsRef<Path>) -> Result<Vec<BoundingBox>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Resource {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_groundtruth(&text)
}

pub fn write_groundtruth(path: impl AsRef<Path>, boxes: &[BoundingBox]) -> Result<()> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format!("{},{},{},{}\n", b.x, b.y, b.w, b.h));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Circular motion at about 3 px per frame.
    Translate,
    /// Centered target growing 2% per frame.
    Zoom,
    /// Slow drift with the target replaced by noise in frames 40 to 60.
    Occlude,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Translate, Scenario::Zoom, Scenario::Occlude];

    /// Frame count used when none is given. Zoom uses 31 frames so the last
    /// one is 30 growth steps from the first.
    pub fn default_frames(self) -> usize {
        match self {
            Scenario::Translate | Scenario::Occlude => 100,
            Scenario::Zoom => 31,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Translate => "translate",
            Scenario::Zoom => "zoom",
            Scenario::Occlude => "occlude",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translate" => Ok(Scenario::Translate),
            "zoom" => Ok(Scenario::Zoom),
            "occlude" => Ok(Scenario::Occlude),
            _ => Err(Error::Input(format!("unknown scenario {s:?} (expected translate, zoom or occlude)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub scenario: Scenario,
    pub frames: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub target_size: f64,
    /// 1-based inclusive frame range during which the target is hidden
    /// (occlude scenario only).
    pub occlusion: (usize, usize),
}

impl SynthParams {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            frames: scenario.default_frames(),
            seed: 42,
            width: 320,
            height: 240,
            target_size: 40.0,
            occlusion: (40, 60),
        }
    }

    pub fn is_occluded(&self, frame: usize) -> bool {
        self.scenario == Scenario::Occlude && (self.occlusion.0..=self.occlusion.1).contains(&frame)
    }

    /// Ground-truth box of 1-based frame `k`.
    pub fn box_at(&self, k: usize) -> BoundingBox {
        let t = (k - 1) as f64;
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        let s = self.target_size;
        match self.scenario {
            Scenario::Translate => {
                let radius = 80.0;
                let omega = 3.0 / radius;
                let c = (cx - 40.0 + radius * (omega * t).cos(), cy + radius * (omega * t).sin());
                BoundingBox::from_center(c, (s, s))
            }
            Scenario::Zoom => {
                let side = s * 1.02f64.powf(t);
                BoundingBox::from_center((cx, cy), (side, side))
            }
            Scenario::Occlude => BoundingBox::from_center((cx - 60.0 + 0.6 * t, cy - 20.0 + 0.3 * t), (s, s)),
        }
    }
}

/// Frames, exact ground truth and occlusion flags of a synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub params: SynthParams,
    pub frames: Vec<Frame>,
    pub groundtruth: Vec<BoundingBox>,
    pub occluded: Vec<bool>,
}

/// Smooth random field sampled on a `gx × gy` lattice and bilinearly interpolated.
struct SmoothField {
    gx: usize,
    gy: usize,
    values: Vec<[f64; 3]>,
}

impl SmoothField {
    fn new(rng: &mut ChaCha8Rng, gx: usize, gy: usize) -> Self {
        let values = (0..gx * gy).map(|_| [(); 3].map(|_| rng.gen_range(0.0..255.0))).collect();
        Self { gx, gy, values }
    }

    /// `u, v` in `[0, 1]`.
    fn at(&self, u: f64, v: f64) -> [f64; 3] {
        let (fu, fv) = (u.clamp(0.0, 1.0) * (self.gx - 1) as f64, v.clamp(0.0, 1.0) * (self.gy - 1) as f64);
        let (i, j) = ((fu as usize).min(self.gx - 2), (fv as usize).min(self.gy - 2));
        let (a, b) = (fu - i as f64, fv - j as f64);
        let p = |ii: usize, jj: usize| self.values[jj * self.gx + ii];
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let top = p(i, j)[c] * (1.0 - a) + p(i + 1, j)[c] * a;
            let bot = p(i, j + 1)[c] * (1.0 - a) + p(i + 1, j + 1)[c] * a;
            *o = top * (1.0 - b) + bot * b;
        }
        out
    }
}

/// Lattice size of the target texture.
const TEXTURE_CELLS: usize = 7;

/// Renders a smoothly textured square over iid pixel noise that is redrawn
/// every frame, so only the target is consistent over time. An occluded target
/// is covered by the same noise and vanishes into the background. The target
/// texture is defined in box-normalized
/// coordinates and looks the same at every scale. Pixel values are integral,
/// so PNG round trips are exact.
pub fn synthesize(params: &SynthParams) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let texture = SmoothField::new(&mut rng, TEXTURE_CELLS, TEXTURE_CELLS);
    let (w, h) = (params.width, params.height);
    let mut frames = Vec::with_capacity(params.frames);
    let mut groundtruth = Vec::with_capacity(params.frames);
    let mut occluded = Vec::with_capacity(params.frames);
    for k in 1..=params.frames {
        let b = params.box_at(k);
        let hidden = params.is_occluded(k);
        let frame = Frame::from_fn(w, h, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = px >= b.x && px < b.x + b.w && py >= b.y && py < b.y + b.h;
            let rgb = if inside && !hidden {
                texture.at((px - b.x) / b.w, (py - b.y) / b.h)
            } else {
                [(); 3].map(|_| rng.gen_range(0.0..256.0f64).floor())
            };
            rgb.map(|v| v.round().clamp(0.0, 255.0) as f32)
        });
        frames.push(frame);
        groundtruth.push(b);
        occluded.push(hidden);
    }
    SyntheticSequence { params: *params, frames, groundtruth, occluded }
}

impl SyntheticSequence {
    /// Writes `img/NNNN.png` and the ground-truth file under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let img = dir.join(IMAGE_DIR);
        std::fs::create_dir_all(&img)?;
        for (i, f) in self.frames.iter().enumerate() {
            f.save(img.join(format!("{:04}.png", i + 1)))?;
        }
        write_groundtruth(dir.join(GROUNDTRUTH_FILE), &self.groundtruth)
    }
}
