//! Re-detection: IOU-labeled sampling around confident estimates, an
//! incremental SVM on detector features, and sliding-window proposals.

pub mod svm;

use rand::Rng;
use rayon::prelude::*;

pub use svm::{IncrementalSvm, KktReport, MarginSet, SvmKernel, SvmSample};

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::features::extract_detector_features;
use crate::image::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: f64,
    pub source_box: BoundingBox,
}

/// `+1` when IOU ≥ `delta_p`, `−1` when IOU < `delta_n`, otherwise excluded.
pub fn label_box(candidate: &BoundingBox, target: &BoundingBox, delta_p: f64, delta_n: f64) -> Option<f64> {
    let overlap = candidate.iou(target);
    if overlap >= delta_p {
        Some(1.0)
    } else if overlap < delta_n {
        Some(-1.0)
    } else {
        None
    }
}

/// Labels candidates against the target; boxes in the ambiguous band are dropped.
pub fn label_samples(
    frame: &Frame,
    candidates: &[BoundingBox],
    target: &BoundingBox,
    delta_p: f64,
    delta_n: f64,
) -> Result<Vec<LabeledSample>> {
    if delta_n >= delta_p {
        return Err(Error::Config(format!("delta_n {delta_n} must be below delta_p {delta_p}")));
    }
    candidates
        .iter()
        .filter_map(|b| label_box(b, target, delta_p, delta_n).map(|label| (b, label)))
        .map(|(b, label)| {
            Ok(LabeledSample { features: window_features(frame, b)?, label, source_box: *b })
        })
        .collect()
}

/// L2-normalized detector features of the window under `b`.
pub fn window_features(frame: &Frame, b: &BoundingBox) -> Result<Vec<f64>> {
    let w = b.w.round().max(1.0) as usize;
    let h = b.h.round().max(1.0) as usize;
    let patch = frame.sample(b.center(), (b.w, b.h), (w, h));
    let mut f = extract_detector_features(&patch)?;
    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        f.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingParams {
    /// Largest positive jitter in pixels.
    pub jitter: f64,
    pub negative_ratio: usize,
    /// Negatives are drawn from a region this many target sizes wide and tall.
    pub negative_region: f64,
    pub delta_p: f64,
    pub delta_n: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { jitter: 2.0, negative_ratio: 3, negative_region: 4.0, delta_p: 0.9, delta_n: 0.3 }
    }
}

/// Positive candidates are the target plus its 8 neighbours at `±jitter`
/// pixels; the jitter shrinks until every shifted copy keeps IOU ≥ `delta_p`.
/// Negatives are uniform in the negative region with IOU < `delta_n`, three
/// per positive. All boxes are shifted inside the frame.
pub fn generate_training_boxes(
    target: &BoundingBox,
    frame_size: (usize, usize),
    params: &SamplingParams,
    rng: &mut impl Rng,
) -> Result<Vec<BoundingBox>> {
    if !target.is_valid() {
        return Err(Error::DegenerateInput(format!("invalid target box {target:?}")));
    }
    if target.w > frame_size.0 as f64 || target.h > frame_size.1 as f64 {
        return Err(Error::DegenerateInput(format!("target {target:?} is larger than the frame {frame_size:?}")));
    }
    let target = target.shifted_inside(frame_size);
    let mut jitter = params.jitter;
    while jitter > 1e-3 && target.iou(&BoundingBox::new(target.x + jitter, target.y + jitter, target.w, target.h)) < params.delta_p {
        jitter /= 2.0;
    }
    let mut boxes = vec![target];
    for dy in [-1.0, 0.0, 1.0] {
        for dx in [-1.0, 0.0, 1.0] {
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let b = BoundingBox::new(target.x + dx * jitter, target.y + dy * jitter, target.w, target.h).shifted_inside(frame_size);
            boxes.push(if b.iou(&target) >= params.delta_p { b } else { target });
        }
    }
    let wanted = boxes.len() * params.negative_ratio;
    let (cx, cy) = target.center();
    let (rw, rh) = (target.w * params.negative_region, target.h * params.negative_region);
    let mut negatives = 0;
    let mut attempts = 0;
    while negatives < wanted && attempts < wanted * 500 {
        attempts += 1;
        // Fall back to the whole frame when the local region is too crowded.
        let (x, y) = if attempts < wanted * 250 {
            (
                rng.gen_range(cx - rw / 2.0..=cx + rw / 2.0 - target.w),
                rng.gen_range(cy - rh / 2.0..=cy + rh / 2.0 - target.h),
            )
        } else {
            (
                rng.gen_range(0.0..=frame_size.0 as f64 - target.w),
                rng.gen_range(0.0..=frame_size.1 as f64 - target.h),
            )
        };
        let b = BoundingBox::new(x, y, target.w, target.h).shifted_inside(frame_size);
        if b.iou(&target) < params.delta_n {
            boxes.push(b);
            negatives += 1;
        }
    }
    if negatives < wanted {
        log::warn!("only {negatives} of {wanted} negative samples fit in the frame");
    }
    Ok(boxes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalParams {
    pub count: usize,
    /// Search region side, in target sizes.
    pub search_region: f64,
    pub nms_iou: f64,
}

impl Default for ProposalParams {
    fn default() -> Self {
        Self { count: 5, search_region: 6.0, nms_iou: 0.5 }
    }
}

/// Greedy non-maximum suppression over score-sorted boxes.
pub fn non_maximum_suppression(mut scored: Vec<(BoundingBox, f64)>, max_iou: f64, limit: usize) -> Vec<(BoundingBox, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<(BoundingBox, f64)> = Vec::new();
    for (b, s) in scored {
        if kept.len() >= limit {
            break;
        }
        if kept.iter().all(|(k, _)| k.iou(&b) <= max_iou) {
            kept.push((b, s));
        }
    }
    kept
}

/// Sliding-window detector built on the incremental SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct Redetector {
    pub svm: IncrementalSvm,
    pub sampling: SamplingParams,
    pub proposals: ProposalParams,
    pub max_support_vectors: usize,
}

impl Redetector {
    pub fn new(c: f64, sigma: f64, sampling: SamplingParams, proposals: ProposalParams, max_support_vectors: usize) -> Result<Self> {
        Ok(Self {
            svm: IncrementalSvm::new(c, SvmKernel::Gaussian { sigma })?,
            sampling,
            proposals,
            max_support_vectors,
        })
    }

    pub fn is_trained(&self) -> bool {
        !self.svm.is_empty()
    }

    /// Samples around `target`, labels them and feeds them to the SVM one by one.
    pub fn train(&mut self, frame: &Frame, target: &BoundingBox, rng: &mut impl Rng) -> Result<usize> {
        let boxes = generate_training_boxes(target, frame.size(), &self.sampling, rng)?;
        let samples = label_samples(frame, &boxes, target, self.sampling.delta_p, self.sampling.delta_n)?;
        let n = samples.len();
        for s in samples {
            self.svm.increment(s.features, s.label)?;
        }
        self.svm.prune_reserve(self.max_support_vectors);
        self.svm.maintain_budget(self.max_support_vectors)?;
        Ok(n)
    }

    pub fn score_box(&self, frame: &Frame, b: &BoundingBox) -> Result<f64> {
        self.svm.score(&window_features(frame, b)?)
    }

    /// Top proposals in the search region around `center`, best first.
    pub fn propose(&self, frame: &Frame, center: (f64, f64), target_size: (f64, f64)) -> Result<Vec<(BoundingBox, f64)>> {
        if !self.is_trained() {
            return Err(Error::NoModel);
        }
        let (tw, th) = (target_size.0.min(frame.width() as f64), target_size.1.min(frame.height() as f64));
        let region = BoundingBox::from_center(center, (tw * self.proposals.search_region, th * self.proposals.search_region))
            .clipped(frame.size())
            .ok_or_else(|| Error::Input("search region lies outside the frame".into()))?;
        let stride = (tw / 10.0).max(2.0);
        let positions = |start: f64, extent: f64, size: f64| -> Vec<f64> {
            let span = (extent - size).max(0.0);
            let steps = (span / stride).floor() as usize;
            (0..=steps).map(|i| start + i as f64 * stride).collect()
        };
        let xs = positions(region.x, region.w, tw);
        let ys = positions(region.y, region.h, th);
        let windows: Vec<BoundingBox> = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| BoundingBox::new(x, y, tw, th)))
            .map(|b| b.shifted_inside(frame.size()))
            .collect();
        let scored = windows
            .par_iter()
            .map(|b| Ok((*b, self.score_box(frame, b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(non_maximum_suppression(scored, self.proposals.nms_iou, self.proposals.count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn textured_frame() -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let coarse: Vec<[f32; 3]> = (0..50 * 40).map(|_| [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)]).collect();
        Frame::from_fn(200, 160, |x, y| coarse[(y / 4) * 50 + x / 4])
    }

    #[test]
    fn labels_follow_iou_band() {
        let t = BoundingBox::new(0.0, 0.0, 100.0, 100.0);
        // IOU 0.95
        let near = BoundingBox::new(0.0, 0.0, 100.0, 95.0);
        assert_eq!(label_box(&near, &t, 0.9, 0.3), Some(1.0));
        // IOU 0.5
        let mid = BoundingBox::new(0.0, 0.0, 100.0, 50.0);
        assert_eq!(label_box(&mid, &t, 0.9, 0.3), None);
        // IOU 0.1
        let far = BoundingBox::new(0.0, 0.0, 100.0, 10.0);
        assert_eq!(label_box(&far, &t, 0.9, 0.3), Some(-1.0));
    }

    #[test]
    fn raising_delta_n_never_creates_positives() {
        let t = BoundingBox::new(10.0, 10.0, 40.0, 40.0);
        for k in 0..60 {
            let b = BoundingBox::new(10.0 + k as f64, 10.0, 40.0, 40.0);
            for (lo, hi) in [(0.1, 0.2), (0.2, 0.5), (0.3, 0.8)] {
                if label_box(&b, &t, 0.9, lo) == Some(-1.0) {
                    assert_eq!(label_box(&b, &t, 0.9, hi), Some(-1.0));
                }
            }
        }
    }

    #[test]
    fn training_boxes_respect_ratio_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = BoundingBox::new(60.0, 50.0, 32.0, 32.0);
        let p = SamplingParams::default();
        let boxes = generate_training_boxes(&t, (200, 160), &p, &mut rng).unwrap();
        let pos = boxes.iter().filter(|b| b.iou(&t) >= p.delta_p).count();
        let neg = boxes.iter().filter(|b| b.iou(&t) < p.delta_n).count();
        assert_eq!(pos, 9);
        assert_eq!(neg, 27);
        assert_eq!(boxes.len(), 36);
        assert!(boxes.iter().all(|b| b.inside((200, 160))));
    }

    #[test]
    fn oversized_target_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = BoundingBox::new(0.0, 0.0, 300.0, 20.0);
        assert!(generate_training_boxes(&t, (200, 160), &SamplingParams::default(), &mut rng).is_err());
    }

    #[test]
    fn nms_postconditions() {
        let scored = vec![
            (BoundingBox::new(0.0, 0.0, 10.0, 10.0), 0.9),
            (BoundingBox::new(1.0, 0.0, 10.0, 10.0), 0.8),
            (BoundingBox::new(30.0, 0.0, 10.0, 10.0), 0.7),
            (BoundingBox::new(60.0, 0.0, 10.0, 10.0), 0.95),
        ];
        let kept = non_maximum_suppression(scored, 0.5, 5);
        assert_eq!(kept.len(), 3);
        assert!(kept.windows(2).all(|w| w[0].1 >= w[1].1));
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                assert!(kept[i].0.iou(&kept[j].0) <= 0.5);
            }
        }
    }

    #[test]
    fn untrained_detector_cannot_propose() {
        let d = Redetector::new(2.0, 0.5, SamplingParams::default(), ProposalParams::default(), 200).unwrap();
        assert!(matches!(d.propose(&textured_frame(), (100.0, 80.0), (32.0, 32.0)), Err(Error::NoModel)));
    }

    #[test]
    fn trained_detector_scores_its_target_highest() {
        let frame = textured_frame();
        let t = BoundingBox::new(80.0, 60.0, 32.0, 32.0);
        let mut d = Redetector::new(2.0, 0.5, SamplingParams::default(), ProposalParams::default(), 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(d.train(&frame, &t, &mut rng).unwrap(), 36);
        let props = d.propose(&frame, t.center(), (32.0, 32.0)).unwrap();
        assert!(!props.is_empty() && props.len() <= 5);
        assert!(props.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(props[0].0.iou(&t) > 0.8, "{:?}", props[0]);
        let r = d.svm.kkt_report();
        assert!(r.max_violation < 1e-6 && r.equality_residual < 1e-6);
    }
}
