/// Axis-aligned box in frame pixels: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(center: (f64, f64), size: (f64, f64)) -> Self {
        Self::new(center.0 - size.0 / 2.0, center.1 - size.1 / 2.0, size.0, size.1)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn size(&self) -> (f64, f64) {
        (self.w, self.h)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    /// All-zero boxes mark frames without a ground-truth annotation.
    pub fn is_absent(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.w == 0.0 && self.h == 0.0
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let ih = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Intersection over union; 0 for disjoint or empty boxes.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).min(1.0)
        }
    }

    /// Moves the box inside `frame = (width, height)`, shrinking it only when it
    /// is larger than the frame.
    pub fn shifted_inside(&self, frame: (usize, usize)) -> BoundingBox {
        let (fw, fh) = (frame.0 as f64, frame.1 as f64);
        let w = self.w.min(fw);
        let h = self.h.min(fh);
        BoundingBox::new(self.x.clamp(0.0, fw - w), self.y.clamp(0.0, fh - h), w, h)
    }

    /// Intersection with the frame rectangle. Returns `None` when nothing is left.
    pub fn clipped(&self, frame: (usize, usize)) -> Option<BoundingBox> {
        let (fw, fh) = (frame.0 as f64, frame.1 as f64);
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(fw);
        let y1 = (self.y + self.h).min(fh);
        (x1 > x0 && y1 > y0).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn inside(&self, frame: (usize, usize)) -> bool {
        let eps = 1e-9;
        self.x >= -eps && self.y >= -eps && self.x + self.w <= frame.0 as f64 + eps && self.y + self.h <= frame.1 as f64 + eps
    }
}

/// Standalone form of [`BoundingBox::iou`].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}
