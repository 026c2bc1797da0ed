use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates: top-left corner plus width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn x1(&self) -> f64 {
        self.x + self.w
    }

    pub fn y1(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Area from the edge coordinates, computed the same way as the intersection so
    /// that a box intersected with itself gives back exactly this value.
    fn edge_area(&self) -> f64 {
        (self.x1() - self.x).max(0.0) * (self.y1() - self.y).max(0.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.x1().min(other.x1()) - self.x.max(other.x)).max(0.0);
        let ih = (self.y1().min(other.y1()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }

    /// Fraction of `self` covered by `other`; 0 for an empty box.
    pub fn covered_by(&self, other: &BBox) -> f64 {
        let a = self.edge_area();
        if a <= 0.0 {
            0.0
        } else {
            self.intersection_area(other) / a
        }
    }

    /// Clamp into `[0, width] x [0, height]`, keeping the box non-negative in size.
    pub fn clamp_to(&self, width: f64, height: f64) -> BBox {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.x1().clamp(0.0, width);
        let y1 = self.y1().clamp(0.0, height);
        BBox::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }

    /// Centre / area / aspect parameterisation used by the Kalman tracker.
    pub fn to_center_scale(&self) -> [f64; 4] {
        let (u, v) = self.center();
        let s = self.w * self.h;
        let r = if self.h > 0.0 { self.w / self.h } else { 1.0 };
        [u, v, s, r]
    }

    pub fn from_center_scale(u: f64, v: f64, s: f64, r: f64) -> BBox {
        let s = s.max(0.0);
        let r = r.max(f64::EPSILON);
        let w = (s * r).sqrt();
        let h = if w > 0.0 { s / w } else { 0.0 };
        BBox::new(u - w / 2.0, v - h / 2.0, w, h)
    }
}

/// Intersection over union of two boxes; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.edge_area() + b.edge_area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}
