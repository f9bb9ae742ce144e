//! Axis-aligned boxes, IoU and greedy non-maximum suppression.
//!
//! Boxes use continuous corner coordinates; area is `(x2 - x1) * (y2 - y1)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    /// Builds a box, swapping corners if needed so that `x1 <= x2`, `y1 <= y2`.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x1: x1.min(x2),
            y1: y1.min(y2),
            x2: x1.max(x2),
            y2: y1.max(y2),
        }
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        let (hw, hh) = (width.abs() / 2.0, height.abs() / 2.0);
        Self {
            x1: cx - hw,
            y1: cy - hh,
            x2: cx + hw,
            y2: cy + hh,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Intersection with `[0, width] x [0, height]`.
    pub fn clipped(&self, width: f64, height: f64) -> BBox {
        let x1 = self.x1.clamp(0.0, width);
        let y1 = self.y1.clamp(0.0, height);
        BBox {
            x1,
            y1,
            x2: self.x2.clamp(x1, width),
            y2: self.y2.clamp(y1, height),
        }
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Anything NMS can rank.
pub trait Scored {
    fn bbox(&self) -> BBox;
    fn confidence(&self) -> f64;
    fn category(&self) -> usize;
}

/// Greedy NMS returning indices into `dets`, in descending confidence order.
///
/// Ties in confidence keep the lower index first. A box is dropped when its
/// IoU with an already kept box exceeds `iou_threshold`; with `per_category`
/// only boxes of the same category suppress each other.
pub fn nms_indices<T: Scored>(dets: &[T], iou_threshold: f64, per_category: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence()
            .total_cmp(&dets[a].confidence())
            .then(a.cmp(&b))
    });

    let mut keep: Vec<usize> = Vec::new();
    for idx in order {
        let candidate = dets[idx].bbox();
        let suppressed = keep.iter().any(|&k| {
            (!per_category || dets[k].category() == dets[idx].category())
                && iou(&dets[k].bbox(), &candidate) > iou_threshold
        });
        if !suppressed {
            keep.push(idx);
        }
    }
    keep
}

pub fn nms<T: Scored + Clone>(dets: &[T], iou_threshold: f64, per_category: bool) -> Vec<T> {
    nms_indices(dets, iou_threshold, per_category)
        .into_iter()
        .map(|i| dets[i].clone())
        .collect()
}
