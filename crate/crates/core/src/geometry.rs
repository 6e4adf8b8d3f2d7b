//! Axis-aligned bounding boxes and intersection over union.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in `(x, y, w, h)` form with a top-left origin.
///
/// `x`/`y` locate the top-left corner; `w`/`h` must be strictly positive.
/// Corner form is derived on demand via [`BoundingBox::right`] and
/// [`BoundingBox::bottom`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite coordinates and non-positive extents.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::input(format!(
                "box coordinates must be finite, got ({x}, {y}, {w}, {h})"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::input(format!(
                "box extents must be positive, got w={w}, h={h}"
            )));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Clamps the box to `[0, width] x [0, height]`.
    ///
    /// Returns `None` when nothing of the box remains inside the image.
    pub fn clamped_to(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let x1 = self.x.max(0.0);
        let y1 = self.y.max(0.0);
        let x2 = self.right().min(width);
        let y2 = self.bottom().min(height);
        if x2 - x1 <= 0.0 || y2 - y1 <= 0.0 {
            return None;
        }
        Some(BoundingBox {
            x: x1,
            y: y1,
            w: x2 - x1,
            h: y2 - y1,
        })
    }

    /// Intersection area with another box; zero when disjoint.
    pub fn intersection(&self, other: &BoundingBox) -> f64 {
        let ix = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let iy = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        ix * iy
    }

    /// Intersection over union with another box.
    ///
    /// Areas are derived from corner coordinates so that identical boxes
    /// score exactly 1 regardless of rounding in `x + w`. Valid boxes have
    /// positive area, so the union never vanishes.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other);
        let area_a = (self.right() - self.x) * (self.bottom() - self.y);
        let area_b = (other.right() - other.x) * (other.bottom() - other.y);
        inter / (area_a + area_b - inter)
    }
}

/// Free-function form of [`BoundingBox::iou`].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}
