//! Pixel coordinates and inclusive-corner bounding boxes.
//!
//! Boxes are stored as `(x0, y0, x1, y1)` with **inclusive** corners: a
//! single-pixel box has `x0 == x1` and `y0 == y1`, covers exactly one
//! pixel, and has area 1. All derived measures (area, center, covering
//! span) follow that convention so a box of `n` pixels never collapses to
//! zero extent.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An (x, y) pixel position; `x` grows rightwards, `y` downwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub x: u32,
    pub y: u32,
}

impl PixelCoord {
    pub fn new(x: u32, y: u32) -> Self {
        PixelCoord { x, y }
    }
}

/// Axis-aligned box with inclusive corners, `x0 <= x1` and `y0 <= y1`.
///
/// The invariant is enforced at construction and on deserialization, so a
/// held value is always well-formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl BoundingBox {
    /// Builds a box, rejecting inverted corners.
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::validation(format!(
                "degenerate box: ({x0},{y0},{x1},{y1}) has inverted corners"
            )));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    /// Tight box around a non-empty set of pixels.
    pub fn around<'a, I: IntoIterator<Item = &'a PixelCoord>>(pixels: I) -> Result<Self> {
        let mut it = pixels.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::validation("cannot bound an empty pixel set"))?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn x0(&self) -> u32 {
        self.x0
    }
    pub fn y0(&self) -> u32 {
        self.y0
    }
    pub fn x1(&self) -> u32 {
        self.x1
    }
    pub fn y1(&self) -> u32 {
        self.y1
    }

    /// Pixel count along x (inclusive corners, so at least 1).
    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    /// Pixel count along y (inclusive corners, so at least 1).
    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    /// Pixel area, `width * height`; at least 1.
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Box center in pixel-center coordinates (may land on half-pixels).
    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.x0) + f64::from(self.x1)) / 2.0,
            (f64::from(self.y0) + f64::from(self.y1)) / 2.0,
        )
    }

    /// Pixel area of the overlap, 0 when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        if x0 > x1 || y0 > y1 {
            return 0;
        }
        u64::from(x1 - x0 + 1) * u64::from(y1 - y0 + 1)
    }

    /// Smallest box containing both operands.
    pub fn covering(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// True when the box fits inside a `width` x `height` image.
    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x1 < width && self.y1 < height
    }

    /// Corners as an `[x0, y0, x1, y1]` array (the wire format).
    pub fn corners(&self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.corners().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[u32; 4]>::deserialize(deserializer)?;
        BoundingBox::new(x0, y0, x1, y1).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_box_has_unit_extent() {
        let b = BoundingBox::new(3, 7, 3, 7).unwrap();
        assert_eq!(b.width(), 1);
        assert_eq!(b.height(), 1);
        assert_eq!(b.area(), 1);
        assert_eq!(b.center(), (3.0, 7.0));
    }

    #[test]
    fn inverted_corners_are_rejected() {
        assert!(BoundingBox::new(5, 0, 4, 0).is_err());
        assert!(BoundingBox::new(0, 5, 0, 4).is_err());
    }

    #[test]
    fn area_and_center_use_inclusive_corners() {
        let b = BoundingBox::new(0, 0, 9, 4).unwrap();
        assert_eq!(b.area(), 50);
        assert_eq!(b.center(), (4.5, 2.0));
    }

    #[test]
    fn intersection_of_disjoint_boxes_is_zero() {
        let a = BoundingBox::new(0, 0, 2, 2).unwrap();
        let b = BoundingBox::new(4, 4, 6, 6).unwrap();
        assert_eq!(a.intersection_area(&b), 0);
        assert_eq!(a.covering(&b).corners(), [0, 0, 6, 6]);
    }

    #[test]
    fn intersection_counts_shared_pixels() {
        // Boxes sharing exactly one corner pixel still intersect.
        let a = BoundingBox::new(0, 0, 3, 3).unwrap();
        let b = BoundingBox::new(3, 3, 5, 5).unwrap();
        assert_eq!(a.intersection_area(&b), 1);
    }

    #[test]
    fn tight_box_around_pixels() {
        let pixels = [
            PixelCoord::new(4, 9),
            PixelCoord::new(2, 11),
            PixelCoord::new(7, 10),
        ];
        let b = BoundingBox::around(pixels.iter()).unwrap();
        assert_eq!(b.corners(), [2, 9, 7, 11]);
        assert!(BoundingBox::around([].iter()).is_err());
    }

    #[test]
    fn serde_round_trips_as_corner_array() {
        let b = BoundingBox::new(1, 2, 3, 4).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "[1,2,3,4]");
        let back: BoundingBox = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
        // Inverted corners must fail during deserialization, not later.
        assert!(serde_json::from_str::<BoundingBox>("[3,0,1,0]").is_err());
    }
}
