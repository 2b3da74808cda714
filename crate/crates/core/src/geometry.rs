//! Axis-aligned ROI rectangles on the pixel grid.
//!
//! An ROI covers the half-open pixel range `[x, x+width) x [y, y+height)`,
//! so two tiles that share an edge do not share pixels.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tags::TagId;

/// A player-drawn rectangle with its selected tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roi {
    x: i64,
    y: i64,
    width: u32,
    height: u32,
    tags: BTreeSet<TagId>,
}

impl Roi {
    /// Builds an ROI, rejecting degenerate rectangles. Zero-area ROIs are
    /// invalid because match ratios divide by the area.
    pub fn new(
        x: i64,
        y: i64,
        width: u32,
        height: u32,
        tags: impl IntoIterator<Item = TagId>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRoi {
                width: i64::from(width),
                height: i64::from(height),
            });
        }
        Ok(Self {
            x,
            y,
            width,
            height,
            tags: tags.into_iter().collect(),
        })
    }

    pub fn x(&self) -> i64 {
        self.x
    }

    pub fn y(&self) -> i64 {
        self.y
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn tags(&self) -> &BTreeSet<TagId> {
        &self.tags
    }

    /// Surface area in pixels, always positive.
    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    /// Pixel count shared with `other`; zero when disjoint, symmetric in
    /// its arguments.
    pub fn intersection_area(&self, other: &Roi) -> u64 {
        let left = self.x.max(other.x);
        let right = (self.x + i64::from(self.width)).min(other.x + i64::from(other.width));
        let top = self.y.max(other.y);
        let bottom = (self.y + i64::from(self.height)).min(other.y + i64::from(other.height));
        let w = (right - left).max(0) as u64;
        let h = (bottom - top).max(0) as u64;
        w * h
    }

    /// Clips the rectangle to `[0, image_w) x [0, image_h)`. Returns `None`
    /// when nothing remains inside the image, `(roi, true)` when clipping
    /// changed the rectangle.
    pub fn clamp_to(&self, image_w: u32, image_h: u32) -> Option<(Roi, bool)> {
        let left = self.x.max(0);
        let top = self.y.max(0);
        let right = (self.x + i64::from(self.width)).min(i64::from(image_w));
        let bottom = (self.y + i64::from(self.height)).min(i64::from(image_h));
        if right <= left || bottom <= top {
            return None;
        }
        let clamped = Roi {
            x: left,
            y: top,
            width: (right - left) as u32,
            height: (bottom - top) as u32,
            tags: self.tags.clone(),
        };
        let changed = clamped.x != self.x
            || clamped.y != self.y
            || clamped.width != self.width
            || clamped.height != self.height;
        Some((clamped, changed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roi(x: i64, y: i64, w: u32, h: u32) -> Roi {
        Roi::new(x, y, w, h, []).unwrap()
    }

    /// Counts pixels of a 64x64 grid covered by both rectangles.
    fn brute_intersection(a: &Roi, b: &Roi) -> u64 {
        let inside = |r: &Roi, px: i64, py: i64| {
            px >= r.x && px < r.x + i64::from(r.width) && py >= r.y && py < r.y + i64::from(r.height)
        };
        let mut count = 0;
        for px in 0..64 {
            for py in 0..64 {
                if inside(a, px, py) && inside(b, px, py) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn area_is_width_times_height() {
        assert_eq!(roi(0, 0, 10, 10).area(), 100);
        assert_eq!(roi(103, 121, 78, 56).area(), 4368);
        assert_eq!(roi(5, 5, 1, 1).area(), 1);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(Roi::new(0, 0, 0, 10, []).is_err());
        assert!(Roi::new(0, 0, 10, 0, []).is_err());
    }

    #[test]
    fn intersection_basics() {
        let a = roi(0, 0, 10, 10);
        assert_eq!(a.intersection_area(&a), 100);
        assert_eq!(a.intersection_area(&roi(20, 20, 5, 5)), 0);
        assert_eq!(a.intersection_area(&roi(5, 0, 10, 10)), 50);
    }

    #[test]
    fn adjacent_tiles_share_no_pixels() {
        assert_eq!(roi(0, 0, 10, 10).intersection_area(&roi(10, 0, 10, 10)), 0);
    }

    #[test]
    fn clamp_to_image_bounds() {
        let r = Roi::new(-5, -5, 20, 20, []).unwrap();
        let (c, changed) = r.clamp_to(100, 100).unwrap();
        assert!(changed);
        assert_eq!((c.x(), c.y(), c.width(), c.height()), (0, 0, 15, 15));

        let inside = roi(10, 10, 5, 5);
        let (c, changed) = inside.clamp_to(100, 100).unwrap();
        assert!(!changed);
        assert_eq!(c, inside);

        assert!(roi(200, 200, 5, 5).clamp_to(100, 100).is_none());
    }

    proptest::proptest! {
        #[test]
        fn intersection_matches_pixel_count(
            ax in 0i64..54, ay in 0i64..54, aw in 1u32..10, ah in 1u32..10,
            bx in 0i64..54, by in 0i64..54, bw in 1u32..10, bh in 1u32..10,
        ) {
            let a = roi(ax, ay, aw, ah);
            let b = roi(bx, by, bw, bh);
            let fast = a.intersection_area(&b);
            proptest::prop_assert_eq!(fast, brute_intersection(&a, &b));
            proptest::prop_assert_eq!(fast, b.intersection_area(&a));
            proptest::prop_assert!(fast <= a.area().min(b.area()));
            proptest::prop_assert_eq!(a.intersection_area(&a), a.area());
        }
    }
}
