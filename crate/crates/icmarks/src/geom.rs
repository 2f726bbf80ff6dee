//! Integer rectangle geometry. All coordinates are abstract placement units;
//! exact integer arithmetic keeps displacement watermarks grid-exact.

/// Axis-aligned rectangle, half-open in both axes: `[x_lo, x_hi) x [y_lo, y_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x_lo: i64,
    pub y_lo: i64,
    pub x_hi: i64,
    pub y_hi: i64,
}

impl Rect {
    pub fn new(x_lo: i64, y_lo: i64, x_hi: i64, y_hi: i64) -> Self {
        debug_assert!(x_lo < x_hi && y_lo < y_hi, "degenerate rect");
        Rect { x_lo, y_lo, x_hi, y_hi }
    }

    pub fn width(&self) -> i64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> i64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.x_lo < self.x_hi && self.y_lo < self.y_hi
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x_lo <= other.x_lo
            && other.x_hi <= self.x_hi
            && self.y_lo <= other.y_lo
            && other.y_hi <= self.y_hi
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x_lo < other.x_hi
            && other.x_lo < self.x_hi
            && self.y_lo < other.y_hi
            && other.y_lo < self.y_hi
    }

    /// Area of the intersection, zero when disjoint.
    pub fn intersection_area(&self, other: &Rect) -> i64 {
        let w = self.x_hi.min(other.x_hi) - self.x_lo.max(other.x_lo);
        let h = self.y_hi.min(other.y_hi) - self.y_lo.max(other.y_lo);
        if w > 0 && h > 0 {
            w * h
        } else {
            0
        }
    }

    /// Whether the point `(2x, 2y)` given in doubled coordinates lies inside.
    ///
    /// Cell centers land on half-unit positions; doubling keeps the test
    /// exact in integers. The rectangle is half-open, so a center exactly on
    /// `x_lo`/`y_lo` is inside and one on `x_hi`/`y_hi` is outside.
    pub fn contains_center2(&self, cx2: i64, cy2: i64) -> bool {
        2 * self.x_lo <= cx2 && cx2 < 2 * self.x_hi && 2 * self.y_lo <= cy2 && cy2 < 2 * self.y_hi
    }
}

/// Center of a `w x h` cell at origin `(x, y)`, in doubled coordinates.
pub fn center2(x: i64, y: i64, w: i64, h: i64) -> (i64, i64) {
    (2 * x + w, 2 * y + h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection_area_basic() {
        let a = Rect::new(0, 0, 4, 4);
        let b = Rect::new(2, 2, 6, 6);
        assert_eq!(a.intersection_area(&b), 4);
        let c = Rect::new(4, 0, 8, 4);
        assert_eq!(a.intersection_area(&c), 0); // touching edges do not overlap
    }

    #[test]
    fn center_containment_is_half_open() {
        let r = Rect::new(0, 0, 10, 10);
        // center of a 2x2 cell at (9,0): cx = 10 exactly on x_hi -> outside
        let (cx2, cy2) = center2(9, 0, 2, 2);
        assert!(!r.contains_center2(cx2, cy2));
        // center on the low edge is inside
        let (cx2, cy2) = center2(-1, 0, 2, 2);
        assert!(r.contains_center2(cx2, cy2));
    }
}
