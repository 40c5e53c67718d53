//! Integer-lattice geometry shared by all mesh operations.
//!
//! All geometry lives on the lattice `{0, ..., 2^R}^d`: element anchors,
//! singularity boxes and basis-function extents are integer tuples, so
//! overlap and containment tests are exact.

/// Largest supported mesh dimension (space plus time).
pub const MAX_D: usize = 5;

/// Lattice coordinate at resolution `2^R`.
pub type Coord = i64;

/// Axis-aligned box on the lattice. Axes with `lo == hi` are degenerate,
/// so the same type describes elements, faces, edges and points.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct LatticeBox {
    d: usize,
    lo: [Coord; MAX_D],
    hi: [Coord; MAX_D],
}

impl LatticeBox {
    pub fn new(d: usize, lo: [Coord; MAX_D], hi: [Coord; MAX_D]) -> Self {
        assert!(d >= 1 && d <= MAX_D, "dimension {d} out of range");
        for i in 0..d {
            assert!(lo[i] <= hi[i], "box has lo > hi on axis {i}");
        }
        let mut b = LatticeBox { d, lo, hi };
        // unused axes are zeroed so Eq/Hash see a canonical value
        for i in d..MAX_D {
            b.lo[i] = 0;
            b.hi[i] = 0;
        }
        b
    }

    pub fn from_slices(lo: &[Coord], hi: &[Coord]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let d = lo.len();
        let mut alo = [0; MAX_D];
        let mut ahi = [0; MAX_D];
        alo[..d].copy_from_slice(lo);
        ahi[..d].copy_from_slice(hi);
        Self::new(d, alo, ahi)
    }

    /// Cube with corner `anchor` and side `side`.
    pub fn cube(d: usize, anchor: [Coord; MAX_D], side: Coord) -> Self {
        let mut hi = anchor;
        for i in 0..d {
            hi[i] = anchor[i] + side;
        }
        Self::new(d, anchor, hi)
    }

    /// Single lattice point.
    pub fn point(d: usize, p: [Coord; MAX_D]) -> Self {
        Self::new(d, p, p)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lo(&self) -> &[Coord] {
        &self.lo[..self.d]
    }

    pub fn hi(&self) -> &[Coord] {
        &self.hi[..self.d]
    }

    pub fn lo_raw(&self) -> [Coord; MAX_D] {
        self.lo
    }

    pub fn hi_raw(&self) -> [Coord; MAX_D] {
        self.hi
    }

    /// Number of axes with positive extent.
    pub fn extent_axes(&self) -> usize {
        (0..self.d).filter(|&i| self.hi[i] > self.lo[i]).count()
    }

    pub fn is_degenerate_axis(&self, axis: usize) -> bool {
        self.lo[axis] == self.hi[axis]
    }

    /// Volume counted in lattice cells (zero if any axis is degenerate).
    pub fn volume(&self) -> u128 {
        let mut v: u128 = 1;
        for i in 0..self.d {
            v *= (self.hi[i] - self.lo[i]) as u128;
        }
        v
    }

    /// Closed boxes share at least one point.
    pub fn touches(&self, other: &LatticeBox) -> bool {
        debug_assert_eq!(self.d, other.d);
        (0..self.d).all(|i| self.lo[i] <= other.hi[i] && self.hi[i] >= other.lo[i])
    }

    /// Open interiors intersect (every axis overlaps with positive length).
    pub fn interiors_intersect(&self, other: &LatticeBox) -> bool {
        debug_assert_eq!(self.d, other.d);
        (0..self.d).all(|i| self.lo[i] < other.hi[i] && self.hi[i] > other.lo[i])
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        debug_assert_eq!(self.d, other.d);
        (0..self.d).all(|i| self.lo[i] <= other.lo[i] && self.hi[i] >= other.hi[i])
    }

    pub fn contains_point(&self, p: &[Coord]) -> bool {
        (0..self.d).all(|i| self.lo[i] <= p[i] && self.hi[i] >= p[i])
    }

    /// Overlap test used by mesh refinement: the intersection must have
    /// positive length along every extent axis of `self` and the element
    /// must contain the coordinate of every degenerate axis. An element
    /// touching an edge singularity only at its endpoint does not count.
    pub fn refinement_overlap(&self, elem: &LatticeBox) -> bool {
        debug_assert_eq!(self.d, elem.d);
        for i in 0..self.d {
            if self.lo[i] == self.hi[i] {
                if elem.lo[i] > self.lo[i] || elem.hi[i] < self.lo[i] {
                    return false;
                }
            } else {
                let lo = self.lo[i].max(elem.lo[i]);
                let hi = self.hi[i].min(elem.hi[i]);
                if lo >= hi {
                    return false;
                }
            }
        }
        true
    }

    /// Dimension of the closed intersection, or `None` when disjoint.
    pub fn intersection_dim(&self, other: &LatticeBox) -> Option<usize> {
        let mut dim = 0;
        for i in 0..self.d {
            let lo = self.lo[i].max(other.lo[i]);
            let hi = self.hi[i].min(other.hi[i]);
            if lo > hi {
                return None;
            }
            if lo < hi {
                dim += 1;
            }
        }
        Some(dim)
    }

    /// True when `other` is a face (of any dimension) of this box:
    /// on every axis it either spans the full extent or is pinned to
    /// one of the two boundary coordinates.
    pub fn has_face(&self, other: &LatticeBox) -> bool {
        debug_assert_eq!(self.d, other.d);
        (0..self.d).all(|i| {
            (other.lo[i] == self.lo[i] && other.hi[i] == self.hi[i])
                || (other.lo[i] == other.hi[i]
                    && (other.lo[i] == self.lo[i] || other.lo[i] == self.hi[i]))
        })
    }

    /// Restrict the box to one side of the plane `axis = cut`.
    pub fn clip(&self, axis: usize, cut: Coord, keep_low: bool) -> LatticeBox {
        let mut b = *self;
        if keep_low {
            b.hi[axis] = b.hi[axis].min(cut);
            b.lo[axis] = b.lo[axis].min(b.hi[axis]);
        } else {
            b.lo[axis] = b.lo[axis].max(cut);
            b.hi[axis] = b.hi[axis].max(b.lo[axis]);
        }
        b
    }

    /// Drop the last axis, keeping the first `d-1` coordinates.
    pub fn drop_last_axis(&self) -> LatticeBox {
        assert!(self.d >= 2);
        let mut b = *self;
        b.lo[self.d - 1] = 0;
        b.hi[self.d - 1] = 0;
        b.d = self.d - 1;
        b
    }
}

/// Round `x` down to a multiple of `step` (coordinates are nonnegative here,
/// but the helper stays correct for negative probes during neighbor scans).
pub fn align_down(x: Coord, step: Coord) -> Coord {
    debug_assert!(step > 0);
    x.div_euclid(step) * step
}

/// Iterate the Cartesian product of small per-axis candidate lists.
/// Used for neighbor probing; each list has at most a handful of entries.
pub fn for_each_combination<F: FnMut(&[Coord])>(cands: &[Vec<Coord>], mut f: F) {
    let d = cands.len();
    let mut idx = [0usize; MAX_D];
    let mut cur = [0 as Coord; MAX_D];
    if cands.iter().any(|c| c.is_empty()) {
        return;
    }
    loop {
        for i in 0..d {
            cur[i] = cands[i][idx[i]];
        }
        f(&cur[..d]);
        let mut axis = 0;
        loop {
            if axis == d {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < cands[axis].len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b2(lo: [Coord; 2], hi: [Coord; 2]) -> LatticeBox {
        LatticeBox::from_slices(&lo, &hi)
    }

    #[test]
    fn touching_and_interior_tests() {
        let a = b2([0, 0], [4, 4]);
        let b = b2([4, 0], [8, 4]);
        assert!(a.touches(&b));
        assert!(!a.interiors_intersect(&b));
        assert_eq!(a.intersection_dim(&b), Some(1));
    }

    #[test]
    fn refinement_overlap_requires_positive_extent_overlap() {
        // edge singularity along x in [0,4] at y = 0
        let s = b2([0, 0], [4, 0]);
        assert!(s.refinement_overlap(&b2([0, 0], [4, 4])));
        assert!(s.refinement_overlap(&b2([2, 0], [4, 2])));
        // touches the edge endpoint only: not an overlap
        assert!(!s.refinement_overlap(&b2([4, 0], [8, 4])));
        // off the supporting line
        assert!(!s.refinement_overlap(&b2([0, 1], [4, 4])));
    }

    #[test]
    fn point_singularity_overlap_is_closed() {
        let p = LatticeBox::point(2, [4, 4, 0, 0, 0]);
        assert!(p.refinement_overlap(&b2([0, 0], [4, 4])));
        assert!(p.refinement_overlap(&b2([4, 4], [8, 8])));
        assert!(!p.refinement_overlap(&b2([5, 4], [8, 8])));
    }

    #[test]
    fn face_membership() {
        let e = b2([0, 0], [4, 4]);
        assert!(e.has_face(&b2([0, 0], [0, 4]))); // left edge
        assert!(e.has_face(&b2([4, 4], [4, 4]))); // corner
        assert!(e.has_face(&e)); // itself
        assert!(!e.has_face(&b2([0, 0], [0, 2]))); // half edge
        assert!(!e.has_face(&b2([2, 0], [2, 4]))); // interior plane
    }

    #[test]
    fn combinations_cover_product() {
        let cands = vec![vec![0, 4], vec![8]];
        let mut seen = Vec::new();
        for_each_combination(&cands, |c| seen.push((c[0], c[1])));
        assert_eq!(seen, vec![(0, 8), (4, 8)]);
    }
}
