//! Hausdorff distance between extracted polylines.

use super::LevelSetPolyline;
use crate::field::Point2;
use crate::{Error, Exec, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HausdorffDistances {
    /// `sup_{a in A} dist(a, B)`.
    pub d_forward: f64,
    /// `sup_{b in B} dist(b, A)`.
    pub d_backward: f64,
    pub d_h: f64,
}

pub fn midpoint(a: Point2, b: Point2) -> Point2 {
    0.5 * (a + b)
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    // Samples taken from this very segment are on it, whatever the rounding.
    if p == a || p == b || p == midpoint(a, b) {
        return 0.0;
    }
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + t * ab)
}

pub fn brute_force_distance(p: Point2, segs: &[(Point2, Point2)]) -> f64 {
    segs.iter().map(|&(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
}

/// Uniform bins over the segment bounding box. Each segment is registered in
/// every bin its bounding box overlaps.
pub struct SegmentIndex<'a> {
    segs: &'a [(Point2, Point2)],
    origin: Point2,
    bin: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl<'a> SegmentIndex<'a> {
    pub fn new(segs: &'a [(Point2, Point2)]) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &(a, b) in segs {
            for p in [a, b] {
                lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let per_axis = ((segs.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let bin = extent / per_axis as f64;
        let nx = (((hi.x - lo.x) / bin).floor() as usize + 1).min(per_axis + 1);
        let ny = (((hi.y - lo.y) / bin).floor() as usize + 1).min(per_axis + 1);
        let mut bins = vec![Vec::new(); nx * ny];
        for (k, &(a, b)) in segs.iter().enumerate() {
            let (i0, j0) = Self::cell_of(lo, bin, nx, ny, Point2::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = Self::cell_of(lo, bin, nx, ny, Point2::new(a.x.max(b.x), a.y.max(b.y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(k as u32);
                }
            }
        }
        SegmentIndex { segs, origin: lo, bin, nx, ny, bins }
    }

    fn cell_of(lo: Point2, bin: f64, nx: usize, ny: usize, p: Point2) -> (usize, usize) {
        let i = ((p.x - lo.x) / bin).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((p.y - lo.y) / bin).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    /// Exact distance from `p` to the nearest segment. Visits rings of bins
    /// around `p` until the ring lower bound exceeds the best distance, so the
    /// result is the same float as [`brute_force_distance`].
    pub fn distance(&self, p: Point2) -> f64 {
        let (ci, cj) = Self::cell_of(self.origin, self.bin, self.nx, self.ny, p);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for r in 0..=max_ring {
            if (r as f64 - 1.0) * self.bin >= best {
                break;
            }
            let (i_lo, i_hi) = (ci as isize - r as isize, ci as isize + r as isize);
            let (j_lo, j_hi) = (cj as isize - r as isize, cj as isize + r as isize);
            for j in j_lo..=j_hi {
                if j < 0 || j >= self.ny as isize {
                    continue;
                }
                let on_edge_row = j == j_lo || j == j_hi;
                let mut i = i_lo;
                while i <= i_hi {
                    if i >= 0 && i < self.nx as isize {
                        for &k in &self.bins[j as usize * self.nx + i as usize] {
                            let (a, b) = self.segs[k as usize];
                            best = best.min(point_segment_distance(p, a, b));
                        }
                    }
                    // Interior rows only contribute their two ring columns.
                    i += if on_edge_row || r == 0 { 1 } else { (i_hi - i_lo).max(1) };
                }
            }
        }
        best
    }
}

/// Directed distance `sup_{s in samples} dist(s, segs)`.
pub fn directed(samples: &[Point2], segs: &[(Point2, Point2)], accelerated: bool, exec: Exec) -> f64 {
    let dists = if accelerated {
        let index = SegmentIndex::new(segs);
        exec.map_slice(samples, |&p| index.distance(p))
    } else {
        exec.map_slice(samples, |&p| brute_force_distance(p, segs))
    };
    dists.into_iter().fold(0.0, f64::max)
}

pub fn hausdorff(a: &LevelSetPolyline, b: &LevelSetPolyline) -> Result<HausdorffDistances> {
    hausdorff_with(a, b, true, Exec::default())
}

pub fn hausdorff_with(a: &LevelSetPolyline, b: &LevelSetPolyline, accelerated: bool, exec: Exec) -> Result<HausdorffDistances> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyContour);
    }
    let d_forward = directed(&a.samples(), &b.segments, accelerated, exec);
    let d_backward = directed(&b.samples(), &a.segments, accelerated, exec);
    Ok(HausdorffDistances { d_forward, d_backward, d_h: d_forward.max(d_backward) })
}
