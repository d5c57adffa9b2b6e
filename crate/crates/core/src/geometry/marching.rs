//! Marching-squares extraction of `{psi = 0}`.

use crate::field::{BBox, ImplicitField, Point2};

use crate::{Error, Exec, Result};

#[derive(Clone, Debug)]
pub struct LevelSetPolyline {
    pub segments: Vec<(Point2, Point2)>,
    /// Cells per axis of the extraction lattice.
    pub res: usize,
    pub bbox: BBox,
}

impl LevelSetPolyline {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|(a, b)| a.dist(*b)).sum()
    }

    pub fn cell_size(&self) -> f64 {
        (self.bbox.width() / self.res as f64).max(self.bbox.height() / self.res as f64)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point2> + '_ {
        self.segments.iter().flat_map(|(a, b)| [*a, *b])
    }

    /// Segment endpoints and midpoints, the samples of the "from" side of a
    /// directed Hausdorff distance.
    pub fn samples(&self) -> Vec<Point2> {
        let mut out = Vec::with_capacity(3 * self.segments.len());
        for &(a, b) in &self.segments {
            out.push(a);
            out.push(super::hausdorff::midpoint(a, b));
            out.push(b);
        }
        out
    }
}

pub const MIN_EXTRACTION_RES: usize = 64;

pub fn extract_zero_set(field: &ImplicitField, bbox: BBox, res: usize) -> Result<LevelSetPolyline> {
    extract_zero_set_with(field, bbox, res, Exec::default())
}

/// Linear interpolation along sign-changing cell edges; saddle cells are
/// resolved by the sign at the cell center. Nodes with `psi >= 0` count as
/// outside.
pub fn extract_zero_set_with(field: &ImplicitField, bbox: BBox, res: usize, exec: Exec) -> Result<LevelSetPolyline> {
    extract_fn(&|p| field.value(p), bbox, res, exec)
}

pub(crate) fn extract_fn(
    value: &(dyn Fn(Point2) -> f64 + Sync),
    bbox: BBox,
    res: usize,
    exec: Exec,
) -> Result<LevelSetPolyline> {
    if res < MIN_EXTRACTION_RES {
        return Err(Error::InvalidParameter(format!(
            "extraction needs res >= {MIN_EXTRACTION_RES}, got {res}"
        )));
    }
    let n = res + 1;
    let dx = bbox.width() / res as f64;
    let dy = bbox.height() / res as f64;
    let node = |i: usize, j: usize| Point2::new(bbox.min.x + i as f64 * dx, bbox.min.y + j as f64 * dy);
    let values: Vec<f64> = exec
        .map(n, |j| (0..n).map(|i| value(node(i, j))).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    let v = |i: usize, j: usize| values[j * n + i];

    let rows = exec.map(res, |j| {
        let mut segs = Vec::new();
        for i in 0..res {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            let p = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
            let inside = c.map(|x| x < 0.0);
            let cross = |a: usize, b: usize| -> Option<Point2> {
                (inside[a] != inside[b]).then(|| {
                    let t = c[a] / (c[a] - c[b]);
                    p[a] + t * (p[b] - p[a])
                })
            };
            // Edges: 0 bottom, 1 right, 2 top, 3 left.
            let e = [cross(0, 1), cross(1, 2), cross(3, 2), cross(0, 3)];
            let hits: Vec<usize> = (0..4).filter(|&k| e[k].is_some()).collect();
            match hits.len() {
                0 => {}
                2 => segs.push((e[hits[0]].unwrap(), e[hits[1]].unwrap())),
                4 => {
                    let center = value(Point2::new(p[0].x + 0.5 * dx, p[0].y + 0.5 * dy));
                    let pair = |a: usize, b: usize| (e[a].unwrap(), e[b].unwrap());
                    if (center < 0.0) == inside[0] {
                        // Corners 0 and 2 connect through the center: cut off 1 and 3.
                        segs.push(pair(0, 1));
                        segs.push(pair(3, 2));
                    } else {
                        segs.push(pair(3, 0));
                        segs.push(pair(1, 2));
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
        segs
    });
    let segments: Vec<_> = rows.into_iter().flatten().collect();
    if segments.is_empty() {
        return Err(Error::EmptyContour);
    }
    Ok(LevelSetPolyline { segments, res, bbox })
}
