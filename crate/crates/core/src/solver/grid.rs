//! Uniform background grid and interior/exterior cell classification.

use crate::field::{BBox, ImplicitField, Point2, DEFAULT_BOX};
use crate::projection::{newton_project, NewtonOptions};
use crate::{Error, Exec, Result};
use std::collections::HashMap;

pub const MIN_LEVEL: u32 = 2;
pub const MAX_LEVEL: u32 = 10;

/// Mesh size of a refinement level: level 4 is 0.125, each level halves it.
pub fn level_h(level: u32) -> f64 {
    2f64.powi(1 - level as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundGrid {
    pub level: u32,
    pub h: f64,
    pub bbox: BBox,
    /// Cells per axis.
    pub n: usize,
}

impl BackgroundGrid {
    pub fn new(level: u32) -> Result<Self> {
        Self::with_box(level, DEFAULT_BOX)
    }

    pub fn with_box(level: u32, bbox: BBox) -> Result<Self> {
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
            return Err(Error::InvalidParameter(format!(
                "level must lie in {MIN_LEVEL}..={MAX_LEVEL}, got {level}"
            )));
        }
        let h = level_h(level);
        let cells = bbox.width() / h;
        if (cells - cells.round()).abs() > 1e-9 || (bbox.height() - bbox.width()).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "box must be square with side a multiple of h = {h}"
            )));
        }
        Ok(BackgroundGrid { level, h, bbox, n: cells.round() as usize })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_axis() * self.nodes_per_axis()
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_per_axis() + i
    }

    pub fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.bbox.min.x + i as f64 * self.h, self.bbox.min.y + j as f64 * self.h)
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.n, c / self.n)
    }

    /// Global node indices of a cell, counter-clockwise from lower-left.
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        [
            self.node_index(i, j),
            self.node_index(i + 1, j),
            self.node_index(i + 1, j + 1),
            self.node_index(i, j + 1),
        ]
    }

    pub fn cell_origin(&self, c: usize) -> Point2 {
        let (i, j) = self.cell_ij(c);
        self.node(i, j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellLabel {
    Interior,
    Exterior,
}

/// A quadrature point on the surrogate boundary with its closest point on
/// the true interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacePoint {
    pub x_tilde: Point2,
    pub x_star: Point2,
    /// `x_star - x_tilde`.
    pub d: Point2,
    pub weight: f64,
}

/// Edges of a cell, counter-clockwise: bottom, right, top, left.
pub const EDGE_NORMALS: [[f64; 2]; 4] = [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
pub const EDGE_NODES: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateFace {
    pub cell: usize,
    pub edge: usize,
    /// Global node indices of the edge endpoints.
    pub nodes: (usize, usize),
    pub normal: [f64; 2],
    pub quad: [FacePoint; 2],
}

#[derive(Clone, Debug)]
pub struct DomainClassification {
    pub labels: Vec<CellLabel>,
    pub faces: Vec<SurrogateFace>,
}

impl DomainClassification {
    pub fn interior_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(|(_, &l)| l == CellLabel::Interior).map(|(c, _)| c)
    }

    pub fn active_cells(&self) -> usize {
        self.interior_cells().count()
    }

    /// Connected components of the surrogate face graph; `None` if some
    /// vertex has odd degree, i.e. the faces do not close up.
    pub fn boundary_loops(&self) -> Option<usize> {
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for f in &self.faces {
            adj.entry(f.nodes.0).or_default().push(f.nodes.1);
            adj.entry(f.nodes.1).or_default().push(f.nodes.0);
        }
        if adj.values().any(|v| v.len() % 2 != 0) {
            return None;
        }
        let mut seen = std::collections::HashSet::new();
        let mut keys: Vec<usize> = adj.keys().copied().collect();
        keys.sort_unstable();
        let mut loops = 0;
        for start in keys {
            if !seen.insert(start) {
                continue;
            }
            loops += 1;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[&v] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        Some(loops)
    }
}

const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

pub fn classify(grid: &BackgroundGrid, field: &ImplicitField) -> Result<DomainClassification> {
    classify_with(grid, field, NewtonOptions::default(), Exec::default())
}

/// Labels a cell interior when `psi <= 0` at all four vertices, collects the
/// faces between interior and exterior cells and projects their Gauss points
/// onto `{psi = 0}`.
pub fn classify_with(
    grid: &BackgroundGrid,
    field: &ImplicitField,
    newton: NewtonOptions,
    exec: Exec,
) -> Result<DomainClassification> {
    let np = grid.nodes_per_axis();
    let inside: Vec<bool> = exec
        .map(np, |j| (0..np).map(|i| field.value(grid.node(i, j)) <= 0.0).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    let labels: Vec<CellLabel> = (0..grid.num_cells())
        .map(|c| {
            if grid.cell_nodes(c).iter().all(|&v| inside[v]) {
                CellLabel::Interior
            } else {
                CellLabel::Exterior
            }
        })
        .collect();

    let mut stubs = Vec::new();
    for c in 0..grid.num_cells() {
        if labels[c] != CellLabel::Interior {
            continue;
        }
        let (i, j) = grid.cell_ij(c);
        if i == 0 || j == 0 || i + 1 == grid.n || j + 1 == grid.n {
            return Err(Error::Classification(format!(
                "interior cell ({i}, {j}) touches the background box; the domain must lie inside it"
            )));
        }
        let neighbors = [c - grid.n, c + 1, c + grid.n, c - 1];
        for (edge, &nb) in neighbors.iter().enumerate() {
            if labels[nb] != CellLabel::Interior {
                stubs.push((c, edge));
            }
        }
    }
    if stubs.is_empty() {
        return Err(Error::Classification(
            "no interior cell: the zero level set does not enclose any grid cell".into(),
        ));
    }

    let sanity = 2.0 * grid.h * std::f64::consts::SQRT_2;
    let faces = exec.map_slice(&stubs, |&(c, edge)| -> Result<SurrogateFace> {
        let cn = grid.cell_nodes(c);
        let (la, lb) = EDGE_NODES[edge];
        let (na, nb) = (cn[la], cn[lb]);
        let pa = grid.node(na % np, na / np);
        let pb = grid.node(nb % np, nb / np);
        let mut quad = [FacePoint { x_tilde: pa, x_star: pa, d: Point2::ORIGIN, weight: 0.0 }; 2];
        for (q, &t) in GAUSS2.iter().enumerate() {
            let x_tilde = pa + t * (pb - pa);
            let res = newton_project(field, x_tilde, newton)?;
            if !res.converged {
                return Err(Error::ProjectionFailed { point: x_tilde, reason: res.reason.as_str().into() });
            }
            let d = res.final_point - x_tilde;
            if d.norm() > sanity {
                return Err(Error::ProjectionFailed {
                    point: x_tilde,
                    reason: format!("distance {} exceeds 2h*sqrt(2) = {sanity}", d.norm()),
                });
            }
            quad[q] = FacePoint { x_tilde, x_star: res.final_point, d, weight: 0.5 * grid.h };
        }
        Ok(SurrogateFace { cell: c, edge, nodes: (na, nb), normal: EDGE_NORMALS[edge], quad })
    });
    let faces = faces.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DomainClassification { labels, faces })
}
