//! Q1 stiffness with shifted-boundary Nitsche terms on the surrogate
//! boundary.
//!
//! With the shift `S(w)(x~) = w(x~) + grad w(x~) . d(x~)` the face
//! contribution is
//!
//! ```text
//! - <k grad u . n, v> - <k grad v . n, S(u) - g> + (gamma k / h) <S(u) - g, S(v)>
//! ```
//!
//! where `g` is the Dirichlet datum at the closest point `x*`.

use super::grid::{BackgroundGrid, CellLabel, DomainClassification};
use super::sparse::CsrMatrix;
use crate::field::Point2;
use crate::projection::ClosestPointMap;
use crate::Exec;

pub type ScalarFn<'a> = &'a (dyn Fn(Point2) -> f64 + Sync);

/// Where the Dirichlet datum is read for a boundary point `x*` on `{psi = 0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryData {
    /// `g(x*)`.
    Traced,
    /// `g(P(x*))`, with `P` the closest-point map of the reference interface:
    /// the datum is only known on the reference boundary.
    Transferred(ClosestPointMap),
}

#[derive(Clone, Copy)]
pub struct SbmParams<'a> {
    pub kappa: f64,
    pub gamma: f64,
    pub source: ScalarFn<'a>,
    pub dirichlet: ScalarFn<'a>,
    pub boundary: BoundaryData,
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Degree of freedom of each grid node, `None` for inactive nodes.
    pub dof_of_node: Vec<Option<usize>>,
    pub node_of_dof: Vec<usize>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.node_of_dof.len()
    }
}

const GAUSS2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];

/// Bilinear shape functions on the unit square, counter-clockwise from the
/// lower-left vertex.
pub(crate) fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta]
}

/// Physical gradients for cell size `h`.
pub(crate) fn shape_grad(xi: f64, eta: f64, h: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta) / h, -(1.0 - xi) / h],
        [(1.0 - eta) / h, -xi / h],
        [eta / h, xi / h],
        [-eta / h, (1.0 - xi) / h],
    ]
}

struct CellContribution {
    nodes: [usize; 4],
    k: [[f64; 4]; 4],
    f: [f64; 4],
}

fn cell_contribution(
    grid: &BackgroundGrid,
    cls: &DomainClassification,
    faces: &[usize],
    c: usize,
    p: &SbmParams<'_>,
) -> CellContribution {
    let h = grid.h;
    let origin = grid.cell_origin(c);
    let mut k = [[0.0; 4]; 4];
    let mut f = [0.0; 4];
    for &(xi, wx) in &GAUSS2 {
        for &(eta, wy) in &GAUSS2 {
            let w = wx * wy * h * h;
            let n = shape(xi, eta);
            let g = shape_grad(xi, eta, h);
            let src = (p.source)(Point2::new(origin.x + xi * h, origin.y + eta * h));
            for a in 0..4 {
                f[a] += w * src * n[a];
                for b in 0..4 {
                    k[a][b] += w * p.kappa * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
    }
    let pen = p.gamma * p.kappa / h;
    for &fi in faces {
        let face = &cls.faces[fi];
        let nrm = face.normal;
        for q in &face.quad {
            let xi = (q.x_tilde.x - origin.x) / h;
            let eta = (q.x_tilde.y - origin.y) / h;
            let n = shape(xi, eta);
            let g = shape_grad(xi, eta, h);
            let dn: [f64; 4] = std::array::from_fn(|a| g[a][0] * nrm[0] + g[a][1] * nrm[1]);
            let s: [f64; 4] = std::array::from_fn(|a| n[a] + g[a][0] * q.d.x + g[a][1] * q.d.y);
            let datum_at = match p.boundary {
                BoundaryData::Traced => q.x_star,
                BoundaryData::Transferred(map) => map.project(q.x_star).unwrap_or(q.x_star),
            };
            let gval = (p.dirichlet)(datum_at);
            let w = q.weight;
            for a in 0..4 {
                f[a] += w * (-p.kappa * dn[a] * gval + pen * gval * s[a]);
                for b in 0..4 {
                    k[a][b] += w * (-p.kappa * dn[b] * n[a] - p.kappa * dn[a] * s[b] + pen * s[b] * s[a]);
                }
            }
        }
    }
    CellContribution { nodes: grid.cell_nodes(c), k, f }
}

pub fn assemble(grid: &BackgroundGrid, cls: &DomainClassification, params: &SbmParams<'_>) -> SparseSystem {
    assemble_with(grid, cls, params, Exec::default())
}

/// Cell contributions are computed in parallel and accumulated in cell
/// order.
pub fn assemble_with(
    grid: &BackgroundGrid,
    cls: &DomainClassification,
    params: &SbmParams<'_>,
    exec: Exec,
) -> SparseSystem {
    let mut dof_of_node = vec![None; grid.num_nodes()];
    let cells: Vec<usize> = cls.interior_cells().collect();
    for &c in &cells {
        for v in grid.cell_nodes(c) {
            dof_of_node[v] = Some(());
        }
    }
    let mut node_of_dof = Vec::new();
    let dof_of_node: Vec<Option<usize>> = dof_of_node
        .iter()
        .enumerate()
        .map(|(v, a)| {
            a.map(|_| {
                node_of_dof.push(v);
                node_of_dof.len() - 1
            })
        })
        .collect();

    let mut faces_of_cell: Vec<Vec<usize>> = vec![Vec::new(); grid.num_cells()];
    for (fi, face) in cls.faces.iter().enumerate() {
        debug_assert_eq!(cls.labels[face.cell], CellLabel::Interior);
        faces_of_cell[face.cell].push(fi);
    }

    let contributions = exec.map_slice(&cells, |&c| cell_contribution(grid, cls, &faces_of_cell[c], c, params));
    let n = node_of_dof.len();
    let mut triplets = Vec::with_capacity(16 * contributions.len());
    let mut rhs = vec![0.0; n];
    for cc in &contributions {
        let dofs = cc.nodes.map(|v| dof_of_node[v].expect("interior cell node is active"));
        for a in 0..4 {
            rhs[dofs[a]] += cc.f[a];
            for b in 0..4 {
                triplets.push((dofs[a], dofs[b], cc.k[a][b]));
            }
        }
    }
    SparseSystem { matrix: CsrMatrix::from_triplets(n, &triplets), rhs, dof_of_node, node_of_dof }
}
