//! Sine-activated MLP `[2, W, W, 1]` and its weight-file format.
//!
//! Hidden layers compute `sin(omega0 * (W z + b))`; the output layer is
//! affine. Weight matrices are row-major with one row per output unit.

use super::dual::DualScalar2;
use super::{Jet2, Point2};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A dense layer with a row-major `rows x cols` weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer { rows, cols, weight: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weight[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights {
    pub arch: Vec<usize>,
    pub omega0: f64,
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub steps_trained: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightFile {
    arch: Vec<usize>,
    omega0: f64,
    layers: Vec<LayerFile>,
    seed: u64,
    steps: u64,
}

impl MlpWeights {
    /// Checks shapes against `arch` and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        let arch = &self.arch;
        if arch.len() != 4 || arch[0] != 2 || arch[3] != 1 || arch[1] != arch[2] {
            return Err(Error::Weights(format!("arch must be [2, W, W, 1], got {arch:?}")));
        }
        if arch[1] == 0 {
            return Err(Error::Weights("hidden width must be positive".into()));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::Weights(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if self.layers.len() != arch.len() - 1 {
            return Err(Error::Weights(format!(
                "arch {arch:?} declares {} layers, file has {}",
                arch.len() - 1,
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = (arch[l + 1], arch[l]);
            if layer.rows != rows || layer.cols != cols {
                return Err(Error::Weights(format!(
                    "layers[{l}].weight is {}x{}, arch requires {rows}x{cols}",
                    layer.rows, layer.cols
                )));
            }
            if layer.weight.len() != rows * cols {
                return Err(Error::Weights(format!("layers[{l}].weight has ragged rows")));
            }
            if layer.bias.len() != rows {
                return Err(Error::Weights(format!(
                    "layers[{l}].bias has length {}, arch requires {rows}",
                    layer.bias.len()
                )));
            }
            if layer.weight.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::Weights(format!("layers[{l}] contains non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.arch[1]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Flat parameter view: per layer, weights (row-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weight.len();
            l.weight.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    pub fn to_json(&self) -> String {
        let file = WeightFile {
            arch: self.arch.clone(),
            omega0: self.omega0,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight.chunks(l.cols).map(<[f64]>::to_vec).collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
            seed: self.seed,
            steps: self.steps_trained,
        };
        serde_json::to_string_pretty(&file).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile =
            serde_json::from_str(text).map_err(|e| Error::Weights(e.to_string()))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, lf) in file.layers.into_iter().enumerate() {
            let rows = lf.weight.len();
            let cols = lf.weight.first().map_or(0, Vec::len);
            if lf.weight.iter().any(|r| r.len() != cols) {
                return Err(Error::Weights(format!("layers[{l}].weight has ragged rows")));
            }
            layers.push(Layer {
                rows,
                cols,
                weight: lf.weight.into_iter().flatten().collect(),
                bias: lf.bias,
            });
        }
        let w = MlpWeights {
            arch: file.arch,
            omega0: file.omega0,
            layers,
            seed: file.seed,
            steps_trained: file.steps,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
            .map_err(|e| Error::Weights(format!("{}: {}", path.display(), e.to_string().trim_start_matches("weights: "))))
    }

    pub fn value(&self, p: Point2) -> f64 {
        let w = self.omega0;
        let (l1, l2, l3) = (&self.layers[0], &self.layers[1], &self.layers[2]);
        let a1: Vec<f64> = (0..l1.rows)
            .map(|i| {
                let r = l1.row(i);
                (w * (r[0] * p.x + r[1] * p.y + l1.bias[i])).sin()
            })
            .collect();
        let mut out = l3.bias[0];
        let r3 = l3.row(0);
        for i in 0..l2.rows {
            let pre = dot(l2.row(i), &a1) + l2.bias[i];
            out += r3[i] * (w * pre).sin();
        }
        out
    }

    /// Value and spatial gradient by first-order forward tangents.
    pub fn value_grad(&self, p: Point2) -> (f64, [f64; 2]) {
        let w = self.omega0;
        let (l1, l2, l3) = (&self.layers[0], &self.layers[1], &self.layers[2]);
        let n = l1.rows;
        let mut a1 = vec![0.0; n];
        let mut tx = vec![0.0; n];
        let mut ty = vec![0.0; n];
        for i in 0..n {
            let r = l1.row(i);
            let (s, c) = (w * (r[0] * p.x + r[1] * p.y + l1.bias[i])).sin_cos();
            a1[i] = s;
            tx[i] = w * c * r[0];
            ty[i] = w * c * r[1];
        }
        let r3 = l3.row(0);
        let mut out = l3.bias[0];
        let mut g = [0.0; 2];
        for i in 0..l2.rows {
            let row = l2.row(i);
            let (s, c) = (w * (dot(row, &a1) + l2.bias[i])).sin_cos();
            out += r3[i] * s;
            let k = r3[i] * w * c;
            g[0] += k * dot(row, &tx);
            g[1] += k * dot(row, &ty);
        }
        (out, g)
    }

    /// Value, gradient and Hessian via [`DualScalar2`] propagation.
    pub fn jet(&self, p: Point2) -> Jet2 {
        let w = self.omega0;
        let x = DualScalar2::variable(p.x, 0);
        let y = DualScalar2::variable(p.y, 1);
        let (l1, l2, l3) = (&self.layers[0], &self.layers[1], &self.layers[2]);
        let a1: Vec<DualScalar2> = (0..l1.rows)
            .map(|i| {
                let r = l1.row(i);
                let pre = DualScalar2::constant(l1.bias[i]).mul_add(r[0], x).mul_add(r[1], y);
                pre.scale(w).sin()
            })
            .collect();
        let r3 = l3.row(0);
        let mut out = DualScalar2::constant(l3.bias[0]);
        for i in 0..l2.rows {
            let mut pre = DualScalar2::constant(l2.bias[i]);
            for (wij, aj) in l2.row(i).iter().zip(&a1) {
                pre = pre.mul_add(*wij, *aj);
            }
            out = out.mul_add(r3[i], pre.scale(w).sin());
        }
        Jet2 { value: out.value, grad: out.d1, hess: out.d2 }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
