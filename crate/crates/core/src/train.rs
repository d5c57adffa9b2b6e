//! Fitting a sine-activated MLP to the unit-circle SDF.
//!
//! The loss is a data term against `phi(x) = |x| - 1` plus an eikonal
//! penalty `(|grad psi| - 1)^2` on points inside a band around the circle.
//! Parameter gradients are accumulated in reverse through the network,
//! including the path through the spatial gradient.

use crate::field::{BBox, ImplicitField, Layer, MlpWeights, Point2, DEFAULT_BOX};
use crate::geometry::tube_stats;
use crate::regularity::{sample_tube, TubeSampling};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub const DEFAULT_WIDTH: usize = 64;
pub const DEFAULT_OMEGA0: f64 = 30.0;

/// Independent ChaCha8 streams for initialization and batch sampling.
const INIT_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Initialization: first layer uniform in `+-1/fan_in`, later layers uniform
/// in `+-sqrt(6/fan_in)/omega0`. Biases use the same bound as their layer.
pub fn init_weights(arch: &[usize], omega0: f64, seed: u64) -> Result<MlpWeights> {
    if arch.len() != 4 || arch[0] != 2 || arch[3] != 1 || arch[1] != arch[2] {
        return Err(Error::InvalidParameter(format!("arch must be [2, W, W, 1], got {arch:?}")));
    }
    if !(16..=128).contains(&arch[1]) {
        return Err(Error::InvalidParameter(format!("hidden width must lie in 16..=128, got {}", arch[1])));
    }
    if !(omega0 > 0.0) {
        return Err(Error::InvalidParameter(format!("omega0 must be positive, got {omega0}")));
    }
    let mut r = rng(seed, INIT_STREAM);
    let layers = (0..3)
        .map(|l| {
            let (fan_in, fan_out) = (arch[l], arch[l + 1]);
            let bound = if l == 0 { 1.0 / fan_in as f64 } else { (6.0 / fan_in as f64).sqrt() / omega0 };
            let mut layer = Layer::zeros(fan_out, fan_in);
            for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *w = r.gen_range(-bound..bound);
            }
            layer
        })
        .collect();
    Ok(MlpWeights { arch: arch.to_vec(), omega0, layers, seed, steps_trained: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub point: Point2,
    pub sdf: f64,
    pub in_band: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    /// Mean squared error against the SDF.
    pub data: f64,
    /// Mean eikonal residual over in-band samples (0 when there are none).
    pub eikonal: f64,
    /// `data + eikonal_weight * eikonal`.
    pub total: f64,
}

/// Per-sample forward state.
struct Forward {
    s1: Vec<f64>,
    c1: Vec<f64>,
    u1x: Vec<f64>,
    u1y: Vec<f64>,
    s2: Vec<f64>,
    c2: Vec<f64>,
    v2x: Vec<f64>,
    v2y: Vec<f64>,
    out: f64,
    grad: [f64; 2],
}

fn forward(w: &MlpWeights, p: Point2) -> Forward {
    let om = w.omega0;
    let (l1, l2, l3) = (&w.layers[0], &w.layers[1], &w.layers[2]);
    let n = l1.rows;
    let mut f = Forward {
        s1: vec![0.0; n],
        c1: vec![0.0; n],
        u1x: vec![0.0; n],
        u1y: vec![0.0; n],
        s2: vec![0.0; n],
        c2: vec![0.0; n],
        v2x: vec![0.0; n],
        v2y: vec![0.0; n],
        out: l3.bias[0],
        grad: [0.0; 2],
    };
    for i in 0..n {
        let r = l1.row(i);
        let (s, c) = (om * (r[0] * p.x + r[1] * p.y + l1.bias[i])).sin_cos();
        f.s1[i] = s;
        f.c1[i] = c;
        f.u1x[i] = c * om * r[0];
        f.u1y[i] = c * om * r[1];
    }
    let r3 = l3.row(0);
    for i in 0..n {
        let row = l2.row(i);
        let (mut z, mut vx, mut vy) = (l2.bias[i], 0.0, 0.0);
        for j in 0..n {
            z += row[j] * f.s1[j];
            vx += row[j] * f.u1x[j];
            vy += row[j] * f.u1y[j];
        }
        let (s, c) = (om * z).sin_cos();
        f.s2[i] = s;
        f.c2[i] = c;
        f.v2x[i] = om * vx;
        f.v2y[i] = om * vy;
        f.out += r3[i] * s;
        f.grad[0] += r3[i] * c * f.v2x[i];
        f.grad[1] += r3[i] * c * f.v2y[i];
    }
    f
}

/// Network value and spatial gradient through the training path.
pub fn network_value_grad(w: &MlpWeights, p: Point2) -> (f64, [f64; 2]) {
    let f = forward(w, p);
    (f.out, f.grad)
}

/// Accumulates `d out`-weighted (`dout`) and spatial-gradient-weighted
/// (`gx`, `gy`) adjoints of one sample into `grad` (flat parameter layout of
/// [`MlpWeights::params`]).
fn backward(w: &MlpWeights, p: Point2, f: &Forward, dout: f64, gx: f64, gy: f64, grad: &mut [f64]) {
    let om = w.omega0;
    let (l1, l2, l3) = (&w.layers[0], &w.layers[1], &w.layers[2]);
    let n = l1.rows;
    let (o_w1, o_b1) = (0, 2 * n);
    let o_w2 = 3 * n;
    let o_b2 = o_w2 + n * n;
    let o_w3 = o_b2 + n;
    let o_b3 = o_w3 + n;

    let r3 = l3.row(0);
    let mut dpre2 = vec![0.0; n];
    let mut dv2x = vec![0.0; n];
    let mut dv2y = vec![0.0; n];
    for i in 0..n {
        let u2x = f.c2[i] * f.v2x[i];
        let u2y = f.c2[i] * f.v2y[i];
        grad[o_w3 + i] += dout * f.s2[i] + gx * u2x + gy * u2y;
        let ds2 = dout * r3[i];
        let du2x = gx * r3[i];
        let du2y = gy * r3[i];
        dpre2[i] = ds2 * f.c2[i] - (du2x * f.v2x[i] + du2y * f.v2y[i]) * f.s2[i];
        dv2x[i] = du2x * f.c2[i];
        dv2y[i] = du2y * f.c2[i];
    }
    grad[o_b3] += dout;

    let mut da1 = vec![0.0; n];
    let mut du1x = vec![0.0; n];
    let mut du1y = vec![0.0; n];
    for i in 0..n {
        let row = l2.row(i);
        let (a, bx, by) = (om * dpre2[i], om * dv2x[i], om * dv2y[i]);
        let g = &mut grad[o_w2 + i * n..o_w2 + (i + 1) * n];
        for j in 0..n {
            g[j] += a * f.s1[j] + bx * f.u1x[j] + by * f.u1y[j];
            da1[j] += a * row[j];
            du1x[j] += bx * row[j];
            du1y[j] += by * row[j];
        }
        grad[o_b2 + i] += a;
    }

    for i in 0..n {
        let r = l1.row(i);
        let (t1x, t1y) = (om * r[0], om * r[1]);
        let dpre1 = da1[i] * f.c1[i] - (du1x[i] * t1x + du1y[i] * t1y) * f.s1[i];
        let dt1x = du1x[i] * f.c1[i];
        let dt1y = du1y[i] * f.c1[i];
        grad[o_w1 + 2 * i] += om * (dpre1 * p.x + dt1x);
        grad[o_w1 + 2 * i + 1] += om * (dpre1 * p.y + dt1y);
        grad[o_b1 + i] += om * dpre1;
    }
}

/// Loss and its gradient with respect to [`MlpWeights::params`].
pub fn loss_and_grad(weights: &MlpWeights, batch: &[Sample], eikonal_weight: f64) -> Result<(LossComponents, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let n_all = batch.len() as f64;
    let n_band = batch.iter().filter(|s| s.in_band).count();
    let mut grad = vec![0.0; weights.num_params()];
    let mut data = 0.0;
    let mut eik = 0.0;
    for s in batch {
        let f = forward(weights, s.point);
        let r = f.out - s.sdf;
        data += r * r;
        let dout = 2.0 * r / n_all;
        let (mut gx, mut gy) = (0.0, 0.0);
        if s.in_band {
            let norm = f.grad[0].hypot(f.grad[1]);
            let e = norm - 1.0;
            eik += e * e;
            if norm > 0.0 && eikonal_weight != 0.0 {
                let k = eikonal_weight * 2.0 * e / (norm * n_band as f64);
                gx = k * f.grad[0];
                gy = k * f.grad[1];
            }
        }
        backward(weights, s.point, &f, dout, gx, gy, &mut grad);
    }
    let data = data / n_all;
    let eikonal = if n_band > 0 { eik / n_band as f64 } else { 0.0 };
    Ok((LossComponents { data, eikonal, total: data + eikonal_weight * eikonal }, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub width: usize,
    pub omega0: f64,
    pub budget_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate halves every `lr_half_life` steps; `None` keeps it
    /// constant. The schedule does not depend on the budget.
    pub lr_half_life: Option<f64>,
    pub eikonal_weight: f64,
    pub band_halfwidth: f64,
    pub bbox: BBox,
    pub seed: u64,
    /// History is recorded every `log_every` steps and at the last step.
    pub log_every: usize,
    /// Tube half-width of the fixed probe used for `eps_inf_probe`.
    pub probe_h: f64,
    pub probe_res: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            width: DEFAULT_WIDTH,
            omega0: DEFAULT_OMEGA0,
            budget_steps: 1000,
            batch_size: 512,
            learning_rate: 1e-4,
            lr_half_life: Some(3000.0),
            eikonal_weight: 0.1,
            band_halfwidth: 0.2,
            bbox: DEFAULT_BOX,
            seed: 0,
            log_every: 500,
            probe_h: 0.1,
            probe_res: 256,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        match self.lr_half_life {
            Some(t) => self.learning_rate * 0.5f64.powf((step - 1) as f64 / t),
            None => self.learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.budget_steps > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && self.lr_half_life.is_none_or(|t| t > 0.0)
            && self.eikonal_weight >= 0.0
            && self.band_halfwidth > 0.0
            && self.log_every > 0
            && self.probe_h > 0.0;
        if !positive {
            return Err(Error::InvalidParameter(format!("training configuration must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub data_loss: f64,
    pub eikonal_loss: f64,
    pub eps_inf_probe: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,data_loss,eikonal_loss,eps_inf_probe\n");
        for r in &self.rows {
            s += &format!("{},{:e},{:e},{:e}\n", r.step, r.data_loss, r.eikonal_loss, r.eps_inf_probe);
        }
        s
    }
}

/// The unit-circle signed distance used as supervision.
pub fn reference_sdf() -> ImplicitField {
    ImplicitField::circle(1.0)
}

/// Half the batch uniform in the box, half uniform (by area) in the band
/// `| |x| - 1 | < band`.
fn draw_batch(r: &mut ChaCha8Rng, cfg: &TrainConfig) -> Vec<Sample> {
    let phi = reference_sdf();
    let n_band = cfg.batch_size / 2;
    let (lo, hi) = ((1.0 - cfg.band_halfwidth).max(0.0), 1.0 + cfg.band_halfwidth);
    (0..cfg.batch_size)
        .map(|k| {
            let point = if k < cfg.batch_size - n_band {
                Point2::new(
                    r.gen_range(cfg.bbox.min.x..cfg.bbox.max.x),
                    r.gen_range(cfg.bbox.min.y..cfg.bbox.max.y),
                )
            } else {
                let rad = r.gen_range(lo * lo..hi * hi).sqrt();
                let t = r.gen_range(0.0..std::f64::consts::TAU);
                Point2::new(rad * t.cos(), rad * t.sin())
            };
            let sdf = phi.value(point);
            Sample { point, sdf, in_band: sdf.abs() < cfg.band_halfwidth }
        })
        .collect()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * grad[k];
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * grad[k] * grad[k];
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

fn probe_eps(weights: &MlpWeights, tube: &TubeSampling) -> Result<f64> {
    let psi = ImplicitField::neural(weights.clone());
    Ok(tube_stats(&reference_sdf(), &psi, tube)?.eps_inf_hat)
}

/// Trains for `config.budget_steps` steps.
pub fn train(config: &TrainConfig) -> Result<(MlpWeights, TrainHistory)> {
    let (mut snaps, history) = train_snapshots(config, &[config.budget_steps])?;
    Ok((snaps.pop().expect("one snapshot"), history))
}

/// One run that records the weights after each step count in `budgets`.
/// The optimizer and batch stream do not depend on the total budget, so the
/// snapshot at `b` equals the result of a fresh run with `budget_steps = b`.
/// `config.budget_steps` is ignored; the run stops at the largest budget.
pub fn train_snapshots(config: &TrainConfig, budgets: &[usize]) -> Result<(Vec<MlpWeights>, TrainHistory)> {
    let cfg = TrainConfig { budget_steps: budgets.iter().copied().max().unwrap_or(0), ..config.clone() };
    cfg.validate()?;
    if budgets.contains(&0) {
        return Err(Error::InvalidParameter("training budgets must be positive".into()));
    }
    let arch = [2, cfg.width, cfg.width, 1];
    let mut weights = init_weights(&arch, cfg.omega0, cfg.seed)?;
    let mut params = weights.params();
    let mut adam = Adam::new(params.len());
    let mut sampler = rng(cfg.seed, SAMPLE_STREAM);
    let probe = sample_tube(&reference_sdf(), cfg.probe_h, cfg.probe_res)?;
    let mut history = TrainHistory::default();
    let mut snaps: Vec<Option<MlpWeights>> = vec![None; budgets.len()];

    for step in 1..=cfg.budget_steps {
        let batch = draw_batch(&mut sampler, &cfg);
        let (loss, grad) = loss_and_grad(&weights, &batch, cfg.eikonal_weight)?;
        if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { step, loss: loss.total });
        }
        adam.step(&mut params, &grad, cfg.learning_rate_at(step));
        weights.set_params(&params);
        weights.steps_trained = step as u64;
        if step % cfg.log_every == 0 || step == cfg.budget_steps {
            history.rows.push(HistoryRow {
                step,
                data_loss: loss.data,
                eikonal_loss: loss.eikonal,
                eps_inf_probe: probe_eps(&weights, &probe)?,
            });
        }
        for (k, &b) in budgets.iter().enumerate() {
            if b == step {
                snaps[k] = Some(weights.clone());
            }
        }
    }
    Ok((snaps.into_iter().map(|w| w.expect("every budget reached")).collect(), history))
}

pub fn save_weights(weights: &MlpWeights, path: &Path) -> Result<()> {
    weights.save(path)
}

pub fn load_weights(path: &Path) -> Result<MlpWeights> {
    MlpWeights::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MlpWeights {
        init_weights(&[2, 16, 16, 1], 30.0, 7).unwrap()
    }

    fn batch() -> Vec<Sample> {
        let cfg = TrainConfig { batch_size: 16, ..Default::default() };
        draw_batch(&mut rng(3, SAMPLE_STREAM), &cfg)
    }

    #[test]
    fn init_bounds_and_determinism() {
        let w = small();
        assert_eq!(w.params(), small().params());
        assert_ne!(w.params(), init_weights(&[2, 16, 16, 1], 30.0, 8).unwrap().params());
        assert!(w.layers[0].weight.iter().all(|v| v.abs() <= 0.5));
        let b = (6.0f64 / 16.0).sqrt() / 30.0;
        assert!(w.layers[1].weight.iter().all(|v| v.abs() <= b));
        assert!(init_weights(&[2, 16, 8, 1], 30.0, 0).is_err());
        assert!(init_weights(&[2, 8, 8, 1], 30.0, 0).is_err());
    }

    #[test]
    fn forward_matches_field_evaluation() {
        let w = small();
        let field = ImplicitField::neural(w.clone());
        for p in [Point2::new(0.3, -0.7), Point2::new(1.2, 0.4), Point2::new(-1.9, 1.9)] {
            let (v, g) = network_value_grad(&w, p);
            let j = field.eval_jet(p).unwrap();
            assert!((v - j.value).abs() < 1e-10);
            assert!((g[0] - j.grad[0]).abs() < 1e-10 && (g[1] - j.grad[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let w = small();
        let b = batch();
        let (_, grad) = loss_and_grad(&w, &b, 0.1).unwrap();
        let params = w.params();
        let n = params.len();
        for k in (0..20).map(|i| (i * 97 + 5) % n) {
            let h = 1e-6;
            let eval = |d: f64| {
                let mut p = params.clone();
                p[k] += d;
                let mut w2 = w.clone();
                w2.set_params(&p);
                loss_and_grad(&w2, &b, 0.1).unwrap().0.total
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: fd {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn batch_composition() {
        let cfg = TrainConfig { batch_size: 512, ..Default::default() };
        let b = draw_batch(&mut rng(0, SAMPLE_STREAM), &cfg);
        assert_eq!(b.len(), 512);
        assert!(b[256..].iter().all(|s| s.in_band));
        assert!(b.iter().all(|s| cfg.bbox.contains(s.point)));
    }

    #[test]
    fn snapshots_have_prefix_property() {
        let cfg = TrainConfig { width: 16, batch_size: 32, log_every: 2, probe_res: 64, ..Default::default() };
        let (snaps, hist) = train_snapshots(&cfg, &[3, 5]).unwrap();
        let (w3, _) = train(&TrainConfig { budget_steps: 3, ..cfg.clone() }).unwrap();
        assert_eq!(snaps[0].params(), w3.params());
        assert_eq!(snaps[1].steps_trained, 5);
        assert_eq!(hist.rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![2, 4, 5]);
    }

    #[test]
    fn short_training_reduces_loss() {
        let cfg = TrainConfig { width: 16, batch_size: 64, budget_steps: 200, learning_rate: 1e-3, log_every: 10, probe_res: 64, ..Default::default() };
        let (_, hist) = train(&cfg).unwrap();
        let first = hist.rows.first().unwrap().data_loss;
        let last = hist.rows.last().unwrap().data_loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(train(&TrainConfig { learning_rate: 0.0, ..Default::default() }).is_err());
        assert!(train_snapshots(&TrainConfig::default(), &[0]).is_err());
    }
}
