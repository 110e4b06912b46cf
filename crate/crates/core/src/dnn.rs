//! From-scratch fully connected regression network with Adam training.
//!
//! The corrector maps the receiver's estimated angles plus the target
//! distance, `(theta_el_est, theta_az_est, D)`, to the true angles
//! `(theta_el, theta_az)` through hidden layers of 20, 50 and 10 units.
//! Inputs and targets are min/max normalized to [-1, 1] with constants
//! frozen from the training split and stored in the model file.
//!
//! Everything is deterministic: seeded Xavier-uniform init, a seeded
//! shuffle for the train/validation split, full-batch Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::doa::DoaSample;

#[derive(Debug, Error)]
pub enum DnnError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("dataset too small: {0} usable samples, need at least 10")]
    DatasetTooSmall(usize),
    #[error("model file: {0}")]
    BadModel(String),
}

pub const STANDARD_WIDTHS: [usize; 5] = [3, 20, 50, 10, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    fn from_tag(tag: &str) -> Result<Self, DnnError> {
        match tag {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(DnnError::BadModel(format!("unknown activation `{other}`"))),
        }
    }
}

/// Per-feature affine map to [-1, 1] (collapses to the constant 0 when a
/// feature is constant, e.g. a single-distance dataset).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNorm {
    pub min: f64,
    pub max: f64,
}

impl FeatureNorm {
    fn from_values<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Self { min, max }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            0.0
        } else {
            2.0 * (x - self.min) / span - 1.0
        }
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            self.min
        } else {
            (y + 1.0) / 2.0 * span + self.min
        }
    }
}

/// Fully connected network. Weight matrices are row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
    pub input_norm: Vec<FeatureNorm>,
    pub output_norm: Vec<FeatureNorm>,
}

impl Mlp {
    /// Seeded Xavier-uniform initialization.
    pub fn init(widths: &[usize], activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Self {
            widths: widths.to_vec(),
            weights,
            biases,
            activation,
            input_norm: vec![FeatureNorm { min: -1.0, max: 1.0 }; widths[0]],
            output_norm: vec![FeatureNorm { min: -1.0, max: 1.0 }; *widths.last().unwrap()],
        }
    }

    pub fn standard(seed: u64) -> Self {
        Self::init(&STANDARD_WIDTHS, Activation::Tanh, seed)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Forward pass in normalized space: affine + activation through the
    /// hidden layers, affine output.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.widths[0]);
        let mut act = input.to_vec();
        let last = self.widths.len() - 2;
        for l in 0..=last {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = self.biases[l][o];
                for (w, a) in row.iter().zip(&act) {
                    acc += w * a;
                }
                next[o] = if l < last { self.activation.apply(acc) } else { acc };
            }
            act = next;
        }
        act
    }

    /// Raw-unit prediction: normalize inputs, run, denormalize outputs.
    pub fn predict(&self, input_raw: &[f64]) -> Vec<f64> {
        let normalized: Vec<f64> = input_raw
            .iter()
            .zip(&self.input_norm)
            .map(|(&x, n)| n.normalize(x))
            .collect();
        self.forward(&normalized)
            .iter()
            .zip(&self.output_norm)
            .map(|(&y, n)| n.denormalize(y))
            .collect()
    }
}

/// Mean over the batch of the summed squared output errors.
pub fn loss(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64, DnnError> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(DnnError::EmptyBatch);
    }
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        for (a, b) in p.iter().zip(t) {
            acc += (a - b) * (a - b);
        }
    }
    Ok(acc / pred.len() as f64)
}

/// Parameter gradients with the same shapes as the weights and biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Exact reverse-mode gradients of [`loss`] over a batch, in normalized
/// space. Also returns the loss value.
pub fn gradient(m: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(Gradients, f64), DnnError> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(DnnError::EmptyBatch);
    }
    let layers = m.widths.len() - 1;
    let mut gw: Vec<Vec<f64>> = m.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = m.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let n = inputs.len() as f64;
    let mut total_loss = 0.0;

    for (x, t) in inputs.iter().zip(targets) {
        // Forward, keeping activations per layer.
        let mut acts: Vec<Vec<f64>> = vec![x.clone()];
        for l in 0..layers {
            let (n_in, n_out) = (m.widths[l], m.widths[l + 1]);
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &m.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = m.biases[l][o];
                for (w, a) in row.iter().zip(&acts[l]) {
                    acc += w * a;
                }
                next[o] = if l < layers - 1 { m.activation.apply(acc) } else { acc };
            }
            acts.push(next);
        }
        let out = &acts[layers];
        let mut delta: Vec<f64> = out
            .iter()
            .zip(t)
            .map(|(&y, &tt)| {
                total_loss += (y - tt) * (y - tt);
                2.0 * (y - tt) / n
            })
            .collect();

        for l in (0..layers).rev() {
            let n_in = m.widths[l];
            let prev = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                gb[l][o] += d;
                let row = &mut gw[l][o * n_in..(o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let mut prev_delta = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &m.weights[l][o * n_in..(o + 1) * n_in];
                    for (pd, &w) in prev_delta.iter_mut().zip(row) {
                        *pd += d * w;
                    }
                }
                for (pd, &a) in prev_delta.iter_mut().zip(&acts[l]) {
                    *pd *= m.activation.derivative_from_output(a);
                }
                delta = prev_delta;
            }
        }
    }
    Ok((Gradients { weights: gw, biases: gb }, total_loss / n))
}

/// Training hyperparameters. The step size is cosine-annealed from
/// `learning_rate` to zero across the run, so the full-batch iterates
/// settle instead of oscillating at the optimizer's noise floor.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Training fraction of the shuffled dataset.
    pub split: f64,
    pub seed: u64,
    pub activation: Activation,
}

impl TrainConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            iterations: 20_000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            split: 0.9,
            seed,
            activation: Activation::Tanh,
        }
    }
}

/// One training example in raw units: `(theta_el_est, theta_az_est, D)` in,
/// `(theta_el_true, theta_az_true)` out.
#[derive(Debug, Clone)]
pub struct TrainRow {
    pub input: [f64; 3],
    pub target: [f64; 2],
}

/// Convert dataset samples to training rows, dropping flagged samples.
pub fn rows_from_samples(samples: &[DoaSample]) -> Vec<TrainRow> {
    samples
        .iter()
        .filter_map(|s| {
            s.estimate.map(|(az, el)| TrainRow {
                input: [el, az, s.distance_m],
                target: [s.theta_el_true, s.theta_az_true],
            })
        })
        .collect()
}

/// Training record: per-iteration loss in raw units (radians squared) and
/// the final validation figures.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: f64,
    pub train_size: usize,
    pub val_size: usize,
}

impl TrainReport {
    pub fn loss_history_csv(&self) -> String {
        let mut out = String::from("iteration,train_loss_rad2\n");
        for (i, l) in self.train_loss.iter().enumerate() {
            out.push_str(&format!("{},{:.16e}\n", i + 1, l));
        }
        out
    }

    /// Position error equivalent at a given distance: D * sqrt(loss),
    /// treating the two-axis summed squared angular error as a squared
    /// transverse displacement over D (small-angle).
    pub fn val_position_error_m(&self, distance_m: f64) -> f64 {
        distance_m * self.val_loss.sqrt()
    }
}

/// Deterministic split, full-batch Adam training.
pub fn train(rows: &[TrainRow], cfg: &TrainConfig) -> Result<(Mlp, TrainReport), DnnError> {
    if rows.len() < 10 {
        return Err(DnnError::DatasetTooSmall(rows.len()));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Fisher-Yates with the seeded stream.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_train = ((rows.len() as f64) * cfg.split).floor() as usize;
    let n_train = n_train.clamp(1, rows.len() - 1);
    let train_rows: Vec<&TrainRow> = order[..n_train].iter().map(|&i| &rows[i]).collect();
    let val_rows: Vec<&TrainRow> = order[n_train..].iter().map(|&i| &rows[i]).collect();

    let mut m = Mlp::init(&STANDARD_WIDTHS, cfg.activation, cfg.seed);
    for k in 0..3 {
        m.input_norm[k] = FeatureNorm::from_values(train_rows.iter().map(|r| &r.input[k]));
    }
    for k in 0..2 {
        m.output_norm[k] = FeatureNorm::from_values(train_rows.iter().map(|r| &r.target[k]));
    }

    let norm_in = |r: &TrainRow| -> Vec<f64> {
        r.input.iter().zip(&m.input_norm).map(|(&x, n)| n.normalize(x)).collect()
    };
    let norm_out = |r: &TrainRow| -> Vec<f64> {
        r.target.iter().zip(&m.output_norm).map(|(&x, n)| n.normalize(x)).collect()
    };
    let inputs: Vec<Vec<f64>> = train_rows.iter().map(|r| norm_in(r)).collect();
    let targets: Vec<Vec<f64>> = train_rows.iter().map(|r| norm_out(r)).collect();

    // Output denormalization scales, to report the loss in radians^2.
    let out_scale: Vec<f64> = m
        .output_norm
        .iter()
        .map(|n| ((n.max - n.min) / 2.0).max(0.0))
        .collect();

    let mut mw: Vec<Vec<f64>> = m.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut vw = mw.clone();
    let mut mb: Vec<Vec<f64>> = m.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut vb = mb.clone();
    let mut history = Vec::with_capacity(cfg.iterations);

    for step in 1..=cfg.iterations {
        let (g, _) = gradient(&m, &inputs, &targets)?;
        // Raw-unit loss for the history, before this step's update.
        let mut raw_loss = 0.0;
        for (x, t) in inputs.iter().zip(&targets) {
            let y = m.forward(x);
            for k in 0..2 {
                let d = (y[k] - t[k]) * out_scale[k];
                raw_loss += d * d;
            }
        }
        history.push(raw_loss / inputs.len() as f64);

        let bc1 = 1.0 - cfg.beta1.powi(step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(step as i32);
        let anneal = 0.5
            * (1.0 + (std::f64::consts::PI * (step - 1) as f64 / cfg.iterations as f64).cos());
        let lr = cfg.learning_rate * anneal;
        for l in 0..m.weights.len() {
            for (i, gi) in g.weights[l].iter().enumerate() {
                let mhat = {
                    mw[l][i] = cfg.beta1 * mw[l][i] + (1.0 - cfg.beta1) * gi;
                    mw[l][i] / bc1
                };
                let vhat = {
                    vw[l][i] = cfg.beta2 * vw[l][i] + (1.0 - cfg.beta2) * gi * gi;
                    vw[l][i] / bc2
                };
                m.weights[l][i] -= lr * mhat / (vhat.sqrt() + cfg.epsilon);
            }
            for (i, gi) in g.biases[l].iter().enumerate() {
                let mhat = {
                    mb[l][i] = cfg.beta1 * mb[l][i] + (1.0 - cfg.beta1) * gi;
                    mb[l][i] / bc1
                };
                let vhat = {
                    vb[l][i] = cfg.beta2 * vb[l][i] + (1.0 - cfg.beta2) * gi * gi;
                    vb[l][i] / bc2
                };
                m.biases[l][i] -= lr * mhat / (vhat.sqrt() + cfg.epsilon);
            }
        }
    }

    // Validation loss in raw units.
    let mut val_loss = 0.0;
    for r in &val_rows {
        let y = m.predict(&r.input);
        for k in 0..2 {
            let d = y[k] - r.target[k];
            val_loss += d * d;
        }
    }
    val_loss /= val_rows.len().max(1) as f64;

    Ok((
        m,
        TrainReport {
            train_loss: history,
            val_loss,
            train_size: n_train,
            val_size: val_rows.len(),
        },
    ))
}

/// Before/after error statistics of a model over a dataset.
#[derive(Debug, Clone, Copy)]
pub struct EvalStats {
    /// Root mean squared two-axis angular error, radians.
    pub rms_uncorrected_rad: f64,
    pub rms_corrected_rad: f64,
    /// Root-sum-square transverse position error at the given distance.
    pub position_uncorrected_m: f64,
    pub position_corrected_m: f64,
}

/// Per-sample corrected angles plus aggregate error statistics at the
/// given distance (position error = D * tan(angular error) per axis,
/// reported root-sum-square).
pub fn evaluate(m: &Mlp, rows: &[TrainRow], distance_m: f64) -> Result<EvalStats, DnnError> {
    if rows.is_empty() {
        return Err(DnnError::EmptyBatch);
    }
    let mut before = 0.0;
    let mut after = 0.0;
    let mut pos_before = 0.0;
    let mut pos_after = 0.0;
    for r in rows {
        let y = m.predict(&r.input);
        for k in 0..2 {
            let db = r.input[k] - r.target[k];
            let da = y[k] - r.target[k];
            before += db * db;
            after += da * da;
            pos_before += (distance_m * db.tan()).powi(2);
            pos_after += (distance_m * da.tan()).powi(2);
        }
    }
    let n = rows.len() as f64;
    Ok(EvalStats {
        rms_uncorrected_rad: (before / n).sqrt(),
        rms_corrected_rad: (after / n).sqrt(),
        position_uncorrected_m: (pos_before / n).sqrt(),
        position_corrected_m: (pos_after / n).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

const MODEL_HEADER: &str = "mlp-v1";

/// Versioned text serialization, parameters at 17 significant digits.
pub fn save_model(m: &Mlp) -> String {
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    out.push_str(&format!("activation {}\n", m.activation.tag()));
    let widths: Vec<String> = m.widths.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("widths {}\n", widths.join(" ")));
    let fmt_norms = |norms: &[FeatureNorm]| {
        norms
            .iter()
            .map(|n| format!("{:.16e} {:.16e}", n.min, n.max))
            .collect::<Vec<_>>()
            .join(" ")
    };
    out.push_str(&format!("input_norm {}\n", fmt_norms(&m.input_norm)));
    out.push_str(&format!("output_norm {}\n", fmt_norms(&m.output_norm)));
    for l in 0..m.weights.len() {
        out.push_str(&format!("layer {l}\n"));
        let n_in = m.widths[l];
        for o in 0..m.widths[l + 1] {
            let row: Vec<String> = m.weights[l][o * n_in..(o + 1) * n_in]
                .iter()
                .map(|w| format!("{w:.16e}"))
                .collect();
            out.push_str(&format!("w {}\n", row.join(" ")));
        }
        let biases: Vec<String> = m.biases[l].iter().map(|b| format!("{b:.16e}")).collect();
        out.push_str(&format!("b {}\n", biases.join(" ")));
    }
    out.push_str("end\n");
    out
}

pub fn load_model(text: &str) -> Result<Mlp, DnnError> {
    let mut lines = text.lines();
    let bad = |msg: &str| DnnError::BadModel(msg.to_string());
    if lines.next() != Some(MODEL_HEADER) {
        return Err(bad("missing header"));
    }
    let mut activation = None;
    let mut widths: Vec<usize> = Vec::new();
    let mut input_norm = Vec::new();
    let mut output_norm = Vec::new();
    let mut weights: Vec<Vec<f64>> = Vec::new();
    let mut biases: Vec<Vec<f64>> = Vec::new();

    let parse_norms = |rest: &str| -> Result<Vec<FeatureNorm>, DnnError> {
        let nums: Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse).collect();
        let nums = nums.map_err(|_| bad("non-numeric normalization constant"))?;
        if nums.len() % 2 != 0 {
            return Err(bad("normalization constants must come in min/max pairs"));
        }
        Ok(nums.chunks(2).map(|c| FeatureNorm { min: c[0], max: c[1] }).collect())
    };

    for line in lines {
        let line = line.trim();
        if line.is_empty() || line == "end" {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "activation" => activation = Some(Activation::from_tag(rest.trim())?),
            "widths" => {
                widths = rest
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("non-numeric width"))?;
            }
            "input_norm" => input_norm = parse_norms(rest)?,
            "output_norm" => output_norm = parse_norms(rest)?,
            "layer" => {
                weights.push(Vec::new());
                biases.push(Vec::new());
            }
            "w" => {
                let layer = weights.last_mut().ok_or_else(|| bad("w before layer"))?;
                for v in rest.split_whitespace() {
                    layer.push(v.parse().map_err(|_| bad("non-numeric weight"))?);
                }
            }
            "b" => {
                let layer = biases.last_mut().ok_or_else(|| bad("b before layer"))?;
                for v in rest.split_whitespace() {
                    layer.push(v.parse().map_err(|_| bad("non-numeric bias"))?);
                }
            }
            other => return Err(bad(&format!("unknown record `{other}`"))),
        }
    }

    let activation = activation.ok_or_else(|| bad("missing activation"))?;
    if widths.len() < 2 {
        return Err(bad("missing widths"));
    }
    if weights.len() != widths.len() - 1 {
        return Err(bad("layer count does not match widths"));
    }
    for l in 0..weights.len() {
        if weights[l].len() != widths[l] * widths[l + 1] || biases[l].len() != widths[l + 1] {
            return Err(bad("parameter shape does not match widths"));
        }
    }
    if input_norm.len() != widths[0] || output_norm.len() != *widths.last().unwrap() {
        return Err(bad("normalization constants do not match widths"));
    }
    for m in &weights {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
    }
    Ok(Mlp { widths, weights, biases, activation, input_norm, output_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_rows(n: usize) -> Vec<TrainRow> {
        // A smooth synthetic map the network can fit: a fixed affine
        // distortion of the angles.
        (0..n)
            .map(|i| {
                let a = -0.2 + 0.4 * (i as f64) / (n as f64 - 1.0);
                let b = 0.2 - 0.4 * (i as f64) / (n as f64 - 1.0);
                TrainRow {
                    input: [1.05 * a + 0.01, 0.95 * b - 0.02, 0.62],
                    target: [a, b],
                }
            })
            .collect()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut m = Mlp::standard(0);
        for w in m.weights.iter_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        let y = m.forward(&[0.3, -0.7, 0.9]);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_is_seed_stable() {
        let m1 = Mlp::standard(7);
        let m2 = Mlp::standard(7);
        assert_eq!(m1.forward(&[0.1, 0.2, 0.3]), m2.forward(&[0.1, 0.2, 0.3]));
    }

    #[test]
    fn relu_identity_construction_copies_inputs() {
        // Hand-built parameters: each layer passes the first two inputs
        // through positively weighted identity paths.
        let widths = [3usize, 20, 50, 10, 2];
        let mut m = Mlp::init(&widths, Activation::Relu, 0);
        for l in 0..4 {
            m.weights[l].iter_mut().for_each(|v| *v = 0.0);
            m.biases[l].iter_mut().for_each(|v| *v = 0.0);
            let n_in = widths[l];
            for k in 0..2.min(widths[l + 1]) {
                m.weights[l][k * n_in + k] = 1.0;
            }
        }
        let y = m.forward(&[0.4, 0.3, 0.9]);
        assert!((y[0] - 0.4).abs() < 1e-15);
        assert!((y[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_direct_evaluation() {
        let pred = vec![vec![0.001, 0.002]];
        let truth = vec![vec![0.0, 0.0]];
        let l = loss(&pred, &truth).unwrap();
        assert!((l - 5e-6).abs() < 1e-18);
    }

    #[test]
    fn loss_is_mean_invariant_under_duplication() {
        let pred = vec![vec![0.1, -0.2], vec![0.3, 0.0]];
        let truth = vec![vec![0.0, 0.0], vec![0.0, 0.1]];
        let l1 = loss(&pred, &truth).unwrap();
        let l2 = loss(
            &[pred.clone(), pred.clone()].concat(),
            &[truth.clone(), truth.clone()].concat(),
        )
        .unwrap();
        assert!((l1 - l2).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(loss(&[], &[]), Err(DnnError::EmptyBatch)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..4 {
            let widths = [3usize, 5, 4, 2];
            let mut m = Mlp::init(&widths, Activation::Tanh, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let inputs: Vec<Vec<f64>> =
                (0..6).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let targets: Vec<Vec<f64>> =
                (0..6).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let (g, _) = gradient(&m, &inputs, &targets).unwrap();

            let h = 1e-5;
            let eval = |m: &Mlp| {
                let pred: Vec<Vec<f64>> = inputs.iter().map(|x| m.forward(x)).collect();
                loss(&pred, &targets).unwrap()
            };
            for l in 0..widths.len() - 1 {
                for i in (0..m.weights[l].len()).step_by(3) {
                    let orig = m.weights[l][i];
                    m.weights[l][i] = orig + h;
                    let fp = eval(&m);
                    m.weights[l][i] = orig - h;
                    let fm = eval(&m);
                    m.weights[l][i] = orig;
                    let fd = (fp - fm) / (2.0 * h);
                    let an = g.weights[l][i];
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                    assert!(rel < 1e-6, "layer {l} w[{i}]: fd {fd} vs {an}");
                }
                for i in 0..m.biases[l].len() {
                    let orig = m.biases[l][i];
                    m.biases[l][i] = orig + h;
                    let fp = eval(&m);
                    m.biases[l][i] = orig - h;
                    let fm = eval(&m);
                    m.biases[l][i] = orig;
                    let fd = (fp - fm) / (2.0 * h);
                    let an = g.biases[l][i];
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                    assert!(rel < 1e-6, "layer {l} b[{i}]: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn gradient_of_duplicated_batch_is_unchanged() {
        let m = Mlp::init(&[3, 4, 2], Activation::Tanh, 3);
        let inputs = vec![vec![0.1, -0.3, 0.8], vec![-0.5, 0.2, 0.4]];
        let targets = vec![vec![0.0, 0.1], vec![0.2, -0.1]];
        let (g1, _) = gradient(&m, &inputs, &targets).unwrap();
        let (g2, _) = gradient(
            &m,
            &[inputs.clone(), inputs.clone()].concat(),
            &[targets.clone(), targets.clone()].concat(),
        )
        .unwrap();
        for l in 0..2 {
            for (a, b) in g1.weights[l].iter().zip(&g2.weights[l]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let rows = tiny_rows(40);
        let mut cfg = TrainConfig::standard(5);
        cfg.iterations = 50;
        let (m1, _) = train(&rows, &cfg).unwrap();
        let (m2, _) = train(&rows, &cfg).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn identity_map_is_learnable() {
        // theta_est == theta_true: training should drive validation loss
        // to numerical noise.
        let rows: Vec<TrainRow> = (0..60)
            .map(|i| {
                let a = -0.25 + 0.5 * (i as f64) / 59.0;
                let b = 0.25 - 0.5 * (i as f64) / 59.0;
                TrainRow { input: [a, b, 0.62], target: [a, b] }
            })
            .collect();
        let cfg = TrainConfig::standard(2);
        let (_, report) = train(&rows, &cfg).unwrap();
        assert!(report.val_loss < 1e-8, "val loss {}", report.val_loss);
    }

    #[test]
    fn normalization_round_trip() {
        let n = FeatureNorm { min: -0.3, max: 0.7 };
        for x in [-0.3, -0.1, 0.0, 0.25, 0.7] {
            assert!((n.denormalize(n.normalize(x)) - x).abs() < 1e-12);
        }
        let degenerate = FeatureNorm { min: 0.62, max: 0.62 };
        assert_eq!(degenerate.normalize(0.62), 0.0);
    }

    #[test]
    fn model_file_round_trip() {
        let rows = tiny_rows(30);
        let mut cfg = TrainConfig::standard(8);
        cfg.iterations = 20;
        let (m, _) = train(&rows, &cfg).unwrap();
        let text = save_model(&m);
        let back = load_model(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn corrupt_model_is_rejected() {
        assert!(load_model("nonsense").is_err());
        let rows = tiny_rows(30);
        let mut cfg = TrainConfig::standard(8);
        cfg.iterations = 5;
        let (m, _) = train(&rows, &cfg).unwrap();
        let text = save_model(&m).replace("widths 3 20 50 10 2", "widths 3 20 50 10 3");
        assert!(load_model(&text).is_err());
    }
}
