//! A small fully connected network trained by minibatch gradient descent.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::data::DataMatrix;
use crate::error::{invalid, Error, Result};
use crate::rng::{subsample_without_replacement, Purpose, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Half the squared error, summed over outputs.
    Squared,
    /// Binary cross-entropy per output; requires a sigmoid output.
    CrossEntropy,
}

/// Rectifier hidden layers followed by a sigmoid or linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// `weights[l]` is `in × out`.
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    pub(crate) output: OutputActivation,
    /// Dropout rate of every hidden layer.
    pub(crate) dropout: Vec<f64>,
}

/// Parameter gradients, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn check_sizes(sizes: &[usize], dropout: &[f64]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(invalid(format!("layer sizes {sizes:?} need at least two positive entries")));
    }
    if dropout.len() != sizes.len() - 2 {
        return Err(invalid(format!(
            "{} dropout rates given for {} hidden layers",
            dropout.len(),
            sizes.len() - 2
        )));
    }
    if dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
        return Err(invalid("dropout rates must lie in [0, 1)"));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl MlpModel {
    /// Random fan-in scaled uniform weights and zero biases. Hidden layers use
    /// the limit `sqrt(6 / fan_in)`, the output layer `sqrt(3 / fan_in)`.
    pub fn new(sizes: &[usize], output: OutputActivation, dropout: Vec<f64>, stream: &RandomStream) -> Result<Self> {
        check_sizes(sizes, &dropout)?;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let last = l == sizes.len() - 2;
            let limit = (if last { 3.0 } else { 6.0 } / fan_in as f64).sqrt();
            let mut rng = stream.with_purpose(Purpose::WeightInit).with_index(l as u32).rng();
            weights.push(Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit)));
        }
        let biases = sizes[1..].iter().map(|&m| Array1::zeros(m)).collect();
        Ok(Self {
            weights,
            biases,
            output,
            dropout,
        })
    }

    /// All-zero parameters.
    pub fn zeros(sizes: &[usize], output: OutputActivation, dropout: Vec<f64>) -> Result<Self> {
        check_sizes(sizes, &dropout)?;
        Ok(Self {
            weights: sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: sizes[1..].iter().map(|&m| Array1::zeros(m)).collect(),
            output,
            dropout,
        })
    }

    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        output: OutputActivation,
        dropout: Vec<f64>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(invalid("need one bias vector per weight matrix"));
        }
        let mut sizes = vec![weights[0].nrows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != sizes[l] || b.len() != w.ncols() {
                return Err(invalid(format!("layer {l} does not chain with its neighbors")));
            }
            sizes.push(w.ncols());
        }
        check_sizes(&sizes, &dropout)?;
        let finite = weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(invalid("parameters must be finite"));
        }
        Ok(Self {
            weights,
            biases,
            output,
            dropout,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].nrows()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().ncols()
    }

    pub fn output(&self) -> OutputActivation {
        self.output
    }

    pub fn dropout(&self) -> &[f64] {
        &self.dropout
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    fn affine(&self, l: usize, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights[l]);
        z += &self.biases[l];
        z
    }

    /// Forward pass without dropout.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.weights.len() - 1;
        let mut a = x.to_owned();
        for l in 0..=last {
            let mut z = self.affine(l, &a.view());
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else if self.output == OutputActivation::Sigmoid {
                z.mapv_inplace(sigmoid);
            }
            a = z;
        }
        a
    }

    /// Mean batch loss and its gradients. With `dropout_rng` set, hidden units
    /// are dropped and the survivors scaled by `1 / (1 − p)`.
    fn backprop(
        &self,
        x: ArrayView2<f64>,
        t: ArrayView2<f64>,
        loss: Loss,
        mut dropout_rng: Option<&mut impl Rng>,
    ) -> (f64, Gradients) {
        let last = self.weights.len() - 1;
        let b = x.nrows() as f64;
        // inputs to every layer, and the derivative mask of each hidden layer
        let mut inputs: Vec<Array2<f64>> = vec![x.to_owned()];
        let mut masks: Vec<Array2<f64>> = Vec::with_capacity(last);
        for l in 0..last {
            let z = self.affine(l, &inputs[l].view());
            let mut mask = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if let Some(rng) = dropout_rng.as_deref_mut() {
                let p = self.dropout[l];
                if p > 0.0 {
                    let keep = 1.0 / (1.0 - p);
                    mask.mapv_inplace(|m| if rng.random::<f64>() < p { 0.0 } else { m * keep });
                }
            }
            // the mask is zero wherever the rectifier is, so this is relu(z) with dropout
            inputs.push(z * &mask);
            masks.push(mask);
        }
        let z = self.affine(last, &inputs[last].view());
        let (value, mut delta) = match (loss, self.output) {
            (Loss::CrossEntropy, _) => {
                let value = Zip::from(&z).and(&t).fold(0.0, |acc, &z, &t| acc + softplus(z) - t * z) / b;
                let delta = Zip::from(&z).and(&t).map_collect(|&z, &t| (sigmoid(z) - t) / b);
                (value, delta)
            }
            (Loss::Squared, OutputActivation::Linear) => {
                let value = Zip::from(&z).and(&t).fold(0.0, |acc, &z, &t| acc + 0.5 * (z - t) * (z - t)) / b;
                let delta = Zip::from(&z).and(&t).map_collect(|&z, &t| (z - t) / b);
                (value, delta)
            }
            (Loss::Squared, OutputActivation::Sigmoid) => {
                let o = z.mapv(sigmoid);
                let value = Zip::from(&o).and(&t).fold(0.0, |acc, &o, &t| acc + 0.5 * (o - t) * (o - t)) / b;
                let delta = Zip::from(&o).and(&t).map_collect(|&o, &t| (o - t) * o * (1.0 - o) / b);
                (value, delta)
            }
        };
        let mut gw = Vec::with_capacity(last + 1);
        let mut gb = Vec::with_capacity(last + 1);
        for l in (0..=last).rev() {
            gw.push(inputs[l].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back *= &masks[l - 1];
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        (
            value,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }
}

fn check_loss(model: &MlpModel, loss: Loss) -> Result<()> {
    if loss == Loss::CrossEntropy && model.output != OutputActivation::Sigmoid {
        return Err(invalid("cross-entropy loss needs a sigmoid output"));
    }
    Ok(())
}

/// Mean loss over the rows of `x` and the exact parameter gradients, with dropout disabled.
pub fn loss_and_gradients(
    model: &MlpModel,
    x: ArrayView2<f64>,
    t: ArrayView2<f64>,
    loss: Loss,
) -> Result<(f64, Gradients)> {
    check_loss(model, loss)?;
    if x.ncols() != model.input_dim() || t.ncols() != model.output_dim() || x.nrows() != t.nrows() {
        return Err(invalid("input or target shape does not match the model"));
    }
    Ok(model.backprop(x, t, loss, None::<&mut rand_chacha::ChaCha8Rng>))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Classical momentum coefficient; 0 is plain gradient descent.
    pub momentum: f64,
    pub loss: Loss,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 0.1,
            momentum: 0.0,
            loss: Loss::CrossEntropy,
        }
    }
}

/// Rows of `m` as an ndarray matrix.
pub fn to_array(m: &DataMatrix) -> Array2<f64> {
    let dense = m.to_dense();
    Array2::from_shape_vec((m.n(), m.d()), dense.as_dense().unwrap().to_vec()).unwrap()
}

pub fn from_array(a: &Array2<f64>) -> DataMatrix {
    DataMatrix::dense(a.nrows(), a.ncols(), a.iter().copied().collect()).unwrap()
}

/// Trains `model` in place and returns the mean training loss of every epoch.
///
/// Every epoch visits the samples in a fresh random order, split into
/// minibatches of `batch_size`.
pub fn mlp_train(
    model: &mut MlpModel,
    inputs: &DataMatrix,
    targets: &DataMatrix,
    options: &TrainOptions,
    stream: &RandomStream,
) -> Result<Vec<f64>> {
    check_loss(model, options.loss)?;
    if inputs.n() != targets.n() {
        return Err(Error::DimensionMismatch {
            expected: inputs.n(),
            found: targets.n(),
        });
    }
    if inputs.d() != model.input_dim() || targets.d() != model.output_dim() {
        return Err(invalid(format!(
            "model maps {} → {} but data is {} → {}",
            model.input_dim(),
            model.output_dim(),
            inputs.d(),
            targets.d()
        )));
    }
    if !(options.learning_rate > 0.0) || options.batch_size == 0 || inputs.n() == 0 {
        return Err(invalid("need a positive learning rate, batch size and sample count"));
    }
    if !(0.0..1.0).contains(&options.momentum) {
        return Err(invalid("momentum must lie in [0, 1)"));
    }
    let x = to_array(inputs);
    let t = to_array(targets);
    let n = x.nrows();
    let mut vw: Vec<Array2<f64>> = model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
    let mut vb: Vec<Array1<f64>> = model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
    let mut trace = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        let order = subsample_without_replacement(&stream.with_purpose(Purpose::Shuffle).with_index(epoch as u32), n, n)?;
        let mut rng = stream.with_purpose(Purpose::Dropout).with_index(epoch as u32).rng();
        let mut total = 0.0;
        for batch in order.chunks(options.batch_size) {
            let xb = x.select(Axis(0), batch);
            let tb = t.select(Axis(0), batch);
            let (value, g) = model.backprop(xb.view(), tb.view(), options.loss, Some(&mut rng));
            total += value * batch.len() as f64;
            for l in 0..model.weights.len() {
                vw[l] *= options.momentum;
                vw[l].scaled_add(-options.learning_rate, &g.weights[l]);
                model.weights[l] += &vw[l];
                vb[l] *= options.momentum;
                vb[l].scaled_add(-options.learning_rate, &g.biases[l]);
                model.biases[l] += &vb[l];
            }
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        log::debug!("epoch {}: loss {mean:.6}", epoch + 1);
        trace.push(mean);
    }
    Ok(trace)
}

/// Forward pass over all rows of `inputs`, dropout disabled.
pub fn mlp_predict(model: &MlpModel, inputs: &DataMatrix) -> Result<DataMatrix> {
    if inputs.d() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: inputs.d(),
        });
    }
    const CHUNK: usize = 1024;
    let mut out = Array2::zeros((inputs.n(), model.output_dim()));
    let mut start = 0;
    while start < inputs.n() {
        let end = (start + CHUNK).min(inputs.n());
        let rows: Vec<usize> = (start..end).collect();
        let x = to_array(&inputs.select_rows(&rows));
        out.slice_mut(s![start..end, ..]).assign(&model.forward(x.view()));
        start = end;
    }
    Ok(from_array(&out))
}
