use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::clustering::{Input, Similarity};
use super::layer::{train_layer, LayerModel};
use crate::data::{expand_codes, CodeMatrix, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::pca::{em_pca_fit, EmPcaOptions, PcaModel};
use crate::rng::RandomStream;

pub const FORMAT_VERSION: u32 = 1;

/// Hyperparameters a network was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    /// `k` of every hidden layer, bottom first.
    pub ks: Vec<usize>,
    pub delta: f64,
    pub v: usize,
    pub a: f64,
    pub similarity: Similarity,
    pub seed: u64,
}

impl ScheduleRecord {
    pub fn k1(&self) -> usize {
        self.ks[0]
    }

    pub fn k_last(&self) -> usize {
        *self.ks.last().unwrap()
    }
}

/// Everything [`train_network`] needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub schedule: Vec<usize>,
    /// Recorded for reference; the schedule itself is authoritative.
    pub delta: f64,
    pub v: usize,
    pub a: f64,
    /// Bottom-layer similarity; upper layers always use dot products.
    pub similarity: Similarity,
    pub pca_dims: usize,
    pub pca: EmPcaOptions,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(schedule: Vec<usize>, pca_dims: usize, seed: u64) -> Self {
        Self {
            schedule,
            delta: 0.5,
            v: 400,
            a: 0.5,
            similarity: Similarity::SquaredEuclidean,
            pca_dims,
            pca: EmPcaOptions::default(),
            seed,
        }
    }

    fn record(&self) -> ScheduleRecord {
        ScheduleRecord {
            ks: self.schedule.clone(),
            delta: self.delta,
            v: self.v,
            a: self.a,
            similarity: self.similarity,
            seed: self.seed,
        }
    }
}

/// A trained network: hidden layers bottom-up plus the PCA output head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub(crate) schedule: ScheduleRecord,
    pub(crate) layers: Vec<LayerModel>,
    pub(crate) pca: PcaModel,
}

/// Hidden layers plus the training codes of the top layer, before a head is fitted.
#[derive(Debug, Clone)]
pub struct HiddenStack {
    pub schedule: ScheduleRecord,
    pub layers: Vec<LayerModel>,
    pub top_codes: CodeMatrix,
    pub layer_times: Vec<Duration>,
}

/// Output of [`train_network_with_report`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: NetworkModel,
    pub embedding: DataMatrix,
    pub top_codes: CodeMatrix,
    pub layer_times: Vec<Duration>,
    pub pca_time: Duration,
}

/// Trains the hidden layers bottom-up.
pub fn train_hidden(input: &DataMatrix, config: &NetworkConfig) -> Result<HiddenStack> {
    if config.schedule.is_empty() {
        return Err(invalid("schedule has no layers"));
    }
    let n = input.n();
    let base = RandomStream::new(config.seed);
    let mut layers = Vec::with_capacity(config.schedule.len());
    let mut used_ks = Vec::with_capacity(config.schedule.len());
    let mut layer_times = Vec::with_capacity(config.schedule.len());
    let mut codes: Option<CodeMatrix> = None;
    for (l, &planned_k) in config.schedule.iter().enumerate() {
        let k = if planned_k > n {
            warn!("layer {l}: k = {planned_k} exceeds n = {n}; clamping");
            n
        } else {
            planned_k
        };
        let (input_l, similarity) = match &codes {
            None => (Input::Data(input), config.similarity),
            Some(c) => (Input::Codes(c), Similarity::DotProduct),
        };
        let start = Instant::now();
        let (layer, out) = train_layer(input_l, k, config.v, config.a, similarity, &base.with_layer(l as u32))?;
        let elapsed = start.elapsed();
        info!("layer {} (k = {k}) trained in {:.2?}", l + 1, elapsed);
        layer_times.push(elapsed);
        used_ks.push(k);
        layers.push(layer);
        codes = Some(out);
    }
    let mut schedule = config.record();
    schedule.ks = used_ks;
    Ok(HiddenStack {
        schedule,
        layers,
        top_codes: codes.unwrap(),
        layer_times,
    })
}

/// Fits a PCA head on the expanded top-layer codes and returns the model and embedding.
pub fn fit_head(
    stack: &HiddenStack,
    pca_dims: usize,
    options: &EmPcaOptions,
) -> Result<(NetworkModel, DataMatrix)> {
    let expanded = expand_codes(&stack.top_codes);
    let stream = RandomStream::new(stack.schedule.seed).with_layer(stack.layers.len() as u32);
    let pca = em_pca_fit(&expanded, pca_dims, options, &stream)?;
    let embedding = pca.transform(&expanded)?;
    let model = NetworkModel {
        schedule: stack.schedule.clone(),
        layers: stack.layers.clone(),
        pca,
    };
    Ok((model, embedding))
}

/// Trains hidden layers and the PCA head; returns the model and the
/// `pca_dims`-dimensional embedding of the training data.
pub fn train_network(input: &DataMatrix, config: &NetworkConfig) -> Result<(NetworkModel, DataMatrix)> {
    let out = train_network_with_report(input, config)?;
    Ok((out.model, out.embedding))
}

pub fn train_network_with_report(input: &DataMatrix, config: &NetworkConfig) -> Result<TrainOutput> {
    let stack = train_hidden(input, config)?;
    let start = Instant::now();
    let (model, embedding) = fit_head(&stack, config.pca_dims, &config.pca)?;
    let pca_time = start.elapsed();
    Ok(TrainOutput {
        model,
        embedding,
        top_codes: stack.top_codes,
        layer_times: stack.layer_times,
        pca_time,
    })
}

impl NetworkModel {
    pub fn new(schedule: ScheduleRecord, layers: Vec<LayerModel>, pca: PcaModel) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("a network needs at least one hidden layer"));
        }
        if layers.len() != schedule.ks.len() {
            return Err(invalid("schedule length differs from the layer count"));
        }
        for (l, layer) in layers.iter().enumerate() {
            if l > 0 {
                let prev = &layers[l - 1];
                let want = prev.v() * prev.k();
                if layer.input_dim() != want {
                    return Err(Error::DimensionMismatch {
                        expected: want,
                        found: layer.input_dim(),
                    });
                }
            }
        }
        let top = layers.last().unwrap();
        if pca.d() != top.v() * top.k() {
            return Err(Error::DimensionMismatch {
                expected: top.v() * top.k(),
                found: pca.d(),
            });
        }
        Ok(Self {
            schedule,
            layers,
            pca,
        })
    }

    pub fn schedule(&self) -> &ScheduleRecord {
        &self.schedule
    }

    pub fn layers(&self) -> &[LayerModel] {
        &self.layers
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.pca.p()
    }

    /// Codes of every hidden layer, bottom first.
    pub fn encode_layers(&self, input: &DataMatrix) -> Result<Vec<CodeMatrix>> {
        if input.d() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: input.d(),
            });
        }
        let mut out: Vec<CodeMatrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let codes = match out.last() {
                None => layer.encode(Input::Data(input))?,
                Some(prev) => layer.encode(Input::Codes(prev))?,
            };
            out.push(codes);
        }
        Ok(out)
    }

    /// Top hidden layer codes.
    pub fn encode(&self, input: &DataMatrix) -> Result<CodeMatrix> {
        Ok(self.encode_layers(input)?.pop().unwrap())
    }

    /// Low-dimensional embedding of `input`.
    pub fn transform(&self, input: &DataMatrix) -> Result<DataMatrix> {
        let codes = self.encode(input)?;
        self.pca.transform(&expand_codes(&codes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_dense(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = RandomStream::new(seed).rng();
        DataMatrix::dense(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn degenerate_self_coding() {
        let x = random_dense(12, 3, 1);
        let mut cfg = NetworkConfig::new(vec![12], 3, 5);
        cfg.v = 1;
        cfg.a = 1.0;
        let out = train_network_with_report(&x, &cfg).unwrap();
        // every sample is a center, so the codes are a permutation of 0..n
        let mut w = out.top_codes.winners().to_vec();
        w.sort_unstable();
        assert_eq!(w, (0..12).collect::<Vec<u32>>());
    }

    #[test]
    fn transform_reproduces_training_embedding() {
        let x = random_dense(80, 6, 2);
        let mut cfg = NetworkConfig::new(vec![40, 20, 10], 3, 9);
        cfg.v = 16;
        let out = train_network_with_report(&x, &cfg).unwrap();
        assert_eq!(out.model.encode(&x).unwrap(), out.top_codes);
        assert_eq!(out.model.transform(&x).unwrap(), out.embedding);
    }

    #[test]
    fn duplicate_rows_identical_output() {
        let x = random_dense(50, 4, 3);
        let mut cfg = NetworkConfig::new(vec![20, 10], 2, 1);
        cfg.v = 8;
        let (model, _) = train_network(&x, &cfg).unwrap();
        let probe = x.select_rows(&[3, 7, 3, 3]);
        let z = model.transform(&probe).unwrap();
        for j in 0..2 {
            assert_eq!(z.get(0, j), z.get(2, j));
            assert_eq!(z.get(0, j), z.get(3, j));
        }
    }

    #[test]
    fn transform_rejects_wrong_dimension() {
        let x = random_dense(30, 4, 3);
        let mut cfg = NetworkConfig::new(vec![10], 2, 1);
        cfg.v = 4;
        let (model, _) = train_network(&x, &cfg).unwrap();
        assert!(model.transform(&random_dense(3, 5, 1)).is_err());
    }

    #[test]
    fn oversized_k_is_clamped() {
        let x = random_dense(10, 3, 3);
        let mut cfg = NetworkConfig::new(vec![20, 10], 2, 1);
        cfg.v = 3;
        let out = train_network_with_report(&x, &cfg).unwrap();
        assert_eq!(out.model.layers()[0].k(), 10);
        assert_eq!(out.model.schedule().ks, vec![10, 10]);
    }
}
