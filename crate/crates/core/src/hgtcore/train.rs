use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::forward::{hgt_forward, node_features, MessageGraph};
use super::loss::infonce_on_tape;
use super::optim::Adam;
use super::params::{HgtConfig, HgtParams};
use super::tape::Tape;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hetgraph::{assert_no_leakage, TemporalSplit, AUTHOR};
use crate::scalar::Scalar;
use crate::semfactory::EmbeddingTable;

#[derive(Debug, Clone, PartialEq)]
pub struct CvclConfig {
    pub temperature: f64,
    pub n_neg: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Leave the positive out of the denominator.
    pub strict_eq1: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    /// Train on cold queries as well as warm authors.
    pub include_cold_anchors: bool,
}

impl Default for CvclConfig {
    fn default() -> Self {
        CvclConfig {
            temperature: 0.1,
            n_neg: 32,
            batch_size: 256,
            learning_rate: 1e-3,
            epochs: 30,
            strict_eq1: false,
            beta1: 0.9,
            beta2: 0.999,
            seed: 0,
            include_cold_anchors: true,
        }
    }
}

impl CvclConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.n_neg == 0 {
            return Err(Error::Config("n_neg must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        for b in [self.beta1, self.beta2] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("moment decay {b} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Trains the structural encoder on `split`'s train view (which should
/// already carry the semantic k-NN edges). Returns the weights and the mean
/// loss of every epoch.
pub fn train_cvcl<T: Scalar>(
    split: &TemporalSplit,
    features: &EmbeddingTable<f32>,
    hgt: &HgtConfig,
    config: &CvclConfig,
) -> Result<(HgtParams<T>, Vec<f64>)> {
    train_cvcl_with(split, features, hgt, config, |_, _| {})
}

/// [`train_cvcl`] with a callback receiving `(epoch, mean_loss)`.
pub fn train_cvcl_with<T: Scalar>(
    split: &TemporalSplit,
    features: &EmbeddingTable<f32>,
    hgt: &HgtConfig,
    config: &CvclConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(HgtParams<T>, Vec<f64>)> {
    assert_no_leakage(split)?;
    config.validate()?;
    if hgt.hidden != features.dim() {
        return Err(Error::Config(format!(
            "hidden dim {} must equal the embedding dim {}: structural and semantic \
             views are compared directly",
            hgt.hidden,
            features.dim()
        )));
    }
    let g = split.train_view();
    let mut params = HgtParams::<T>::init(hgt.clone(), features.dim(), g.schema().clone())?;
    let mg = MessageGraph::new(g, &params)?;
    let feats = node_features::<T>(g, features)?;

    let mut anchors = split.warm_authors();
    if config.include_cold_anchors {
        for id in split.cold_queries() {
            anchors.push(g.index_of(id).ok_or_else(|| Error::UnknownNode(id.clone()))?);
        }
    }
    anchors.sort_unstable();
    anchors.dedup();
    if anchors.is_empty() {
        return Err(Error::Empty("anchor set".into()));
    }
    let pool = g.nodes_of_type(AUTHOR);
    if pool.len() < 2 {
        return Err(Error::Empty("negative pool".into()));
    }

    // Drawn once so that every epoch scores the same objective.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let negatives: Vec<Vec<usize>> = anchors
        .iter()
        .map(|&a| {
            (0..config.n_neg)
                .map(|_| loop {
                    let n = pool[rng.random_range(0..pool.len())];
                    if n != a {
                        break n;
                    }
                })
                .collect()
        })
        .collect();
    let mut slot = vec![usize::MAX; g.node_count()];
    for (i, &a) in anchors.iter().enumerate() {
        slot[a] = i;
    }

    let tau = T::of(config.temperature);
    let mut opt = Adam::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        params.tensors(),
    );
    let mut order: Vec<usize> = (0..anchors.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let dim = feats.cols();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut losses = vec![0.0f64; anchors.len()];
        for batch in order.chunks(config.batch_size) {
            let targets: Vec<usize> = batch.iter().map(|&i| anchors[i]).collect();
            let mut tape = Tape::new();
            let vars = params.to_tape(&mut tape, true);
            let enc = hgt_forward(&mut tape, &params, &vars, &mg, &feats, &targets)?;

            let rows = enc.nodes.len();
            let gather = |pick: &dyn Fn(usize) -> usize| {
                let mut data = Vec::with_capacity(rows * dim);
                for &n in &enc.nodes {
                    data.extend_from_slice(feats.row(pick(slot[n])));
                }
                Tensor::new(rows, dim, data)
            };
            let pos = gather(&|i| anchors[i])?;
            let negs = (0..config.n_neg)
                .map(|j| gather(&|i| negatives[i][j]))
                .collect::<Result<Vec<_>>>()?;
            let (loss, per) =
                infonce_on_tape(&mut tape, enc.output, &pos, &negs, tau, config.strict_eq1)?;
            for (r, &n) in enc.nodes.iter().enumerate() {
                losses[slot[n]] = tape.value(per).data()[r].as_f64();
            }
            let grads = tape.backward(loss)?;
            let g: Vec<_> = vars.iter().map(|&v| grads.get_ref(v)).collect();
            opt.step(params.tensors_mut(), &g);
        }
        let mean = losses.iter().sum::<f64>() / anchors.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("epoch {epoch} loss")));
        }
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok((params, history))
}

/// `epoch,mean_loss` lines with a header.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        s.push_str(&format!("{},{l}\n", i + 1));
    }
    s
}
