//! Round-based federated training with depth-sliced circular aggregation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_model, ModelSpec, ModelVariant};
use crate::autodiff::vjp_with;
use crate::config::FederationConfig;
use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::learning::{evaluate, qheterofl_loss, quorus_loss, AdamState, LossBreakdown};

/// Resultant length below which a set of angles has no meaningful mean.
pub const DEGENERATE_RESULTANT: f64 = 1e-12;

const INIT_STREAM: u64 = 1 << 32;
const EVAL_STREAM: u64 = (1 << 32) + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    Quorus,
    #[serde(rename = "q-heterofl")]
    QHeteroFl,
    VanillaQfl,
    Standalone,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::Quorus,
        Technique::QHeteroFl,
        Technique::VanillaQfl,
        Technique::Standalone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Quorus => "quorus",
            Technique::QHeteroFl => "q-heterofl",
            Technique::VanillaQfl => "vanilla-qfl",
            Technique::Standalone => "standalone",
        }
    }

    /// Model family a technique trains when none is given.
    pub fn default_variant(self) -> ModelVariant {
        match self {
            Technique::Quorus => ModelVariant::Layerwise,
            _ => ModelVariant::Plain,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown technique `{s}`")))
    }
}

/// Angle of the summed unit phasors, in `(-pi, pi]`, and whether the
/// resultant was too short to define it (the angle is then 0).
pub fn circular_mean(angles: &[f64]) -> Result<(f64, bool)> {
    if angles.is_empty() {
        return Err(Error::config("circular mean of an empty set"));
    }
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    if s.hypot(c) < DEGENERATE_RESULTANT {
        log::warn!(
            "circular mean of {} angles has a vanishing resultant",
            angles.len()
        );
        return Ok((0.0, true));
    }
    Ok((wrap_angle(s.atan2(c)), false))
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.sin().atan2(a.cos());
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Parameters of the deepest model, stored layer by layer. Shallower models
/// use a prefix of the layers.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalParams {
    layers: Vec<Vec<f64>>,
}

impl GlobalParams {
    pub fn from_layers(layers: Vec<Vec<f64>>) -> Self {
        Self { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, layer: usize) -> &[f64] {
        &self.layers[layer]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Flat parameters of the first `depth` layers.
    pub fn slice(&self, depth: usize) -> Result<Vec<f64>> {
        if depth == 0 || depth > self.depth() {
            return Err(Error::config(format!(
                "cannot slice {depth} layers from a {}-layer model",
                self.depth()
            )));
        }
        Ok(self.layers[..depth].concat())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.concat()
    }

    /// Little-endian f64 dump, layer by layer.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.flat().iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// i.i.d. standard normal angles, reproducible from `seed`.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> GlobalParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let layers = layer_sizes
        .iter()
        .map(|&n| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    GlobalParams { layers }
}

/// Circular mean of every slot over the clients deep enough to hold it.
/// Layers nobody trained keep their previous value. Returns the new
/// parameters and the number of degenerate slots.
pub fn aggregate(
    prev: &GlobalParams,
    updates: &[(Vec<f64>, usize)],
) -> Result<(GlobalParams, usize)> {
    let sizes = prev.layer_sizes();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    for (k, (params, depth)) in updates.iter().enumerate() {
        let expected: usize = sizes.iter().take(*depth).sum();
        if *depth == 0 || *depth > sizes.len() || params.len() != expected {
            return Err(Error::config(format!(
                "update {k} claims {depth} layers but carries {} parameters",
                params.len()
            )));
        }
    }
    let mut degenerate = 0;
    let mut layers = prev.layers.clone();
    let mut column = Vec::with_capacity(updates.len());
    for (l, layer) in layers.iter_mut().enumerate() {
        for (i, slot) in layer.iter_mut().enumerate() {
            column.clear();
            column.extend(
                updates
                    .iter()
                    .filter(|(_, d)| *d > l)
                    .map(|(p, _)| p[offsets[l] + i]),
            );
            if column.is_empty() {
                continue;
            }
            let (mean, deg) = circular_mean(&column)?;
            degenerate += usize::from(deg);
            *slot = mean;
        }
    }
    Ok((GlobalParams { layers }, degenerate))
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClientUpdate {
    pub params: Vec<f64>,
    /// Mean over batches of the batch-mean loss.
    pub loss: f64,
    /// Per layer, mean and std over batches of the gradient's L2 norm.
    pub grad_norms: Vec<(f64, f64)>,
    pub steps: usize,
}

type LossFn = fn(&[f64], u8) -> Result<LossBreakdown>;

/// Local Adam training on one client's data.
///
/// Each epoch shuffles once from `rng` and walks mini-batches of
/// `batch_size`; a batch's loss is the mean over its samples.
#[allow(clippy::too_many_arguments)]
pub fn client_update<R: Rng + ?Sized>(
    model: &ModelSpec,
    loss_fn: LossFn,
    params: Vec<f64>,
    data: &ClientDataset,
    epochs: usize,
    batch_size: usize,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<ClientUpdate> {
    if data.is_empty() {
        return Err(Error::config("client dataset is empty"));
    }
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let mut params = params;
    let n_layers = model.depth();
    let mut norms: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
    let mut losses = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; params.len()];
    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            grad.fill(0.0);
            let mut loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = (&data.features[i], data.labels[i]);
                let (_, g) = vjp_with(model, x, &params, |probs| {
                    let lb = loss_fn(probs, y)?;
                    loss += lb.total * scale;
                    Ok(lb.grad)
                })?;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v * scale;
                }
            }
            for (l, bucket) in norms.iter_mut().enumerate() {
                let r = model.layer_params(l);
                bucket.push(grad[r].iter().map(|g| g * g).sum::<f64>().sqrt());
            }
            losses.push(loss);
            adam.step(&mut params, &grad)?;
        }
    }
    Ok(ClientUpdate {
        params,
        loss: mean_std(&losses).0,
        grad_norms: norms.iter().map(|b| mean_std(b)).collect(),
        steps: losses.len(),
    })
}

/// Local round with the layerwise loss and a fresh optimizer.
pub fn client_update_quorus<R: Rng + ?Sized>(
    model: &ModelSpec,
    params: Vec<f64>,
    data: &ClientDataset,
    epochs: usize,
    batch_size: usize,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<ClientUpdate> {
    adam.reset();
    client_update(
        model,
        quorus_loss,
        params,
        data,
        epochs,
        batch_size,
        adam,
        rng,
    )
}

/// Local round with the deepest-readout loss and a fresh optimizer.
pub fn client_update_qheterofl<R: Rng + ?Sized>(
    model: &ModelSpec,
    params: Vec<f64>,
    data: &ClientDataset,
    epochs: usize,
    batch_size: usize,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<ClientUpdate> {
    adam.reset();
    client_update(
        model,
        qheterofl_loss,
        params,
        data,
        epochs,
        batch_size,
        adam,
        rng,
    )
}

/// Telemetry of one communication round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub client_losses: Vec<f64>,
    /// Per client, per layer: mean and std of the gradient norm.
    pub grad_norms: Vec<Vec<(f64, f64)>>,
    /// `(capacity, accuracy, test loss)`; empty on rounds without evaluation.
    pub capacity_metrics: Vec<(usize, f64, f64)>,
    /// Individual classifier accuracies of the deepest evaluated model.
    pub classifier_accuracy: Vec<f64>,
    pub degenerate_angles: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FederationOutcome {
    pub history: Vec<RoundRecord>,
    pub global: GlobalParams,
    /// Each client's latest local parameters.
    pub client_params: Vec<Vec<f64>>,
}

impl FederationOutcome {
    /// Parameters that define the trained system: the global model, or for
    /// purely local training every client's model in client order.
    pub fn final_params_bytes(&self, technique: Technique) -> Vec<u8> {
        match technique {
            Technique::Standalone => self
                .client_params
                .iter()
                .flatten()
                .flat_map(|v| v.to_le_bytes())
                .collect(),
            _ => self.global.to_bytes(),
        }
    }
}

struct Client {
    capacity: usize,
    model: ModelSpec,
    adam: AdamState,
    rng: ChaCha8Rng,
    params: Vec<f64>,
}

/// Runs `config.rounds` rounds for one seed.
///
/// Clients train in parallel, each on its own random stream, and the server
/// consumes their updates in client order, so results do not depend on
/// scheduling.
pub fn run_federation(
    config: &FederationConfig,
    seed: u64,
    clients: &[ClientDataset],
    test: &ClientDataset,
) -> Result<FederationOutcome> {
    config.validate()?;
    if clients.len() != config.capacities.len() {
        return Err(Error::config(format!(
            "{} capacities but {} client datasets",
            config.capacities.len(),
            clients.len()
        )));
    }
    if let Some(k) = clients.iter().position(ClientDataset::is_empty) {
        return Err(Error::config(format!("client {k} has no data")));
    }
    if test.is_empty() {
        return Err(Error::config("test set is empty"));
    }
    let technique = config.technique;
    let variant = config.model_variant();
    let n = config.n_qubits;
    let depth_of = |capacity: usize| match technique {
        Technique::VanillaQfl => 2,
        _ => capacity,
    };
    let d_max = config
        .capacities
        .iter()
        .map(|&c| depth_of(c))
        .max()
        .unwrap_or(2);
    let reference = build_model(variant, config.shape, n, d_max)?;
    let global0 = init_params(&reference.layer_sizes(), seed);

    let mut state: Vec<Client> = config
        .capacities
        .iter()
        .enumerate()
        .map(|(k, &cap)| {
            let model = build_model(variant, config.shape, n, depth_of(cap))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            Ok(Client {
                capacity: cap,
                adam: AdamState::new(model.n_params(), config.adam()),
                params: global0.slice(model.depth())?,
                model,
                rng,
            })
        })
        .collect::<Result<_>>()?;

    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed);
    eval_rng.set_stream(EVAL_STREAM);
    let mut global = global0;
    let mut history = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let updates: Vec<ClientUpdate> = state
            .par_iter_mut()
            .zip(clients.par_iter())
            .map(|(c, data)| {
                let start = match technique {
                    Technique::Standalone => c.params.clone(),
                    _ => global.slice(c.model.depth())?,
                };
                let (e, b) = (config.epochs, config.batch_size);
                match technique {
                    Technique::Quorus => {
                        client_update_quorus(&c.model, start, data, e, b, &mut c.adam, &mut c.rng)
                    }
                    Technique::QHeteroFl | Technique::VanillaQfl => client_update_qheterofl(
                        &c.model,
                        start,
                        data,
                        e,
                        b,
                        &mut c.adam,
                        &mut c.rng,
                    ),
                    Technique::Standalone => client_update(
                        &c.model,
                        qheterofl_loss,
                        start,
                        data,
                        e,
                        b,
                        &mut c.adam,
                        &mut c.rng,
                    ),
                }
            })
            .collect::<Result<_>>()?;

        for (c, u) in state.iter_mut().zip(&updates) {
            c.params.clone_from(&u.params);
        }
        let mut degenerate = 0;
        if technique != Technique::Standalone {
            let pairs: Vec<(Vec<f64>, usize)> = state
                .iter()
                .map(|c| (c.params.clone(), c.model.depth()))
                .collect();
            let (next, deg) = aggregate(&global, &pairs)?;
            global = next;
            degenerate = deg;
        }

        let evaluate_now = round == config.rounds || round % config.eval_every.max(1) == 0;
        let (capacity_metrics, classifier_accuracy) = if evaluate_now {
            evaluate_round(config, &state, &global, &reference, test, &mut eval_rng)?
        } else {
            (Vec::new(), Vec::new())
        };
        history.push(RoundRecord {
            round,
            client_losses: updates.iter().map(|u| u.loss).collect(),
            grad_norms: updates.into_iter().map(|u| u.grad_norms).collect(),
            capacity_metrics,
            classifier_accuracy,
            degenerate_angles: degenerate,
        });
    }
    Ok(FederationOutcome {
        history,
        global,
        client_params: state.into_iter().map(|c| c.params).collect(),
    })
}

type RoundMetrics = (Vec<(usize, f64, f64)>, Vec<f64>);

fn evaluate_round(
    config: &FederationConfig,
    clients: &[Client],
    global: &GlobalParams,
    reference: &ModelSpec,
    test: &ClientDataset,
    rng: &mut ChaCha8Rng,
) -> Result<RoundMetrics> {
    let mut capacities = config.capacities.clone();
    capacities.sort_unstable();
    capacities.dedup();
    let mode = config.eval_mode;
    let (x, y) = (&test.features, &test.labels);
    match config.technique {
        Technique::Quorus => {
            let ev = evaluate(reference, &global.flat(), x, y, mode, rng)?;
            let rows = capacities
                .iter()
                .map(|&cap| {
                    let i = cap - 2;
                    (cap, ev.per_capacity[i], ev.loss[i])
                })
                .collect();
            Ok((rows, ev.per_classifier))
        }
        Technique::QHeteroFl => {
            let mut rows = Vec::new();
            let mut last = Vec::new();
            for &cap in &capacities {
                let model = build_model(ModelVariant::Plain, config.shape, config.n_qubits, cap)?;
                let ev = evaluate(&model, &global.slice(cap)?, x, y, mode, rng)?;
                rows.push((cap, ev.per_capacity[0], ev.loss[0]));
                last = ev.per_classifier;
            }
            Ok((rows, last))
        }
        Technique::VanillaQfl => {
            let ev = evaluate(reference, &global.flat(), x, y, mode, rng)?;
            let rows = capacities
                .iter()
                .map(|&cap| (cap, ev.per_capacity[0], ev.loss[0]))
                .collect();
            Ok((rows, ev.per_classifier))
        }
        Technique::Standalone => {
            let mut rows = Vec::new();
            let mut last = Vec::new();
            for &cap in &capacities {
                let mut acc = Vec::new();
                let mut loss = Vec::new();
                for c in clients.iter().filter(|c| c.capacity == cap) {
                    let ev = evaluate(&c.model, &c.params, x, y, mode, rng)?;
                    acc.push(ev.per_capacity[0]);
                    loss.push(ev.loss[0]);
                    last = ev.per_classifier;
                }
                rows.push((cap, mean_std(&acc).0, mean_std(&loss).0));
            }
            Ok((rows, last))
        }
    }
}
