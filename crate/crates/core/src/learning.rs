//! Losses over classifier probabilities, Adam, and ensemble evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::ModelSpec;
use crate::error::{Error, Result};

/// Clamp applied before every logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross entropy in nats for a class-1 probability `p`.
pub fn bce(p: f64, y: u8) -> f64 {
    let p = clamp(p);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `d bce / d p`, evaluated at the clamped probability.
pub fn bce_grad(p: f64, y: u8) -> f64 {
    let p = clamp(p);
    if y == 1 {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// `KL(p || q)` between two-outcome distributions `(1 - p, p)` and `(1 - q, q)`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    let (p, q) = (clamp(p), clamp(q));
    (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln() + p * (p / q).ln()
}

/// Partial derivatives of `KL(p || q)` with respect to `p` and `q`.
pub fn kl_bernoulli_grad(p: f64, q: f64) -> (f64, f64) {
    let (p, q) = (clamp(p), clamp(q));
    let dp = (p / q).ln() - ((1.0 - p) / (1.0 - q)).ln();
    let dq = -p / q + (1.0 - p) / (1.0 - q);
    (dp, dq)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub ce: Vec<f64>,
    pub kl: f64,
    /// `dL / dp_c`.
    pub grad: Vec<f64>,
}

/// Sum of per-classifier cross entropies plus the pairwise KL coupling
/// `1/(m-1) * sum_{i != j} KL(p_j || p_i)`, which is dropped for `m = 1`.
/// Both KL arguments receive gradient.
pub fn quorus_loss(probs: &[f64], y: u8) -> Result<LossBreakdown> {
    let m = probs.len();
    if m == 0 {
        return Err(Error::config("loss needs at least one classifier"));
    }
    let ce: Vec<f64> = probs.iter().map(|&p| bce(p, y)).collect();
    let mut grad: Vec<f64> = probs.iter().map(|&p| bce_grad(p, y)).collect();
    let mut kl = 0.0;
    if m >= 2 {
        let w = 1.0 / (m - 1) as f64;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                kl += w * kl_bernoulli(probs[j], probs[i]);
                let (dj, di) = kl_bernoulli_grad(probs[j], probs[i]);
                grad[j] += w * dj;
                grad[i] += w * di;
            }
        }
    }
    let total = ce.iter().sum::<f64>() + kl;
    Ok(LossBreakdown {
        total,
        ce,
        kl,
        grad,
    })
}

/// Cross entropy of the deepest readout only.
pub fn qheterofl_loss(probs: &[f64], y: u8) -> Result<LossBreakdown> {
    let Some(&last) = probs.last() else {
        return Err(Error::config("loss needs at least one classifier"));
    };
    let m = probs.len();
    let mut ce = vec![0.0; m];
    let mut grad = vec![0.0; m];
    ce[m - 1] = bce(last, y);
    grad[m - 1] = bce_grad(last, y);
    Ok(LossBreakdown {
        total: ce[m - 1],
        ce,
        kl: 0.0,
        grad,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.fill(0.0);
        self.v.fill(0.0);
        self.step = 0;
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::config(format!(
                "optimizer holds {} moments but got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }
}

/// Label 1 iff the mean class-1 probability is at least 0.5.
pub fn ensemble_predict(probs: &[f64]) -> u8 {
    let mean = probs.iter().sum::<f64>() / probs.len() as f64;
    u8::from(mean >= 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EvalMode {
    Analytic,
    Shots(u64),
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalMode::Analytic => f.write_str("analytic"),
            EvalMode::Shots(k) => write!(f, "shots={k}"),
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "analytic" {
            return Ok(EvalMode::Analytic);
        }
        match s.strip_prefix("shots=").map(str::parse::<u64>) {
            Some(Ok(k)) if k > 0 => Ok(EvalMode::Shots(k)),
            _ => Err(Error::config(format!(
                "evaluation mode must be `analytic` or `shots=K` with K >= 1, got `{s}`"
            ))),
        }
    }
}

impl TryFrom<String> for EvalMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EvalMode> for String {
    fn from(m: EvalMode) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Accuracy of each classifier on its own.
    pub per_classifier: Vec<f64>,
    /// Entry `i` is the ensemble over classifiers `0..=i`, i.e. capacity `i + 2`.
    pub per_capacity: Vec<f64>,
    /// Mean cross entropy of each capacity's ensemble probability.
    pub loss: Vec<f64>,
}

/// Accuracies of `model` on a labelled set.
pub fn evaluate<R: Rng + ?Sized>(
    model: &ModelSpec,
    params: &[f64],
    features: &[Vec<f64>],
    labels: &[u8],
    mode: EvalMode,
    rng: &mut R,
) -> Result<Evaluation> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::input(format!(
            "evaluation needs matching nonempty features and labels, got {} and {}",
            features.len(),
            labels.len()
        )));
    }
    let m = model.n_classifiers();
    let mut single = vec![0usize; m];
    let mut ensemble = vec![0usize; m];
    let mut loss = vec![0.0; m];
    for (x, &y) in features.iter().zip(labels) {
        let probs = match mode {
            EvalMode::Analytic => model.forward(x, params)?,
            EvalMode::Shots(k) => model.forward_sampled(x, params, k, rng)?,
        };
        let mut sum = 0.0;
        for c in 0..m {
            single[c] += usize::from(u8::from(probs[c] >= 0.5) == y);
            sum += probs[c];
            let mean = sum / (c + 1) as f64;
            ensemble[c] += usize::from(u8::from(mean >= 0.5) == y);
            loss[c] += bce(mean, y);
        }
    }
    let n = labels.len() as f64;
    Ok(Evaluation {
        per_classifier: single.into_iter().map(|k| k as f64 / n).collect(),
        per_capacity: ensemble.into_iter().map(|k| k as f64 / n).collect(),
        loss: loss.into_iter().map(|l| l / n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_values() {
        assert!((bce(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce(1.0, 1) < 1e-11);
        assert!(bce(0.0, 1).is_finite());
        assert!((bce_grad(0.25, 0) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kl_values() {
        assert_eq!(kl_bernoulli(0.3, 0.3), 0.0);
        // KL((1,0) || (0.5,0.5)) in the (p0, p1) convention, i.e. p = 0
        assert!((kl_bernoulli(0.0, 0.5) - std::f64::consts::LN_2).abs() < 1e-10);
        assert!(kl_bernoulli(0.2, 0.7) != kl_bernoulli(0.7, 0.2));
    }

    #[test]
    fn quorus_degenerate_cases() {
        let one = quorus_loss(&[0.3], 1).unwrap();
        assert_eq!(one.kl, 0.0);
        assert_eq!(one.total, bce(0.3, 1));
        let same = quorus_loss(&[0.4; 4], 0).unwrap();
        assert!(same.kl.abs() < 1e-15);
        assert!((same.total - 4.0 * bce(0.4, 0)).abs() < 1e-14);
        assert!(quorus_loss(&[], 0).is_err());
        assert_eq!(qheterofl_loss(&[0.3], 1).unwrap(), one);
    }

    #[test]
    fn qheterofl_uses_last_only() {
        let l = qheterofl_loss(&[0.2, 0.9], 1).unwrap();
        assert_eq!(l.total, bce(0.9, 1));
        assert_eq!(l.grad[0], 0.0);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut s = AdamState::new(3, AdamConfig::default());
        let mut p = vec![0.0, 1.0, 2.0];
        s.step(&mut p, &[0.5, -3.0, 0.0]).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-10);
        assert!((p[1] - 1.001).abs() < 1e-10);
        assert_eq!(p[2], 2.0);
        assert!(s.step(&mut p, &[0.0]).is_err());
        s.reset();
        assert_eq!(s.step, 0);
        assert!(s.m.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ensemble_rule() {
        assert_eq!(ensemble_predict(&[0.9, 0.8]), 1);
        assert_eq!(ensemble_predict(&[0.4, 0.4, 0.9]), 1);
        assert_eq!(ensemble_predict(&[0.5]), 1);
        assert_eq!(ensemble_predict(&[0.2, 0.3]), 0);
    }

    #[test]
    fn eval_mode_parse() {
        assert_eq!("analytic".parse::<EvalMode>().unwrap(), EvalMode::Analytic);
        assert_eq!(
            "shots=1000".parse::<EvalMode>().unwrap(),
            EvalMode::Shots(1000)
        );
        assert!("shots=0".parse::<EvalMode>().is_err());
        assert!("exact".parse::<EvalMode>().is_err());
    }
}
