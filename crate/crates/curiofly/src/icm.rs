//! Single-transition curiosity baseline: an inverse dynamics net predicts
//! the action from (s_t, s_{t+1}), a forward dynamics net predicts the next
//! state features from (s_t, a_t), and the forward prediction error is the
//! intrinsic reward. Features are the identity over the already-normalized
//! observation vector.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamParams, AdamState, FlatParams, Mlp, ACTION_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct IcmConfig {
    /// Mixing weight between inverse (1 - beta) and forward (beta) losses.
    pub beta: f64,
    /// Intrinsic reward scale.
    pub eta: f64,
    pub hidden: usize,
    pub lr: f64,
    /// Gradient passes over the batch per training round.
    pub epochs: usize,
    pub minibatch: usize,
}

impl Default for IcmConfig {
    fn default() -> Self {
        Self { beta: 0.2, eta: 1.0, hidden: 128, lr: 1e-3, epochs: 4, minibatch: 1024 }
    }
}

impl IcmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("icm.beta must be in [0,1], got {}", self.beta)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("icm.eta must be > 0, got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IcmLosses {
    pub inverse: f64,
    pub forward: f64,
    /// True when a non-finite loss rolled the step back.
    pub aborted: bool,
}

/// Inverse and forward dynamics nets with their optimizer states.
#[derive(Debug, Clone)]
pub struct IcmNets {
    /// g: (s_t ++ s_{t+1}) -> action estimate.
    pub inverse: Mlp,
    /// f: (phi(s_t) ++ a_t) -> phi(s_{t+1}) estimate.
    pub forward: Mlp,
    pub beta: f64,
    pub eta: f64,
    pub obs_dim: usize,
    opt_inverse: AdamState,
    opt_forward: AdamState,
    adam: AdamParams,
}

impl IcmNets {
    pub fn new(obs_dim: usize, cfg: &IcmConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let inverse = Mlp::new(&[2 * obs_dim, cfg.hidden, cfg.hidden, ACTION_DIM], 1.0, rng);
        let forward = Mlp::new(&[obs_dim + ACTION_DIM, cfg.hidden, cfg.hidden, obs_dim], 1.0, rng);
        let opt_inverse = AdamState::new(inverse.param_len());
        let opt_forward = AdamState::new(forward.param_len());
        Ok(Self {
            inverse,
            forward,
            beta: cfg.beta,
            eta: cfg.eta,
            obs_dim,
            opt_inverse,
            opt_forward,
            adam: AdamParams::default(),
        })
    }
}

/// Curiosity reward for one transition: (eta / 2) * |f(phi(s), a) - phi(s')|.
pub fn icm_reward(
    nets: &IcmNets,
    s: &Observation,
    action: &[f64; ACTION_DIM],
    s_next: &Observation,
) -> f64 {
    let mut input = Vec::with_capacity(nets.obs_dim + ACTION_DIM);
    input.extend(s.flat());
    input.extend_from_slice(action);
    let predicted = nets.forward.forward1(&Array1::from(input));
    let actual = s_next.flat();
    let err: f64 = predicted
        .iter()
        .zip(&actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    0.5 * nets.eta * err.sqrt()
}

/// Pre-assembled training matrices for a set of transitions.
#[derive(Debug, Clone)]
pub struct IcmBatch {
    /// (B, 2 * obs_dim): [s | s'].
    pub inverse_in: Array2<f64>,
    /// (B, obs_dim + 4): [s | a].
    pub forward_in: Array2<f64>,
    /// (B, 4) inverse targets.
    pub actions: Array2<f64>,
    /// (B, obs_dim) forward targets.
    pub phi_next: Array2<f64>,
}

impl IcmBatch {
    pub fn len(&self) -> usize {
        self.actions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds the matrices from (s, a, s') triples.
    pub fn from_triples(triples: &[(&Observation, [f64; ACTION_DIM], &Observation)]) -> Self {
        let b = triples.len();
        let obs_dim = if b > 0 { triples[0].0.dim() } else { 0 };
        let mut inverse_in = Array2::zeros((b, 2 * obs_dim));
        let mut forward_in = Array2::zeros((b, obs_dim + ACTION_DIM));
        let mut actions = Array2::zeros((b, ACTION_DIM));
        let mut phi_next = Array2::zeros((b, obs_dim));
        for (row, (s, a, s1)) in triples.iter().enumerate() {
            let sf = s.flat();
            let s1f = s1.flat();
            for (c, v) in sf.iter().enumerate() {
                inverse_in[[row, c]] = *v;
                forward_in[[row, c]] = *v;
            }
            for (c, v) in s1f.iter().enumerate() {
                inverse_in[[row, obs_dim + c]] = *v;
                phi_next[[row, c]] = *v;
            }
            for k in 0..ACTION_DIM {
                forward_in[[row, obs_dim + k]] = a[k];
                actions[[row, k]] = a[k];
            }
        }
        Self { inverse_in, forward_in, actions, phi_next }
    }

    fn rows(&self, idx: &[usize]) -> Self {
        Self {
            inverse_in: self.inverse_in.select(Axis(0), idx),
            forward_in: self.forward_in.select(Axis(0), idx),
            actions: self.actions.select(Axis(0), idx),
            phi_next: self.phi_next.select(Axis(0), idx),
        }
    }
}

/// One gradient step minimizing (1 - beta) L_I + beta L_F over the batch.
///
/// L_I is the mean squared action error, L_F the mean half squared feature
/// error. A non-finite loss restores the pre-step parameters.
pub fn icm_update(nets: &mut IcmNets, batch: &IcmBatch, lr: f64) -> Result<IcmLosses> {
    if batch.is_empty() {
        return Err(Error::Invalid("icm_update on empty batch".into()));
    }
    let b = batch.len() as f64;

    let snap_inv = nets.inverse.params_flat();
    let snap_fwd = nets.forward.params_flat();
    let snap_opt = (nets.opt_inverse.clone(), nets.opt_forward.clone());

    let (a_hat, cache_inv) = nets.inverse.forward_cached(&batch.inverse_in);
    let diff_a = &a_hat - &batch.actions;
    let inverse_loss = 0.5 * diff_a.mapv(|v| v * v).sum() / b;

    let (phi_hat, cache_fwd) = nets.forward.forward_cached(&batch.forward_in);
    let diff_p = &phi_hat - &batch.phi_next;
    let forward_loss = 0.5 * diff_p.mapv(|v| v * v).sum() / b;

    if !inverse_loss.is_finite() || !forward_loss.is_finite() {
        log::error!("icm_update: non-finite loss (L_I {inverse_loss}, L_F {forward_loss}); restoring");
        nets.inverse.load_params_from(&snap_inv);
        nets.forward.load_params_from(&snap_fwd);
        nets.opt_inverse = snap_opt.0;
        nets.opt_forward = snap_opt.1;
        return Ok(IcmLosses { inverse: 0.0, forward: 0.0, aborted: true });
    }

    let g_a = diff_a * ((1.0 - nets.beta) / b);
    let (grads_inv, _) = nets.inverse.backward(&cache_inv, &g_a);
    let mut p_inv = nets.inverse.params_flat();
    adam_step(&mut p_inv, &grads_inv.flat(), &mut nets.opt_inverse, lr, &nets.adam)?;
    nets.inverse.load_params_from(&p_inv);

    let g_p = diff_p * (nets.beta / b);
    let (grads_fwd, _) = nets.forward.backward(&cache_fwd, &g_p);
    let mut p_fwd = nets.forward.params_flat();
    adam_step(&mut p_fwd, &grads_fwd.flat(), &mut nets.opt_forward, lr, &nets.adam)?;
    nets.forward.load_params_from(&p_fwd);

    Ok(IcmLosses { inverse: inverse_loss, forward: forward_loss, aborted: false })
}

/// Runs `epochs` rounds of minibatched `icm_update` calls and returns the
/// mean losses of the final epoch.
pub fn icm_train_epochs(
    nets: &mut IcmNets,
    batch: &IcmBatch,
    cfg: &IcmConfig,
    rng: &mut impl Rng,
) -> Result<IcmLosses> {
    use rand::seq::SliceRandom;
    let n = batch.len();
    if n == 0 {
        return Ok(IcmLosses::default());
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut last = IcmLosses::default();
    for _ in 0..cfg.epochs {
        indices.shuffle(rng);
        let mut acc = IcmLosses::default();
        let mut chunks = 0;
        for chunk in indices.chunks(cfg.minibatch.min(n)) {
            let sub = batch.rows(chunk);
            let l = icm_update(nets, &sub, cfg.lr)?;
            acc.inverse += l.inverse;
            acc.forward += l.forward;
            acc.aborted |= l.aborted;
            chunks += 1;
        }
        acc.inverse /= chunks as f64;
        acc.forward /= chunks as f64;
        last = acc;
    }
    Ok(last)
}
