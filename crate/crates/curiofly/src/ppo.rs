//! PPO with a clipped surrogate objective, truncated GAE, entropy bonus,
//! and dual value heads: one head tracks the extrinsic return, the other
//! the (drifting) curiosity return. The policy advantage combines both
//! streams through a configurable TD residual.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{Observation, ODOMETRY_DIM};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, log_prob_and_entropy, AdamParams, AdamState, FlatParams, PolicyNet, PolicyOutput,
    SkipNet, ACTION_DIM,
};

/// PPO hyper-parameters; keys live under `[ppo]` in the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    /// Weight of the extrinsic value loss.
    pub c1: f64,
    /// Weight of the entropy bonus.
    pub c2: f64,
    pub lr_policy: f64,
    pub lr_value_ext: f64,
    pub lr_value_int: f64,
    /// When false (default) the combined TD residual follows the
    /// as-printed dual-head form; when true, the standard TD form.
    pub standard_td: bool,
    /// Hidden width of policy and value networks.
    pub hidden: usize,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch_size: 16384,
            minibatch_size: 2048,
            epochs: 10,
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            c1: 0.5,
            c2: 0.01,
            lr_policy: 3e-4,
            lr_value_ext: 1e-3,
            lr_value_int: 3e-4,
            standard_td: false,
            hidden: 256,
            init_log_std: 0.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("ppo.gamma must be in (0,1), got {}", self.gamma)));
        }
        if !(self.lam > 0.0 && self.lam < 1.0) {
            return Err(Error::Config(format!("ppo.lam must be in (0,1), got {}", self.lam)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!(
                "ppo.clip_eps must be in (0,1), got {}",
                self.clip_eps
            )));
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.hidden == 0
        {
            return Err(Error::Config("ppo sizes must be > 0".into()));
        }
        Ok(())
    }
}

/// One collected control step.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Observation,
    /// Pre-squash Gaussian sample; the environment received tanh(action).
    pub action: [f64; ACTION_DIM],
    pub log_prob_old: f64,
    pub r_ext: f64,
    /// Intrinsic reward; stays 0 until a curiosity module assigns it.
    pub r_int: f64,
    pub v_ext: f64,
    pub v_int: f64,
    pub terminal: bool,
    pub flight_id: u32,
    /// Raw world position of the observed state [m], for waypoint windows
    /// and visitation maps.
    pub position: [f64; 3],
}

/// One training batch of transitions plus derived advantage/target arrays.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    /// Value estimates for the state after the final transition; used only
    /// when that transition is non-terminal.
    pub bootstrap_v_ext: f64,
    pub bootstrap_v_int: f64,
    /// Combined-stream GAE advantages driving the policy loss.
    pub advantages: Vec<f64>,
    /// Extrinsic value targets: ext-stream GAE + old extrinsic values.
    pub target_v_ext: Vec<f64>,
    /// Intrinsic value targets: int-stream GAE + old intrinsic values.
    pub target_v_int: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            transitions: Vec::with_capacity(capacity),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
        self.advantages.clear();
        self.target_v_ext.clear();
        self.target_v_int.clear();
        self.bootstrap_v_ext = 0.0;
        self.bootstrap_v_int = 0.0;
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn advantages_ready(&self) -> bool {
        self.advantages.len() == self.transitions.len() && !self.transitions.is_empty()
    }

    /// Fills the combined policy advantages and both value-target arrays.
    ///
    /// Intrinsic rewards must already be assigned. Flight boundaries stop
    /// both the TD bootstrap and the GAE accumulation.
    pub fn compute_advantages(&mut self, cfg: &PpoConfig) {
        let n = self.transitions.len();
        let mut v_ext_next = vec![0.0; n];
        let mut v_int_next = vec![0.0; n];
        for t in 0..n {
            if !self.transitions[t].terminal {
                if t + 1 < n {
                    v_ext_next[t] = self.transitions[t + 1].v_ext;
                    v_int_next[t] = self.transitions[t + 1].v_int;
                } else {
                    v_ext_next[t] = self.bootstrap_v_ext;
                    v_int_next[t] = self.bootstrap_v_int;
                }
            }
        }
        let terminals: Vec<bool> = self.transitions.iter().map(|t| t.terminal).collect();

        let combined: Vec<f64> = (0..n)
            .map(|t| {
                let tr = &self.transitions[t];
                combined_delta(
                    tr.r_ext,
                    tr.r_int,
                    tr.v_ext,
                    v_ext_next[t],
                    tr.v_int,
                    v_int_next[t],
                    cfg.gamma,
                    cfg.standard_td,
                )
            })
            .collect();
        self.advantages = accumulate_gae(&combined, &terminals, cfg.gamma * cfg.lam);

        let ext_deltas: Vec<f64> = (0..n)
            .map(|t| {
                let tr = &self.transitions[t];
                tr.r_ext + cfg.gamma * v_ext_next[t] - tr.v_ext
            })
            .collect();
        let adv_ext = accumulate_gae(&ext_deltas, &terminals, cfg.gamma * cfg.lam);
        self.target_v_ext = adv_ext
            .iter()
            .zip(&self.transitions)
            .map(|(a, tr)| a + tr.v_ext)
            .collect();

        let int_deltas: Vec<f64> = (0..n)
            .map(|t| {
                let tr = &self.transitions[t];
                tr.r_int + cfg.gamma * v_int_next[t] - tr.v_int
            })
            .collect();
        let adv_int = accumulate_gae(&int_deltas, &terminals, cfg.gamma * cfg.lam);
        self.target_v_int = adv_int
            .iter()
            .zip(&self.transitions)
            .map(|(a, tr)| a + tr.v_int)
            .collect();
    }
}

/// Backward GAE recursion over precomputed TD residuals, truncating the
/// exponential sum at terminals.
pub fn accumulate_gae(deltas: &[f64], terminals: &[bool], gamma_lambda: f64) -> Vec<f64> {
    assert_eq!(deltas.len(), terminals.len());
    let mut adv = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        acc = deltas[t] + if terminals[t] { 0.0 } else { gamma_lambda * acc };
        adv[t] = acc;
    }
    adv
}

/// Truncated GAE from rewards and values (length T+1), masking the
/// bootstrap and stopping the accumulation at each terminal.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminals: &[bool],
    gamma: f64,
    lam: f64,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma < 1.0 && lam > 0.0 && lam < 1.0) {
        return Err(Error::Invalid(format!("gamma {gamma} / lambda {lam} must lie in (0,1)")));
    }
    if values.len() != rewards.len() + 1 || terminals.len() != rewards.len() {
        return Err(Error::Shape(format!(
            "compute_gae: rewards {}, values {}, terminals {}",
            rewards.len(),
            values.len(),
            terminals.len()
        )));
    }
    let deltas: Vec<f64> = (0..rewards.len())
        .map(|t| {
            let mask = if terminals[t] { 0.0 } else { 1.0 };
            rewards[t] + gamma * values[t + 1] * mask - values[t]
        })
        .collect();
    Ok(accumulate_gae(&deltas, terminals, gamma * lam))
}

/// TD residual combining the extrinsic and intrinsic streams.
///
/// The default form adds the discounted *differences* of both value heads
/// to the summed reward; the `standard_td` switch uses the conventional
/// bootstrapped residual instead.
#[allow(clippy::too_many_arguments)]
pub fn combined_delta(
    r_ext: f64,
    r_int: f64,
    v_ext_t: f64,
    v_ext_t1: f64,
    v_int_t: f64,
    v_int_t1: f64,
    gamma: f64,
    standard_td: bool,
) -> f64 {
    if standard_td {
        (r_ext + r_int) + gamma * (v_ext_t1 + v_int_t1) - (v_ext_t + v_int_t)
    } else {
        (r_ext + r_int) + gamma * ((v_ext_t1 - v_ext_t) + (v_int_t1 - v_int_t))
    }
}

/// Clipped surrogate objective for one sample (to be maximized):
/// min(r A, clip(r, 1-eps, 1+eps) A) with r = exp(lp_new - lp_old).
pub fn clipped_surrogate(log_prob_new: f64, log_prob_old: f64, advantage: f64, eps: f64) -> f64 {
    let ratio = (log_prob_new - log_prob_old).exp();
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Policy plus both value heads and their optimizer states.
#[derive(Debug, Clone)]
pub struct PpoNets {
    pub policy: PolicyNet,
    pub value_ext: SkipNet,
    pub value_int: SkipNet,
    pub opt_policy: AdamState,
    pub opt_value_ext: AdamState,
    pub opt_value_int: AdamState,
    pub adam: AdamParams,
    pub update_count: u64,
}

impl PpoNets {
    pub fn new(aux_dim: usize, cfg: &PpoConfig, rng: &mut impl Rng) -> Self {
        let policy = PolicyNet::new(ODOMETRY_DIM, aux_dim, cfg.hidden, cfg.init_log_std, rng);
        let value_ext = SkipNet::new(ODOMETRY_DIM, aux_dim, cfg.hidden, 1, 1.0, rng);
        let value_int = SkipNet::new(ODOMETRY_DIM, aux_dim, cfg.hidden, 1, 1.0, rng);
        let opt_policy = AdamState::new(policy.param_len());
        let opt_value_ext = AdamState::new(value_ext.param_len());
        let opt_value_int = AdamState::new(value_int.param_len());
        Self {
            policy,
            value_ext,
            value_int,
            opt_policy,
            opt_value_ext,
            opt_value_int,
            adam: AdamParams::default(),
            update_count: 0,
        }
    }
}

/// Scalar summary of one `ppo_update`, averaged over minibatches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_ext_loss: f64,
    pub value_int_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Index of the minibatch whose loss went non-finite, if the update
    /// was aborted and rolled back.
    pub aborted_minibatch: Option<usize>,
}

/// Gathers the odometry/aux matrices for a set of transitions.
pub fn gather_obs(transitions: &[Transition], idx: &[usize]) -> (Array2<f64>, Array2<f64>) {
    let aux_dim = transitions[idx[0]].obs.aux.len();
    let mut odo = Array2::zeros((idx.len(), ODOMETRY_DIM));
    let mut aux = Array2::zeros((idx.len(), aux_dim));
    for (row, &i) in idx.iter().enumerate() {
        let obs = &transitions[i].obs;
        for (c, v) in obs.odometry.iter().enumerate() {
            odo[[row, c]] = *v;
        }
        for (c, v) in obs.aux.iter().enumerate() {
            aux[[row, c]] = *v;
        }
    }
    (odo, aux)
}

/// Runs the PPO optimization epochs over one completed rollout buffer.
///
/// Maximizes the clipped surrogate plus entropy bonus for the policy and
/// regresses each value head against its own GAE target with its own
/// learning rate. A non-finite loss aborts the whole update and restores
/// the pre-update parameters.
pub fn ppo_update(
    buffer: &RolloutBuffer,
    nets: &mut PpoNets,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    cfg.validate()?;
    if !buffer.advantages_ready() {
        return Err(Error::Invalid(
            "ppo_update: advantages not computed; call compute_advantages first".into(),
        ));
    }
    let n = buffer.len();

    // Per-batch advantage normalization.
    let mean = buffer.advantages.iter().sum::<f64>() / n as f64;
    let var = buffer.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let adv_norm: Vec<f64> = buffer.advantages.iter().map(|a| (a - mean) / (std + 1e-8)).collect();

    let snapshot_policy = nets.policy.params_flat();
    let snapshot_ext = nets.value_ext.params_flat();
    let snapshot_int = nets.value_int.params_flat();
    let snapshot_opt = (
        nets.opt_policy.clone(),
        nets.opt_value_ext.clone(),
        nets.opt_value_int.clone(),
    );

    let mut stats = UpdateStats::default();
    let mut minibatch_count = 0usize;
    let mut global_mb = 0usize;

    let mut indices: Vec<usize> = (0..n).collect();
    for _epoch in 0..cfg.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch_size.min(n)) {
            let b = chunk.len();
            let bf = b as f64;
            let (odo, aux) = gather_obs(&buffer.transitions, chunk);

            // ---- policy ----
            let (mean_out, cache) = nets.policy.net.forward_batch_cached(&odo, &aux);
            let log_std = nets.policy.log_std_arr();
            let mut surr_sum = 0.0;
            let mut ent_sum = 0.0;
            let mut ratio_sum = 0.0;
            let mut clipped_count = 0usize;
            let mut g_mean = Array2::zeros((b, ACTION_DIM));
            let mut g_log_std = Array1::zeros(ACTION_DIM);
            for (row, &i) in chunk.iter().enumerate() {
                let tr = &buffer.transitions[i];
                let mut mean_row = [0.0; ACTION_DIM];
                for k in 0..ACTION_DIM {
                    mean_row[k] = mean_out[[row, k]];
                }
                let out = PolicyOutput { mean: mean_row, log_std };
                let (lp_new, ent) = log_prob_and_entropy(&out, &tr.action);
                let adv = adv_norm[i];
                let ratio = (lp_new - tr.log_prob_old).exp();
                let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
                surr_sum += clipped_surrogate(lp_new, tr.log_prob_old, adv, cfg.clip_eps);
                ent_sum += ent;
                ratio_sum += ratio;
                if (ratio - clipped).abs() > 0.0 {
                    clipped_count += 1;
                }
                // Gradient flows through the unclipped branch iff it attains
                // the min (ties included).
                let active = ratio * adv <= clipped * adv;
                let g_lp = if active { -adv * ratio / bf } else { 0.0 };
                for k in 0..ACTION_DIM {
                    let sigma = log_std[k].exp();
                    let z = (tr.action[k] - mean_row[k]) / sigma;
                    g_mean[[row, k]] = g_lp * z / sigma;
                    g_log_std[k] += g_lp * (z * z - 1.0);
                }
            }
            // Entropy bonus: d(-c2 * mean entropy)/d(log_std_k) = -c2.
            g_log_std -= cfg.c2;

            let policy_loss = -surr_sum / bf - cfg.c2 * ent_sum / bf;

            // ---- value heads ----
            let (ve, cache_e) = nets.value_ext.forward_batch_cached(&odo, &aux);
            let (vi, cache_i) = nets.value_int.forward_batch_cached(&odo, &aux);
            let mut ge = Array2::zeros((b, 1));
            let mut gi = Array2::zeros((b, 1));
            let mut err_e = 0.0;
            let mut err_i = 0.0;
            for (row, &i) in chunk.iter().enumerate() {
                let de = ve[[row, 0]] - buffer.target_v_ext[i];
                let di = vi[[row, 0]] - buffer.target_v_int[i];
                err_e += de * de;
                err_i += di * di;
                ge[[row, 0]] = cfg.c1 * 2.0 * de / bf;
                gi[[row, 0]] = 2.0 * di / bf;
            }
            let value_ext_loss = err_e / bf;
            let value_int_loss = err_i / bf;

            if !policy_loss.is_finite() || !value_ext_loss.is_finite() || !value_int_loss.is_finite()
            {
                log::error!(
                    "non-finite loss in minibatch {global_mb} (policy {policy_loss}, v_ext {value_ext_loss}, v_int {value_int_loss}); rolling back update"
                );
                nets.policy.load_params_from(&snapshot_policy);
                nets.value_ext.load_params_from(&snapshot_ext);
                nets.value_int.load_params_from(&snapshot_int);
                nets.opt_policy = snapshot_opt.0;
                nets.opt_value_ext = snapshot_opt.1;
                nets.opt_value_int = snapshot_opt.2;
                stats.aborted_minibatch = Some(global_mb);
                return Ok(stats);
            }

            // Apply gradients.
            let net_grads = nets.policy.net.backward(&cache, &g_mean);
            let mut flat_g = vec![0.0; nets.policy.param_len()];
            let split = net_grads.flat_len();
            net_grads.copy_to(&mut flat_g[..split]);
            flat_g[split..].copy_from_slice(g_log_std.as_slice().expect("contiguous"));
            let mut flat_p = nets.policy.params_flat();
            adam_step(&mut flat_p, &flat_g, &mut nets.opt_policy, cfg.lr_policy, &nets.adam)?;
            nets.policy.load_params_from(&flat_p);
            nets.policy.clamp_log_std();

            let grads_e = nets.value_ext.backward(&cache_e, &ge);
            let mut flat_pe = nets.value_ext.params_flat();
            adam_step(
                &mut flat_pe,
                &grads_e.flat(),
                &mut nets.opt_value_ext,
                cfg.lr_value_ext,
                &nets.adam,
            )?;
            nets.value_ext.load_params_from(&flat_pe);

            let grads_i = nets.value_int.backward(&cache_i, &gi);
            let mut flat_pi = nets.value_int.params_flat();
            adam_step(
                &mut flat_pi,
                &grads_i.flat(),
                &mut nets.opt_value_int,
                cfg.lr_value_int,
                &nets.adam,
            )?;
            nets.value_int.load_params_from(&flat_pi);

            stats.policy_loss += policy_loss;
            stats.value_ext_loss += value_ext_loss;
            stats.value_int_loss += value_int_loss;
            stats.entropy += ent_sum / bf;
            stats.mean_ratio += ratio_sum / bf;
            stats.clip_fraction += clipped_count as f64 / bf;
            minibatch_count += 1;
            global_mb += 1;
        }
    }
    if minibatch_count > 0 {
        let k = minibatch_count as f64;
        stats.policy_loss /= k;
        stats.value_ext_loss /= k;
        stats.value_int_loss /= k;
        stats.entropy /= k;
        stats.mean_ratio /= k;
        stats.clip_fraction /= k;
    }
    nets.update_count += 1;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selftest::brute_force_gae;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> PpoConfig {
        PpoConfig {
            batch_size: 8,
            minibatch_size: 4,
            epochs: 2,
            hidden: 8,
            ..PpoConfig::default()
        }
    }

    fn random_obs(aux_dim: usize, rng: &mut impl Rng) -> Observation {
        let mut obs = Observation::zeros(aux_dim);
        for v in obs.odometry.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in obs.aux.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        obs
    }

    fn random_transition(aux_dim: usize, rng: &mut impl Rng) -> Transition {
        Transition {
            obs: random_obs(aux_dim, rng),
            action: [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ],
            log_prob_old: rng.random_range(-6.0..-2.0),
            r_ext: rng.random_range(-1.0..1.0),
            r_int: 0.0,
            v_ext: rng.random_range(-1.0..1.0),
            v_int: rng.random_range(-1.0..1.0),
            terminal: false,
            flight_id: 0,
            position: [0.0; 3],
        }
    }

    #[test]
    fn gae_single_step() {
        let adv = compute_gae(&[2.0], &[1.0, 3.0], &[false], 0.99, 0.95).unwrap();
        assert_relative_eq!(adv[0], 2.0 + 0.99 * 3.0 - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gae_geometric_series_closed_form() {
        let t = 12;
        let c = 0.7;
        let gamma = 0.99;
        let lam = 0.95;
        let rewards = vec![0.0; t];
        let values = vec![c; t + 1];
        let terminals = vec![false; t];
        let adv = compute_gae(&rewards, &values, &terminals, gamma, lam).unwrap();
        // delta_t = c (gamma - 1); A_t = c (gamma-1) sum_{l<T-t} (gamma lam)^l
        for (i, a) in adv.iter().enumerate() {
            let m = t - i;
            let gl: f64 = gamma * lam;
            let series = (1.0 - gl.powi(m as i32)) / (1.0 - gl);
            assert_relative_eq!(*a, c * (gamma - 1.0) * series, epsilon = 1e-10);
        }
    }

    #[test]
    fn gae_matches_brute_force_oracle_on_random_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = 16;
        let rewards: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..=t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let terminals: Vec<bool> = (0..t).map(|_| rng.random_range(0.0..1.0) < 0.2).collect();
        let adv = compute_gae(&rewards, &values, &terminals, 0.99, 0.95).unwrap();
        let oracle = brute_force_gae(&rewards, &values, &terminals, 0.99, 0.95);
        for (a, o) in adv.iter().zip(&oracle) {
            assert!((a - o).abs() < 1e-10);
        }
    }

    #[test]
    fn gae_rejects_bad_lengths() {
        assert!(compute_gae(&[1.0], &[1.0], &[false], 0.99, 0.95).is_err());
        assert!(compute_gae(&[1.0], &[1.0, 2.0], &[], 0.99, 0.95).is_err());
        assert!(compute_gae(&[1.0], &[1.0, 2.0], &[false], 1.5, 0.95).is_err());
    }

    #[test]
    fn combined_delta_examples() {
        // All values equal, zero rewards: both forms vanish.
        assert_eq!(combined_delta(0.0, 0.0, 2.0, 2.0, 1.0, 1.0, 0.99, false), 0.0);
        assert_eq!(combined_delta(0.0, 0.0, 2.0, 2.0, 1.0, 1.0, 0.99, true), 0.0);
        // As-printed form.
        assert_relative_eq!(
            combined_delta(1.0, 0.5, 2.0, 3.0, 1.0, 1.0, 0.99, false),
            2.49,
            epsilon = 1e-12
        );
        // gamma = 0 reduces both forms to the summed reward... the standard
        // form also subtracts the current values.
        assert_eq!(combined_delta(1.0, 0.5, 7.0, 3.0, 2.0, 1.0, 0.0, false), 1.5);
        assert_eq!(
            combined_delta(1.0, 0.5, 7.0, 3.0, 2.0, 1.0, 0.0, true),
            1.5 - 9.0
        );
    }

    #[test]
    fn clipped_surrogate_examples() {
        // new == old: ratio 1, result is the advantage.
        assert_relative_eq!(clipped_surrogate(-3.0, -3.0, 0.7, 0.2), 0.7);
        // ratio 2, advantage 1: min(2, 1.2) = 1.2.
        assert_relative_eq!(clipped_surrogate(2.0f64.ln(), 0.0, 1.0, 0.2), 1.2, epsilon = 1e-12);
        // ratio 0.5, advantage -1: min(-0.5, -0.8) = -0.8.
        assert_relative_eq!(
            clipped_surrogate(0.5f64.ln(), 0.0, -1.0, 0.2),
            -0.8,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn clipped_never_exceeds_unclipped_for_expanding_positive_advantage(
            lr in 0.2..2.0f64, adv in 1e-3..10.0f64
        ) {
            // ratio = e^lr > 1.2 region
            let ratio = lr.exp();
            prop_assume!(ratio > 1.2);
            let s = clipped_surrogate(lr, 0.0, adv, 0.2);
            prop_assert!(s <= ratio * adv);
            prop_assert!((s - 1.2 * adv).abs() < 1e-12);
        }

        #[test]
        fn gae_oracle_agreement(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = rng.random_range(1..32usize);
            let rewards: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
            let values: Vec<f64> = (0..=t).map(|_| rng.random_range(-2.0..2.0)).collect();
            let terminals: Vec<bool> = (0..t).map(|_| rng.random_range(0.0..1.0) < 0.25).collect();
            let adv = compute_gae(&rewards, &values, &terminals, 0.99, 0.95).unwrap();
            let oracle = brute_force_gae(&rewards, &values, &terminals, 0.99, 0.95);
            for (a, o) in adv.iter().zip(&oracle) {
                prop_assert!((a - o).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn terminal_cuts_advantage_dependence() {
        let cfg = PpoConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let build = |tail_reward: f64, rng: &mut ChaCha8Rng| {
            let mut buf = RolloutBuffer::with_capacity(8);
            for i in 0..8 {
                let mut tr = random_transition(5, rng);
                tr.terminal = i == 3;
                if i > 3 {
                    tr.r_ext = tail_reward;
                }
                buf.push(tr);
            }
            buf
        };
        // Identical prefixes, different suffix rewards after the terminal.
        let mut rng2 = rng.clone();
        let mut a = build(0.5, &mut rng);
        let mut b = build(-2.0, &mut rng2);
        for i in 0..=3 {
            b.transitions[i] = a.transitions[i].clone();
        }
        a.compute_advantages(&cfg);
        b.compute_advantages(&cfg);
        for i in 0..=3 {
            assert_eq!(a.advantages[i], b.advantages[i]);
            assert_eq!(a.target_v_ext[i], b.target_v_ext[i]);
        }
        assert_ne!(a.advantages[5], b.advantages[5]);
    }

    #[test]
    fn stationary_point_leaves_params_unchanged() {
        // Zero advantages and value targets equal to current values, with the
        // entropy bonus disabled: every gradient is exactly zero.
        let cfg = PpoConfig { c2: 0.0, epochs: 1, minibatch_size: 8, hidden: 8, ..PpoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut nets = PpoNets::new(5, &cfg, &mut rng);
        let mut buf = RolloutBuffer::with_capacity(8);
        for _ in 0..8 {
            let mut tr = random_transition(5, &mut rng);
            let out = crate::nn::forward_policy(&nets.policy, &tr.obs).unwrap();
            let (lp, _) = log_prob_and_entropy(&out, &tr.action);
            tr.log_prob_old = lp;
            let heads = crate::nn::forward_values(&nets.value_ext, &nets.value_int, &tr.obs).unwrap();
            tr.v_ext = heads.v_ext;
            tr.v_int = heads.v_int;
            buf.push(tr);
        }
        buf.compute_advantages(&cfg);
        buf.advantages = vec![0.0; 8];
        buf.target_v_ext = buf.transitions.iter().map(|t| t.v_ext).collect();
        buf.target_v_int = buf.transitions.iter().map(|t| t.v_int).collect();
        let before = nets.policy.params_flat();
        let before_e = nets.value_ext.params_flat();
        ppo_update(&buf, &mut nets, &cfg, &mut rng).unwrap();
        assert_eq!(nets.policy.params_flat(), before);
        assert_eq!(nets.value_ext.params_flat(), before_e);
    }

    #[test]
    fn single_transition_loss_matches_hand_computation() {
        let cfg = PpoConfig {
            epochs: 1,
            minibatch_size: 1,
            hidden: 8,
            lr_policy: 0.0,
            lr_value_ext: 0.0,
            lr_value_int: 0.0,
            ..PpoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut nets = PpoNets::new(5, &cfg, &mut rng);
        let mut tr = random_transition(5, &mut rng);
        tr.log_prob_old = -4.0;
        let out = crate::nn::forward_policy(&nets.policy, &tr.obs).unwrap();
        let (lp_new, ent) = log_prob_and_entropy(&out, &tr.action);
        let heads = crate::nn::forward_values(&nets.value_ext, &nets.value_int, &tr.obs).unwrap();
        tr.v_ext = heads.v_ext;
        tr.v_int = heads.v_int;

        let mut buf = RolloutBuffer::with_capacity(1);
        buf.push(tr);
        buf.compute_advantages(&cfg);
        buf.advantages = vec![2.0];
        buf.target_v_ext = vec![heads.v_ext + 0.3];
        buf.target_v_int = vec![heads.v_int - 0.2];

        // Normalized advantage of a single sample is 0 / 1e-8 = 0.
        let expected_policy = -clipped_surrogate(lp_new, -4.0, 0.0, cfg.clip_eps) - cfg.c2 * ent;
        let stats = ppo_update(&buf, &mut nets, &cfg, &mut rng).unwrap();
        assert_relative_eq!(stats.policy_loss, expected_policy, epsilon = 1e-12);
        assert_relative_eq!(stats.value_ext_loss, 0.09, epsilon = 1e-12);
        assert_relative_eq!(stats.value_int_loss, 0.04, epsilon = 1e-12);
        assert_relative_eq!(stats.entropy, ent, epsilon = 1e-12);
    }

    #[test]
    fn large_entropy_bonus_raises_log_std() {
        let cfg = PpoConfig {
            c2: 10.0,
            epochs: 3,
            minibatch_size: 8,
            hidden: 8,
            ..PpoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nets = PpoNets::new(5, &cfg, &mut rng);
        let mut buf = RolloutBuffer::with_capacity(8);
        for _ in 0..8 {
            let mut tr = random_transition(5, &mut rng);
            let out = crate::nn::forward_policy(&nets.policy, &tr.obs).unwrap();
            let (lp, _) = log_prob_and_entropy(&out, &tr.action);
            tr.log_prob_old = lp;
            buf.push(tr);
        }
        buf.compute_advantages(&cfg);
        buf.advantages = vec![0.0; 8];
        buf.target_v_ext = vec![0.0; 8];
        buf.target_v_int = vec![0.0; 8];
        let before = nets.policy.log_std.sum();
        ppo_update(&buf, &mut nets, &cfg, &mut rng).unwrap();
        assert!(nets.policy.log_std.sum() > before);
    }

    #[test]
    fn update_determinism_under_fixed_seed() {
        let cfg = small_cfg();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut nets = PpoNets::new(5, &cfg, &mut rng);
            let mut buf = RolloutBuffer::with_capacity(cfg.batch_size);
            for i in 0..cfg.batch_size {
                let mut tr = random_transition(5, &mut rng);
                tr.terminal = i % 5 == 4;
                buf.push(tr);
            }
            buf.compute_advantages(&cfg);
            ppo_update(&buf, &mut nets, &cfg, &mut rng).unwrap();
            nets.policy.params_flat()
        };
        assert_eq!(run(), run());
    }
}
