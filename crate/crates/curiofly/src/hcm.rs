//! Segment-level curiosity ("high-level curiosity module"): instead of
//! scoring single transitions, heads score windows of trajectory. Around an
//! anchor step t, a past segment (observations over [t-n, t]) and a future
//! segment ([t, t+n]) are related through three relative position waypoints
//! summarizing the transition window. Two head families exist:
//!
//! - SS heads: inverse net g predicts the waypoints from both observation
//!   segments; forward net f predicts the future segment from the past
//!   segment and the waypoints.
//! - SR heads: same wiring but the future observation segment is replaced
//!   by the segment of extrinsic rewards.
//!
//! An ensemble of independently initialized heads averages its prediction
//! errors into one curiosity reward, which is spread over the neighboring
//! steps of the buffer with a kappa^x decay.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamParams, AdamState, FlatParams, Mlp};
use crate::ppo::RolloutBuffer;

/// Hyper-parameters of the segment curiosity module (`[hcm]` config keys).
#[derive(Debug, Clone, PartialEq)]
pub struct HcmConfig {
    /// Segment half-length in control steps; windows span 2n+1 steps.
    pub n: usize,
    /// Anchor spacing in control steps.
    pub stride: usize,
    /// Mixing weight between inverse (1 - beta) and forward (beta) losses.
    pub beta: f64,
    /// Scale of the ensemble curiosity reward.
    pub alpha_curiosity: f64,
    /// Per-step decay of the distributed trajectory reward.
    pub kappa: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Bundles per head-update minibatch.
    pub minibatch: usize,
    pub hidden: usize,
    pub heads_ss: usize,
    pub heads_sr: usize,
}

impl Default for HcmConfig {
    fn default() -> Self {
        Self {
            n: 50,
            stride: 25,
            beta: 0.2,
            alpha_curiosity: 0.1,
            kappa: 0.9,
            lr: 1e-3,
            epochs: 4,
            minibatch: 64,
            hidden: 128,
            heads_ss: 5,
            heads_sr: 5,
        }
    }
}

impl HcmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("hcm.kappa must be in (0,1), got {}", self.kappa)));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("hcm.beta must be in [0,1], got {}", self.beta)));
        }
        if self.n == 0 || self.stride == 0 {
            return Err(Error::Config("hcm.n and hcm.stride must be > 0".into()));
        }
        Ok(())
    }

    /// Flattened segment feature length for a given observation size.
    pub fn segment_dim(&self, obs_dim: usize) -> usize {
        (self.n + 1) * obs_dim
    }
}

/// Three relative displacement waypoints over a transition window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoints {
    pub wp1: [f64; 3],
    pub wp2: [f64; 3],
    pub wp3: [f64; 3],
}

impl Waypoints {
    pub fn flat(&self) -> [f64; 9] {
        [
            self.wp1[0], self.wp1[1], self.wp1[2], self.wp2[0], self.wp2[1], self.wp2[2],
            self.wp3[0], self.wp3[1], self.wp3[2],
        ]
    }
}

/// Reduces a position window of odd length 2n+1 to waypoints at the
/// beginning quarter, middle, and end, all relative to the window start.
/// Translation-invariant by construction.
pub fn f_wp(positions: &[[f64; 3]]) -> Waypoints {
    assert!(!positions.is_empty(), "f_wp on empty window");
    let w = positions.len() - 1;
    let origin = positions[0];
    let rel = |i: usize| -> [f64; 3] {
        [
            positions[i][0] - origin[0],
            positions[i][1] - origin[1],
            positions[i][2] - origin[2],
        ]
    };
    Waypoints { wp1: rel(w.div_ceil(4)), wp2: rel(w / 2), wp3: rel(w) }
}

/// One anchor's slices, pre-flattened for the heads.
#[derive(Debug, Clone)]
pub struct SegmentBundle {
    /// Buffer index of the anchor step.
    pub anchor: usize,
    /// Flattened observations over [t-n, t], length (n+1) * obs_dim.
    pub zeta_past: Vec<f64>,
    /// Flattened observations over [t, t+n].
    pub zeta_future: Vec<f64>,
    /// Raw positions over [t-n, t+n] (2n+1 entries).
    pub positions: Vec<[f64; 3]>,
    /// Extrinsic rewards over [t, t+n] (n+1 entries).
    pub gamma_future: Vec<f64>,
}

impl SegmentBundle {
    pub fn waypoints(&self) -> Waypoints {
        f_wp(&self.positions)
    }
}

/// Slices bundles from a rollout at anchors t = n, n+stride, n+2 stride, ...
/// skipping every window that straddles a flight reset. Buffers shorter
/// than one window yield no bundles.
pub fn make_bundles(buffer: &RolloutBuffer, n: usize, stride: usize) -> Vec<SegmentBundle> {
    let trs = &buffer.transitions;
    let len = trs.len();
    let mut out = Vec::new();
    if len < 2 * n + 1 {
        return out;
    }
    let mut t = n;
    while t + n < len {
        let fid = trs[t].flight_id;
        if trs[t - n..=t + n].iter().all(|tr| tr.flight_id == fid) {
            let mut zeta_past = Vec::with_capacity((n + 1) * trs[t].obs.dim());
            for tr in &trs[t - n..=t] {
                zeta_past.extend(tr.obs.flat());
            }
            let mut zeta_future = Vec::with_capacity((n + 1) * trs[t].obs.dim());
            for tr in &trs[t..=t + n] {
                zeta_future.extend(tr.obs.flat());
            }
            let positions: Vec<[f64; 3]> = trs[t - n..=t + n].iter().map(|tr| tr.position).collect();
            let gamma_future: Vec<f64> = trs[t..=t + n].iter().map(|tr| tr.r_ext).collect();
            out.push(SegmentBundle { anchor: t, zeta_past, zeta_future, positions, gamma_future });
        }
        t += stride;
    }
    out
}

/// One inverse/forward head with its optimizer state.
#[derive(Debug, Clone)]
pub struct CuriosityHead {
    pub g: Mlp,
    pub f: Mlp,
    opt_g: AdamState,
    opt_f: AdamState,
}

impl CuriosityHead {
    fn new(g_in: usize, f_in: usize, f_out: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let g = Mlp::new(&[g_in, hidden, hidden, 9], 1.0, rng);
        let f = Mlp::new(&[f_in, hidden, hidden, f_out], 1.0, rng);
        let opt_g = AdamState::new(g.param_len());
        let opt_f = AdamState::new(f.param_len());
        Self { g, f, opt_g, opt_f }
    }
}

/// Per-head prediction-error signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSignal {
    pub reward: f64,
    pub inverse_loss: f64,
    pub forward_loss: f64,
}

/// The 5 + 5 head ensemble.
#[derive(Debug, Clone)]
pub struct CuriosityEnsemble {
    pub ss_heads: Vec<CuriosityHead>,
    pub sr_heads: Vec<CuriosityHead>,
    pub cfg: HcmConfig,
    pub obs_dim: usize,
    adam: AdamParams,
}

impl CuriosityEnsemble {
    pub fn new(obs_dim: usize, cfg: HcmConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let seg = cfg.segment_dim(obs_dim);
        let gamma_len = cfg.n + 1;
        let ss_heads = (0..cfg.heads_ss)
            .map(|_| CuriosityHead::new(2 * seg, seg + 9, seg, cfg.hidden, rng))
            .collect();
        let sr_heads = (0..cfg.heads_sr)
            .map(|_| CuriosityHead::new(seg + gamma_len, seg + 9, gamma_len, cfg.hidden, rng))
            .collect();
        Ok(Self { ss_heads, sr_heads, cfg, obs_dim, adam: AdamParams::default() })
    }

    pub fn head_count(&self) -> usize {
        self.ss_heads.len() + self.sr_heads.len()
    }
}

fn half_sq_norm(a: &Array1<f64>, b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// States-actions-states head signal on one bundle:
/// L_I = 0.5 |g(zeta_past ++ zeta_future) - wp|^2,
/// L_F = 0.5 |f(zeta_past ++ wp) - zeta_future|^2,
/// reward = (1 - beta) L_I + beta L_F.
pub fn head_reward_ss(head: &CuriosityHead, bundle: &SegmentBundle, beta: f64) -> HeadSignal {
    let wp = bundle.waypoints().flat();

    let mut g_in = Vec::with_capacity(bundle.zeta_past.len() + bundle.zeta_future.len());
    g_in.extend_from_slice(&bundle.zeta_past);
    g_in.extend_from_slice(&bundle.zeta_future);
    let w_hat = head.g.forward1(&Array1::from(g_in));
    let inverse_loss = half_sq_norm(&w_hat, &wp);

    let mut f_in = Vec::with_capacity(bundle.zeta_past.len() + 9);
    f_in.extend_from_slice(&bundle.zeta_past);
    f_in.extend_from_slice(&wp);
    let phi_hat = head.f.forward1(&Array1::from(f_in));
    let forward_loss = half_sq_norm(&phi_hat, &bundle.zeta_future);

    HeadSignal {
        reward: (1.0 - beta) * inverse_loss + beta * forward_loss,
        inverse_loss,
        forward_loss,
    }
}

/// States-actions-rewards head signal on one bundle: the inverse net reads
/// the reward segment instead of the future observations, the forward net
/// predicts the reward segment.
pub fn head_reward_sr(head: &CuriosityHead, bundle: &SegmentBundle, beta: f64) -> HeadSignal {
    let wp = bundle.waypoints().flat();

    let mut g_in = Vec::with_capacity(bundle.zeta_past.len() + bundle.gamma_future.len());
    g_in.extend_from_slice(&bundle.zeta_past);
    g_in.extend_from_slice(&bundle.gamma_future);
    let w_hat = head.g.forward1(&Array1::from(g_in));
    let inverse_loss = half_sq_norm(&w_hat, &wp);

    let mut f_in = Vec::with_capacity(bundle.zeta_past.len() + 9);
    f_in.extend_from_slice(&bundle.zeta_past);
    f_in.extend_from_slice(&wp);
    let gamma_hat = head.f.forward1(&Array1::from(f_in));
    let forward_loss = half_sq_norm(&gamma_hat, &bundle.gamma_future);

    HeadSignal {
        reward: (1.0 - beta) * inverse_loss + beta * forward_loss,
        inverse_loss,
        forward_loss,
    }
}

/// Ensemble curiosity reward: alpha_curiosity times the mean of all head
/// rewards (both families).
pub fn ensemble_reward(ensemble: &CuriosityEnsemble, bundle: &SegmentBundle) -> f64 {
    let beta = ensemble.cfg.beta;
    let sum: f64 = ensemble
        .ss_heads
        .iter()
        .map(|h| head_reward_ss(h, bundle, beta).reward)
        .chain(ensemble.sr_heads.iter().map(|h| head_reward_sr(h, bundle, beta).reward))
        .sum();
    ensemble.cfg.alpha_curiosity * sum / ensemble.head_count() as f64
}

/// Spreads a curiosity reward over the buffer around the anchor:
/// r_int[anchor +- x] += kappa^x * r_curiosity for x = 0..n, clipped at
/// buffer ends and flight boundaries; the anchor receives x = 0 once.
pub fn distribute_trajectory(
    buffer: &mut RolloutBuffer,
    anchor: usize,
    r_curiosity: f64,
    kappa: f64,
    n: usize,
) {
    let len = buffer.transitions.len();
    if anchor >= len {
        return;
    }
    let fid = buffer.transitions[anchor].flight_id;
    for x in 0..=n {
        let add = kappa.powi(x as i32) * r_curiosity;
        let fwd = anchor + x;
        if fwd < len && buffer.transitions[fwd].flight_id == fid {
            buffer.transitions[fwd].r_int += add;
        }
        if x > 0 {
            if let Some(bwd) = anchor.checked_sub(x) {
                if buffer.transitions[bwd].flight_id == fid {
                    buffer.transitions[bwd].r_int += add;
                }
            }
        }
    }
}

/// Matrix view of a bundle list for batched head evaluation/training.
#[derive(Debug, Clone)]
pub struct BundleBatch {
    /// (B, seg) flattened past segments.
    pub zp: Array2<f64>,
    /// (B, seg) flattened future segments.
    pub zf: Array2<f64>,
    /// (B, 9) waypoint targets.
    pub wp: Array2<f64>,
    /// (B, n+1) reward segments.
    pub gamma: Array2<f64>,
    /// Anchor buffer indices, one per row.
    pub anchors: Vec<usize>,
}

impl BundleBatch {
    pub fn new(bundles: &[SegmentBundle]) -> Result<Self> {
        if bundles.is_empty() {
            return Err(Error::Invalid("BundleBatch::new on empty bundle list".into()));
        }
        let b = bundles.len();
        let seg = bundles[0].zeta_past.len();
        let glen = bundles[0].gamma_future.len();
        let mut zp = Array2::zeros((b, seg));
        let mut zf = Array2::zeros((b, seg));
        let mut wp = Array2::zeros((b, 9));
        let mut gamma = Array2::zeros((b, glen));
        let mut anchors = Vec::with_capacity(b);
        for (row, bundle) in bundles.iter().enumerate() {
            if bundle.zeta_past.len() != seg || bundle.gamma_future.len() != glen {
                return Err(Error::Shape("inconsistent bundle dimensions".into()));
            }
            for (c, v) in bundle.zeta_past.iter().enumerate() {
                zp[[row, c]] = *v;
            }
            for (c, v) in bundle.zeta_future.iter().enumerate() {
                zf[[row, c]] = *v;
            }
            for (c, v) in bundle.waypoints().flat().iter().enumerate() {
                wp[[row, c]] = *v;
            }
            for (c, v) in bundle.gamma_future.iter().enumerate() {
                gamma[[row, c]] = *v;
            }
            anchors.push(bundle.anchor);
        }
        Ok(Self { zp, zf, wp, gamma, anchors })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    fn rows(&self, idx: &[usize]) -> Self {
        Self {
            zp: self.zp.select(Axis(0), idx),
            zf: self.zf.select(Axis(0), idx),
            wp: self.wp.select(Axis(0), idx),
            gamma: self.gamma.select(Axis(0), idx),
            anchors: idx.iter().map(|&i| self.anchors[i]).collect(),
        }
    }

    fn g_in_ss(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.zp.view(), self.zf.view()]).expect("concat")
    }

    fn g_in_sr(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.zp.view(), self.gamma.view()]).expect("concat")
    }

    fn f_in(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.zp.view(), self.wp.view()]).expect("concat")
    }
}

fn row_half_sq_norms(diff: &Array2<f64>) -> Vec<f64> {
    diff.rows().into_iter().map(|r| 0.5 * r.dot(&r)).collect()
}

/// Per-bundle ensemble rewards, evaluated batched across all heads.
pub fn ensemble_rewards(ensemble: &CuriosityEnsemble, batch: &BundleBatch) -> Vec<f64> {
    let beta = ensemble.cfg.beta;
    let b = batch.len();
    let mut acc = vec![0.0; b];

    let g_in_ss = batch.g_in_ss();
    let g_in_sr = batch.g_in_sr();
    let f_in = batch.f_in();

    for head in &ensemble.ss_heads {
        let li = row_half_sq_norms(&(head.g.forward(&g_in_ss) - &batch.wp));
        let lf = row_half_sq_norms(&(head.f.forward(&f_in) - &batch.zf));
        for i in 0..b {
            acc[i] += (1.0 - beta) * li[i] + beta * lf[i];
        }
    }
    for head in &ensemble.sr_heads {
        let li = row_half_sq_norms(&(head.g.forward(&g_in_sr) - &batch.wp));
        let lf = row_half_sq_norms(&(head.f.forward(&f_in) - &batch.gamma));
        for i in 0..b {
            acc[i] += (1.0 - beta) * li[i] + beta * lf[i];
        }
    }
    let scale = ensemble.cfg.alpha_curiosity / ensemble.head_count() as f64;
    acc.iter().map(|v| v * scale).collect()
}

/// Mean per-family losses from one `hcm_update`.
#[derive(Debug, Clone, Default)]
pub struct HcmUpdateStats {
    pub per_head_inverse: Vec<f64>,
    pub per_head_forward: Vec<f64>,
    pub mean_inverse: f64,
    pub mean_forward: f64,
    pub aborted_heads: usize,
}

/// Trains one net of one head over the minibatch chunks; returns the mean
/// loss, or None if a non-finite loss forced a rollback of this net.
fn train_net(
    net: &mut Mlp,
    opt: &mut AdamState,
    adam: &AdamParams,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    weight: f64,
    lr: f64,
    order: &[Vec<usize>],
    minibatch: usize,
) -> Option<f64> {
    let snap = net.params_flat();
    let snap_opt = opt.clone();
    let mut last_mean = 0.0;
    for epoch_order in order {
        let mut acc = 0.0;
        let mut chunks = 0;
        for chunk in epoch_order.chunks(minibatch.max(1)) {
            let x = inputs.select(Axis(0), chunk);
            let t = targets.select(Axis(0), chunk);
            let bf = chunk.len() as f64;
            let (y, cache) = net.forward_cached(&x);
            let diff = &y - &t;
            let loss = 0.5 * diff.mapv(|v| v * v).sum() / bf;
            if !loss.is_finite() {
                net.load_params_from(&snap);
                *opt = snap_opt;
                return None;
            }
            if weight > 0.0 {
                let g = diff * (weight / bf);
                let (grads, _) = net.backward(&cache, &g);
                let mut p = net.params_flat();
                adam_step(&mut p, &grads.flat(), opt, lr, adam).ok()?;
                net.load_params_from(&p);
            }
            acc += loss;
            chunks += 1;
        }
        last_mean = acc / chunks as f64;
    }
    Some(last_mean)
}

/// Independently trains every head on its own prediction losses: the g net
/// minimizes (1 - beta) L_I, the f net beta L_F. Heads that hit a
/// non-finite loss roll back and the others continue.
pub fn hcm_update(
    ensemble: &mut CuriosityEnsemble,
    batch: &BundleBatch,
    lr: f64,
    rng: &mut impl Rng,
) -> Result<HcmUpdateStats> {
    if batch.is_empty() {
        return Err(Error::Invalid("hcm_update on empty bundle batch".into()));
    }
    let cfg = ensemble.cfg.clone();
    let n = batch.len();
    // One shuffled order per epoch, shared by every head so head training
    // stays independent of head iteration order.
    let order: Vec<Vec<usize>> = (0..cfg.epochs)
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx
        })
        .collect();

    let g_in_ss = batch.g_in_ss();
    let g_in_sr = batch.g_in_sr();
    let f_in = batch.f_in();

    let mut stats = HcmUpdateStats::default();
    for head in &mut ensemble.ss_heads {
        let li = train_net(
            &mut head.g, &mut head.opt_g, &ensemble.adam, &g_in_ss, &batch.wp,
            1.0 - cfg.beta, lr, &order, cfg.minibatch,
        );
        let lf = train_net(
            &mut head.f, &mut head.opt_f, &ensemble.adam, &f_in, &batch.zf,
            cfg.beta, lr, &order, cfg.minibatch,
        );
        match (li, lf) {
            (Some(a), Some(b)) => {
                stats.per_head_inverse.push(a);
                stats.per_head_forward.push(b);
            }
            _ => {
                log::error!("hcm ss head hit a non-finite loss; rolled back");
                stats.aborted_heads += 1;
                stats.per_head_inverse.push(f64::NAN);
                stats.per_head_forward.push(f64::NAN);
            }
        }
    }
    for head in &mut ensemble.sr_heads {
        let li = train_net(
            &mut head.g, &mut head.opt_g, &ensemble.adam, &g_in_sr, &batch.wp,
            1.0 - cfg.beta, lr, &order, cfg.minibatch,
        );
        let lf = train_net(
            &mut head.f, &mut head.opt_f, &ensemble.adam, &f_in, &batch.gamma,
            cfg.beta, lr, &order, cfg.minibatch,
        );
        match (li, lf) {
            (Some(a), Some(b)) => {
                stats.per_head_inverse.push(a);
                stats.per_head_forward.push(b);
            }
            _ => {
                log::error!("hcm sr head hit a non-finite loss; rolled back");
                stats.aborted_heads += 1;
                stats.per_head_inverse.push(f64::NAN);
                stats.per_head_forward.push(f64::NAN);
            }
        }
    }
    let ok: Vec<(f64, f64)> = stats
        .per_head_inverse
        .iter()
        .zip(&stats.per_head_forward)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if !ok.is_empty() {
        stats.mean_inverse = ok.iter().map(|(a, _)| a).sum::<f64>() / ok.len() as f64;
        stats.mean_forward = ok.iter().map(|(_, b)| b).sum::<f64>() / ok.len() as f64;
    }
    Ok(stats)
}
