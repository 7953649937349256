//! Independent oracles (finite differences, brute-force advantage sums) and
//! the `selftest` CLI subcommand that runs a condensed correctness sweep.
//! The oracles here deliberately re-derive results through a different path
//! than the implementation they check.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{self, EnvConfig, Observation};
use crate::hcm::{self, BundleBatch, CuriosityEnsemble, HcmConfig, SegmentBundle};
use crate::icm::{IcmBatch, IcmConfig, IcmNets};
use crate::nn::{log_prob_and_entropy, FlatParams, PolicyOutput, ACTION_DIM};
use crate::ppo::{
    clipped_surrogate, compute_gae, gather_obs, PpoConfig, PpoNets, RolloutBuffer, Transition,
};

/// Central finite-difference gradient of `f` at `x0` with step `h`.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    // Leave the function's captured state at the original point.
    let _ = f(&x);
    grad
}

/// Largest relative disagreement between two gradient vectors.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// O(T^2) reference GAE: directly sums (gamma lambda)^l delta_{t+l},
/// truncating after the first terminal.
pub fn brute_force_gae(
    rewards: &[f64],
    values: &[f64],
    terminals: &[bool],
    gamma: f64,
    lam: f64,
) -> Vec<f64> {
    let t_len = rewards.len();
    let delta = |t: usize| -> f64 {
        let mask = if terminals[t] { 0.0 } else { 1.0 };
        rewards[t] + gamma * values[t + 1] * mask - values[t]
    };
    (0..t_len)
        .map(|t| {
            let mut acc = 0.0;
            let mut weight = 1.0;
            for l in 0..(t_len - t) {
                acc += weight * delta(t + l);
                if terminals[t + l] {
                    break;
                }
                weight *= gamma * lam;
            }
            acc
        })
        .collect()
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

/// Builds a small random minibatch for gradient checks. Old log-probs are
/// offset from the current ones so the ratio stays strictly inside the clip
/// region (the objective is smooth there).
fn fd_fixture(
    aux_dim: usize,
    batch: usize,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
) -> (PpoNets, RolloutBuffer) {
    let mut nets = PpoNets::new(aux_dim, cfg, rng);
    // Move log_std off its init so its gradient is generic.
    nets.policy.log_std.mapv_inplace(|v| v + 0.1);
    let mut buffer = RolloutBuffer::with_capacity(batch);
    for _ in 0..batch {
        let obs = random_obs(aux_dim, rng);
        let out = crate::nn::forward_policy(&nets.policy, &obs).expect("finite");
        let action = [
            out.mean[0] + rng.random_range(-0.8..0.8),
            out.mean[1] + rng.random_range(-0.8..0.8),
            out.mean[2] + rng.random_range(-0.8..0.8),
            out.mean[3] + rng.random_range(-0.8..0.8),
        ];
        let (lp, _) = log_prob_and_entropy(&out, &action);
        buffer.push(Transition {
            obs,
            action,
            log_prob_old: lp + rng.random_range(-0.08..0.08),
            r_ext: rng.random_range(-1.0..1.0),
            r_int: 0.0,
            v_ext: 0.0,
            v_int: 0.0,
            terminal: false,
            flight_id: 0,
            position: [0.0; 3],
        });
    }
    buffer.advantages = (0..batch).map(|_| rng.random_range(-1.5..1.5)).collect();
    buffer.target_v_ext = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
    buffer.target_v_int = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();
    (nets, buffer)
}

/// PPO policy loss (clipped surrogate + entropy bonus, to be minimized) as
/// a pure function of the flat policy parameters.
pub fn policy_loss_value(nets: &PpoNets, buffer: &RolloutBuffer, cfg: &PpoConfig) -> f64 {
    let idx: Vec<usize> = (0..buffer.len()).collect();
    let (odo, aux) = gather_obs(&buffer.transitions, &idx);
    let mean = nets.policy.net.forward_batch(&odo, &aux);
    let log_std = nets.policy.log_std_arr();
    let b = buffer.len() as f64;
    let mut surr = 0.0;
    let mut ent = 0.0;
    for (row, tr) in buffer.transitions.iter().enumerate() {
        let mut m = [0.0; ACTION_DIM];
        for k in 0..ACTION_DIM {
            m[k] = mean[[row, k]];
        }
        let out = PolicyOutput { mean: m, log_std };
        let (lp, e) = log_prob_and_entropy(&out, &tr.action);
        surr += clipped_surrogate(lp, tr.log_prob_old, buffer.advantages[row], cfg.clip_eps);
        ent += e;
    }
    -surr / b - cfg.c2 * ent / b
}

/// Analytic gradient of `policy_loss_value` w.r.t. the flat policy params.
pub fn policy_loss_grad(nets: &PpoNets, buffer: &RolloutBuffer, cfg: &PpoConfig) -> Vec<f64> {
    let idx: Vec<usize> = (0..buffer.len()).collect();
    let (odo, aux) = gather_obs(&buffer.transitions, &idx);
    let (mean, cache) = nets.policy.net.forward_batch_cached(&odo, &aux);
    let log_std = nets.policy.log_std_arr();
    let b = buffer.len() as f64;
    let mut g_mean = Array2::zeros((buffer.len(), ACTION_DIM));
    let mut g_log_std = vec![0.0; ACTION_DIM];
    for (row, tr) in buffer.transitions.iter().enumerate() {
        let mut m = [0.0; ACTION_DIM];
        for k in 0..ACTION_DIM {
            m[k] = mean[[row, k]];
        }
        let out = PolicyOutput { mean: m, log_std };
        let (lp, _) = log_prob_and_entropy(&out, &tr.action);
        let adv = buffer.advantages[row];
        let ratio = (lp - tr.log_prob_old).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let active = ratio * adv <= clipped * adv;
        let g_lp = if active { -adv * ratio / b } else { 0.0 };
        for k in 0..ACTION_DIM {
            let sigma = log_std[k].exp();
            let z = (tr.action[k] - m[k]) / sigma;
            g_mean[[row, k]] = g_lp * z / sigma;
            g_log_std[k] += g_lp * (z * z - 1.0);
        }
    }
    for g in g_log_std.iter_mut() {
        *g -= cfg.c2;
    }
    let grads = nets.policy.net.backward(&cache, &g_mean);
    let mut flat = vec![0.0; nets.policy.param_len()];
    let split = grads.flat_len();
    grads.copy_to(&mut flat[..split]);
    flat[split..].copy_from_slice(&g_log_std);
    flat
}

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Gradient check of the PPO policy loss on `instances` random small nets.
pub fn check_policy_gradients(instances: usize, tol: f64, seed: u64) -> CheckOutcome {
    let cfg = PpoConfig { hidden: 6, c2: 0.01, ..PpoConfig::default() };
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + i as u64);
        let (mut nets, buffer) = fd_fixture(5, 6, &cfg, &mut rng);
        let analytic = policy_loss_grad(&nets, &buffer, &cfg);
        let x0 = nets.policy.params_flat();
        let fd = finite_difference_gradient(
            |p| {
                nets.policy.load_params_from(p);
                policy_loss_value(&nets, &buffer, &cfg)
            },
            &x0,
            1e-5,
        );
        worst = worst.max(max_relative_error(&analytic, &fd));
    }
    check("ppo policy loss gradients", worst < tol, format!("max rel err {worst:.3e}"))
}

/// Gradient check of one value head's squared-error loss.
pub fn check_value_gradients(instances: usize, tol: f64, seed: u64, ext: bool) -> CheckOutcome {
    let cfg = PpoConfig { hidden: 6, ..PpoConfig::default() };
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000 + i as u64);
        let (mut nets, buffer) = fd_fixture(5, 6, &cfg, &mut rng);
        let idx: Vec<usize> = (0..buffer.len()).collect();
        let (odo, aux) = gather_obs(&buffer.transitions, &idx);
        let targets = if ext { &buffer.target_v_ext } else { &buffer.target_v_int };
        let b = buffer.len() as f64;

        let loss_of = |net: &crate::nn::SkipNet| -> f64 {
            let v = net.forward_batch(&odo, &aux);
            targets
                .iter()
                .enumerate()
                .map(|(r, t)| (v[[r, 0]] - t) * (v[[r, 0]] - t))
                .sum::<f64>()
                / b
        };
        let net = if ext { &mut nets.value_ext } else { &mut nets.value_int };
        let (v, cache) = net.forward_batch_cached(&odo, &aux);
        let mut g = Array2::zeros((buffer.len(), 1));
        for (r, t) in targets.iter().enumerate() {
            g[[r, 0]] = 2.0 * (v[[r, 0]] - t) / b;
        }
        let analytic = net.backward(&cache, &g).flat();
        let x0 = net.params_flat();
        let fd = finite_difference_gradient(
            |p| {
                net.load_params_from(p);
                loss_of(net)
            },
            &x0,
            1e-5,
        );
        worst = worst.max(max_relative_error(&analytic, &fd));
    }
    let name = if ext { "extrinsic value loss gradients" } else { "intrinsic value loss gradients" };
    check(name, worst < tol, format!("max rel err {worst:.3e}"))
}

/// Gradient check of the mixed ICM loss w.r.t. both nets jointly.
pub fn check_icm_gradients(instances: usize, tol: f64, seed: u64) -> CheckOutcome {
    let cfg = IcmConfig { hidden: 6, ..IcmConfig::default() };
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2000 + i as u64);
        let mut nets = IcmNets::new(23, &cfg, &mut rng).expect("valid config");
        let triples: Vec<(Observation, [f64; 4], Observation)> = (0..5)
            .map(|_| {
                (
                    random_obs(5, &mut rng),
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ],
                    random_obs(5, &mut rng),
                )
            })
            .collect();
        let refs: Vec<(&Observation, [f64; 4], &Observation)> =
            triples.iter().map(|(s, a, s1)| (s, *a, s1)).collect();
        let batch = IcmBatch::from_triples(&refs);
        let b = batch.len() as f64;
        let beta = cfg.beta;

        let loss_of = |nets: &IcmNets| -> f64 {
            let a_hat = nets.inverse.forward(&batch.inverse_in);
            let li = 0.5 * (&a_hat - &batch.actions).mapv(|v| v * v).sum() / b;
            let p_hat = nets.forward.forward(&batch.forward_in);
            let lf = 0.5 * (&p_hat - &batch.phi_next).mapv(|v| v * v).sum() / b;
            (1.0 - beta) * li + beta * lf
        };

        let (a_hat, cache_i) = nets.inverse.forward_cached(&batch.inverse_in);
        let gi = (&a_hat - &batch.actions) * ((1.0 - beta) / b);
        let grads_i = nets.inverse.backward(&cache_i, &gi).0.flat();
        let (p_hat, cache_f) = nets.forward.forward_cached(&batch.forward_in);
        let gf = (&p_hat - &batch.phi_next) * (beta / b);
        let grads_f = nets.forward.backward(&cache_f, &gf).0.flat();
        let mut analytic = grads_i;
        analytic.extend(grads_f);

        let mut x0 = nets.inverse.params_flat();
        let split = x0.len();
        x0.extend(nets.forward.params_flat());
        let fd = finite_difference_gradient(
            |p| {
                nets.inverse.load_params_from(&p[..split]);
                nets.forward.load_params_from(&p[split..]);
                loss_of(&nets)
            },
            &x0,
            1e-5,
        );
        worst = worst.max(max_relative_error(&analytic, &fd));
    }
    check("icm loss gradients", worst < tol, format!("max rel err {worst:.3e}"))
}

fn random_bundle(n: usize, aux_dim: usize, rng: &mut impl Rng) -> SegmentBundle {
    let obs_dim = Observation::zeros(aux_dim).dim();
    SegmentBundle {
        anchor: n,
        zeta_past: (0..(n + 1) * obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        zeta_future: (0..(n + 1) * obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        positions: (0..2 * n + 1)
            .map(|_| {
                [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(0.0..3.0),
                ]
            })
            .collect(),
        gamma_future: (0..n + 1).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Gradient check of every head loss in a small ensemble (both families).
pub fn check_hcm_gradients(instances: usize, tol: f64, seed: u64) -> CheckOutcome {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 3000 + i as u64);
        let cfg = HcmConfig {
            n: 2,
            stride: 1,
            hidden: 6,
            heads_ss: 1,
            heads_sr: 1,
            ..HcmConfig::default()
        };
        let beta = cfg.beta;
        let ens = CuriosityEnsemble::new(23, cfg, &mut rng).expect("valid config");
        let bundles: Vec<SegmentBundle> = (0..4).map(|_| random_bundle(2, 5, &mut rng)).collect();
        let batch = BundleBatch::new(&bundles).expect("nonempty");
        let b = batch.len() as f64;

        // Head loss = (1-beta) L_I + beta L_F over the bundle batch, as a
        // function of the concatenated [g params | f params].
        for (head, sr) in [(&ens.ss_heads[0], false), (&ens.sr_heads[0], true)] {
            let g_in = if sr {
                ndarray::concatenate(ndarray::Axis(1), &[batch.zp.view(), batch.gamma.view()])
                    .unwrap()
            } else {
                ndarray::concatenate(ndarray::Axis(1), &[batch.zp.view(), batch.zf.view()])
                    .unwrap()
            };
            let f_in =
                ndarray::concatenate(ndarray::Axis(1), &[batch.zp.view(), batch.wp.view()]).unwrap();
            let f_target = if sr { &batch.gamma } else { &batch.zf };

            let mut g_net = head.g.clone();
            let mut f_net = head.f.clone();
            let loss_of = |g_net: &crate::nn::Mlp, f_net: &crate::nn::Mlp| -> f64 {
                let w_hat = g_net.forward(&g_in);
                let li = 0.5 * (&w_hat - &batch.wp).mapv(|v| v * v).sum() / b;
                let p_hat = f_net.forward(&f_in);
                let lf = 0.5 * (&p_hat - f_target).mapv(|v| v * v).sum() / b;
                (1.0 - beta) * li + beta * lf
            };

            let (w_hat, cache_g) = g_net.forward_cached(&g_in);
            let gg = (&w_hat - &batch.wp) * ((1.0 - beta) / b);
            let grads_g = g_net.backward(&cache_g, &gg).0.flat();
            let (p_hat, cache_f) = f_net.forward_cached(&f_in);
            let gf = (&p_hat - f_target) * (beta / b);
            let grads_f = f_net.backward(&cache_f, &gf).0.flat();
            let mut analytic = grads_g;
            analytic.extend(grads_f);

            let mut x0 = g_net.params_flat();
            let split = x0.len();
            x0.extend(f_net.params_flat());
            let fd = finite_difference_gradient(
                |p| {
                    g_net.load_params_from(&p[..split]);
                    f_net.load_params_from(&p[split..]);
                    loss_of(&g_net, &f_net)
                },
                &x0,
                1e-5,
            );
            worst = worst.max(max_relative_error(&analytic, &fd));
        }
    }
    check("hcm head loss gradients", worst < tol, format!("max rel err {worst:.3e}"))
}

/// GAE against the brute-force oracle on random sequences.
pub fn check_gae_oracle(sequences: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 4000);
    let mut worst = 0.0f64;
    for _ in 0..sequences {
        let t = rng.random_range(1..=64usize);
        let rewards: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..=t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let terminals: Vec<bool> = (0..t).map(|_| rng.random_range(0.0..1.0) < 0.2).collect();
        let gamma = rng.random_range(0.8..0.999);
        let lam = rng.random_range(0.8..0.999);
        let got = compute_gae(&rewards, &values, &terminals, gamma, lam).expect("valid");
        let oracle = brute_force_gae(&rewards, &values, &terminals, gamma, lam);
        for (a, b) in got.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    check("gae brute-force oracle", worst < 1e-10, format!("max abs err {worst:.3e}"))
}

/// Clip semantics against the direct formula on random triples.
pub fn check_clip_semantics(samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 5000);
    let eps = 0.2;
    let mut ok = true;
    let mut detail = String::from("all samples matched");
    for _ in 0..samples {
        let log_ratio = rng.random_range(-2.0..2.0f64);
        let adv = rng.random_range(-5.0..5.0f64);
        let got = clipped_surrogate(log_ratio, 0.0, adv, eps);
        let r = log_ratio.exp();
        let direct = (r * adv).min(r.clamp(1.0 - eps, 1.0 + eps) * adv);
        if (got - direct).abs() > 1e-12 {
            ok = false;
            detail = format!("mismatch at r={r} adv={adv}: {got} vs {direct}");
            break;
        }
        if adv > 0.0 && r > 1.0 + eps && got > r * adv {
            ok = false;
            detail = format!("clipped exceeded unclipped at r={r} adv={adv}");
            break;
        }
    }
    check("clipped surrogate semantics", ok, detail)
}

/// Physics spot checks: hover equilibrium, free fall, energy drift.
pub fn check_physics() -> CheckOutcome {
    use crate::dynamics::{hover_speed, step, RigidBodyState, VehicleParams};
    use nalgebra::Vector3;

    let params = VehicleParams { motor_noise_std: 0.0, ..VehicleParams::default() };
    let wh = hover_speed(&params);
    let mut state = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, 1.5));
    state.motor_speeds = [wh; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hover = step(&state, &[wh; 4], &params, 0.01, &mut rng).expect("finite");
    let hover_ok = hover.linear_accel.norm() < 1e-6;

    let ff = step(
        &RigidBodyState::at_rest(Vector3::new(0.0, 0.0, 10.0)),
        &[0.0; 4],
        &params,
        0.01,
        &mut rng,
    )
    .expect("finite");
    let ff_ok = ff.linear_accel == Vector3::new(0.0, 0.0, -params.gravity);

    let frictionless = VehicleParams {
        linear_drag_coeff: 0.0,
        angular_drag_coeff: 0.0,
        ..params
    };
    let mut s = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, 50.0));
    s.velocity = Vector3::new(1.0, -0.5, 0.3);
    s.angular_velocity = Vector3::new(1.0, 2.0, 0.5);
    let energy = |st: &RigidBodyState| {
        0.5 * frictionless.mass * st.velocity.norm_squared()
            + frictionless.mass * frictionless.gravity * st.position.z
            + 0.5
                * (frictionless.inertia_diag.x * st.angular_velocity.x.powi(2)
                    + frictionless.inertia_diag.y * st.angular_velocity.y.powi(2)
                    + frictionless.inertia_diag.z * st.angular_velocity.z.powi(2))
    };
    let e0 = energy(&s);
    for _ in 0..100 {
        s = step(&s, &[0.0; 4], &frictionless, 0.01, &mut rng).expect("finite");
    }
    let drift = ((energy(&s) - e0) / e0).abs();
    let energy_ok = drift < 1e-4;

    check(
        "physics sanity (hover, free fall, energy)",
        hover_ok && ff_ok && energy_ok,
        format!(
            "hover residual {:.3e}, free-fall exact {}, energy drift {:.3e}",
            hover.linear_accel.norm(),
            ff_ok,
            drift
        ),
    )
}

/// Reward formula spot checks.
pub fn check_reward_formulas() -> CheckOutcome {
    let cfg = EnvConfig::default();
    let at_goal = env::compute_flight_reward(&[0.0; 6], &cfg);
    let boundary_in = env::compute_flight_reward(&[cfg.x_max / 2.0, 0.0, 0.0, 0.0, 0.0, 0.0], &cfg);
    let boundary_out =
        env::compute_flight_reward(&[cfg.x_max / 2.0 + 1e-12, 0.0, 0.0, 0.0, 0.0, 0.0], &cfg);
    let ok = at_goal == 3.0 * cfg.alpha_p
        && (boundary_in - cfg.alpha_p * 2.5).abs() < 1e-12
        && (boundary_out - cfg.alpha_p).abs() < 1e-12;
    check(
        "reward shaping formulas",
        ok,
        format!("goal {at_goal}, boundary {boundary_in} / {boundary_out}"),
    )
}

/// Kappa-decay exactness of the trajectory distribution.
pub fn check_kappa_decay() -> CheckOutcome {
    let kappa = 0.9;
    let n = 8;
    let r = 0.73;
    let mut buf = RolloutBuffer::with_capacity(32);
    for i in 0..32 {
        buf.push(Transition {
            obs: Observation::zeros(5),
            action: [0.0; 4],
            log_prob_old: 0.0,
            r_ext: 0.0,
            r_int: 0.0,
            v_ext: 0.0,
            v_int: 0.0,
            terminal: false,
            flight_id: 0,
            position: [i as f64, 0.0, 0.0],
        });
    }
    hcm::distribute_trajectory(&mut buf, 16, r, kappa, n);
    let mut ok = true;
    for x in 0..=n {
        let expect = kappa.powi(x as i32) * r;
        if buf.transitions[16 + x].r_int != expect || buf.transitions[16 - x].r_int != expect {
            ok = false;
        }
    }
    check("kappa-decay distribution", ok, "powers match to machine precision".into())
}

/// Runs the condensed oracle sweep; returns true when everything passed.
pub fn run_selftest() -> bool {
    let checks = vec![
        check_policy_gradients(3, 1e-4, 100),
        check_value_gradients(3, 1e-4, 100, true),
        check_value_gradients(3, 1e-4, 100, false),
        check_icm_gradients(3, 1e-4, 100),
        check_hcm_gradients(2, 1e-4, 100),
        check_gae_oracle(200, 100),
        check_clip_semantics(20_000, 100),
        check_physics(),
        check_reward_formulas(),
        check_kappa_decay(),
    ];
    let mut all = true;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("selftest: {:<45} {} ({})", c.name, status, c.detail);
        all &= c.passed;
    }
    all
}
