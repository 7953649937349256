//! Policy and value networks with the skip-concatenation architecture: the
//! odometry block feeds the first hidden layer, the auxiliary block is
//! concatenated to that layer's output before the second hidden layer. The
//! policy head outputs a 4-d Gaussian mean with a state-independent learned
//! log-std; value heads share the structure with a scalar output.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;

use super::mlp::{linear_backward, Activation, LayerGrads, Linear};
use super::FlatParams;
use crate::env::{Observation, ODOMETRY_DIM};
use crate::error::{Error, Result};

pub const ACTION_DIM: usize = 4;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Two tanh hidden layers with the aux block spliced in after layer 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipNet {
    pub l1: Linear,
    pub l2: Linear,
    pub out: Linear,
}

/// Cached activations for one batched forward pass.
#[derive(Debug, Clone)]
pub struct SkipCache {
    odo: Array2<f64>,
    /// [tanh(l1) | aux], the input of layer 2.
    cat: Array2<f64>,
    h2: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SkipGrads {
    pub l1: LayerGrads,
    pub l2: LayerGrads,
    pub out: LayerGrads,
}

impl SkipGrads {
    pub fn flat_len(&self) -> usize {
        self.l1.len() + self.l2.len() + self.out.len()
    }

    pub fn copy_to(&self, out: &mut [f64]) {
        let (a, b) = (self.l1.len(), self.l2.len());
        self.l1.copy_to(&mut out[..a]);
        self.l2.copy_to(&mut out[a..a + b]);
        self.out.copy_to(&mut out[a + b..]);
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.flat_len()];
        self.copy_to(&mut v);
        v
    }
}

impl SkipNet {
    pub fn new(
        odo_dim: usize,
        aux_dim: usize,
        hidden: usize,
        out_dim: usize,
        out_gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            l1: Linear::new(odo_dim, hidden, 1.0, rng),
            l2: Linear::new(hidden + aux_dim, hidden, 1.0, rng),
            out: Linear::new(hidden, out_dim, out_gain, rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.l1.out_dim()
    }

    pub fn odo_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn aux_dim(&self) -> usize {
        self.l2.in_dim() - self.l1.out_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.out.out_dim()
    }

    pub fn forward_batch(&self, odo: &Array2<f64>, aux: &Array2<f64>) -> Array2<f64> {
        let h1 = self.l1.forward(odo).mapv(f64::tanh);
        let cat = concatenate(Axis(1), &[h1.view(), aux.view()]).expect("concat shapes");
        let h2 = self.l2.forward(&cat).mapv(f64::tanh);
        self.out.forward(&h2)
    }

    pub fn forward_batch_cached(
        &self,
        odo: &Array2<f64>,
        aux: &Array2<f64>,
    ) -> (Array2<f64>, SkipCache) {
        let h1 = self.l1.forward(odo).mapv(f64::tanh);
        let cat = concatenate(Axis(1), &[h1.view(), aux.view()]).expect("concat shapes");
        let h2 = self.l2.forward(&cat).mapv(f64::tanh);
        let y = self.out.forward(&h2);
        (y, SkipCache { odo: odo.to_owned(), cat, h2 })
    }

    /// Reverse-mode gradients from the loss gradient at the output.
    pub fn backward(&self, cache: &SkipCache, grad_out: &Array2<f64>) -> SkipGrads {
        let hidden = self.hidden_dim();
        // The `y` argument is unused for linear activations; h2 is the input.
        let (g_out, g_h2) =
            linear_backward(&self.out, Activation::Linear, &cache.h2, &cache.h2, grad_out);
        let (g_l2, g_cat) =
            linear_backward(&self.l2, Activation::Tanh, &cache.cat, &cache.h2, &g_h2);
        let g_h1 = g_cat.slice(s![.., ..hidden]).to_owned();
        let h1 = cache.cat.slice(s![.., ..hidden]).to_owned();
        let (g_l1, _) = linear_backward(&self.l1, Activation::Tanh, &cache.odo, &h1, &g_h1);
        SkipGrads { l1: g_l1, l2: g_l2, out: g_out }
    }

    /// Single-observation forward with per-layer finite checks; `label`
    /// names the network in error messages.
    pub fn forward_single(&self, obs: &Observation, label: &str) -> Result<Array1<f64>> {
        obs.check_finite()?;
        let odo = Array1::from_iter(obs.odometry.iter().copied());
        let mut h1 = self.l1.forward1(&odo);
        h1.mapv_inplace(f64::tanh);
        if h1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{label} layer1 activations")));
        }
        let mut cat = Array1::zeros(h1.len() + obs.aux.len());
        cat.slice_mut(s![..h1.len()]).assign(&h1);
        for (i, v) in obs.aux.iter().enumerate() {
            cat[h1.len() + i] = *v;
        }
        let mut h2 = self.l2.forward1(&cat);
        h2.mapv_inplace(f64::tanh);
        if h2.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{label} layer2 activations")));
        }
        let y = self.out.forward1(&h2);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{label} output activations")));
        }
        Ok(y)
    }

    /// Named parameter tensors for checkpoints.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        [("l1", &self.l1), ("l2", &self.l2), ("out", &self.out)]
            .into_iter()
            .flat_map(|(name, l)| {
                [
                    (
                        format!("{name}/w"),
                        vec![l.weight.nrows(), l.weight.ncols()],
                        l.weight.iter().copied().collect::<Vec<f64>>(),
                    ),
                    (format!("{name}/b"), vec![l.bias.len()], l.bias.to_vec()),
                ]
            })
            .collect()
    }
}

impl FlatParams for SkipNet {
    fn param_len(&self) -> usize {
        [&self.l1, &self.l2, &self.out]
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    fn copy_params_to(&self, out: &mut [f64]) {
        let mut off = 0;
        for l in [&self.l1, &self.l2, &self.out] {
            let n = l.weight.len() + l.bias.len();
            let mut buf = vec![0.0; n];
            let nw = l.weight.len();
            buf[..nw].copy_from_slice(l.weight.as_slice().expect("contiguous"));
            buf[nw..].copy_from_slice(l.bias.as_slice().expect("contiguous"));
            out[off..off + n].copy_from_slice(&buf);
            off += n;
        }
    }

    fn load_params_from(&mut self, params: &[f64]) {
        let mut off = 0;
        for l in [&mut self.l1, &mut self.l2, &mut self.out] {
            let nw = l.weight.len();
            let nb = l.bias.len();
            l.weight
                .as_slice_mut()
                .expect("contiguous")
                .copy_from_slice(&params[off..off + nw]);
            l.bias
                .as_slice_mut()
                .expect("contiguous")
                .copy_from_slice(&params[off + nw..off + nw + nb]);
            off += nw + nb;
        }
    }
}

/// Gaussian policy: skip-net mean plus a learned state-independent log-std,
/// kept inside [LOG_STD_MIN, LOG_STD_MAX].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub net: SkipNet,
    pub log_std: Array1<f64>,
}

impl PolicyNet {
    pub fn new(
        odo_dim: usize,
        aux_dim: usize,
        hidden: usize,
        init_log_std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            net: SkipNet::new(odo_dim, aux_dim, hidden, ACTION_DIM, 0.01, rng),
            log_std: Array1::from_elem(
                ACTION_DIM,
                init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX),
            ),
        }
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std
            .mapv_inplace(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn log_std_arr(&self) -> [f64; ACTION_DIM] {
        let mut a = [0.0; ACTION_DIM];
        for (i, v) in self.log_std.iter().enumerate() {
            a[i] = *v;
        }
        a
    }
}

impl FlatParams for PolicyNet {
    fn param_len(&self) -> usize {
        self.net.param_len() + self.log_std.len()
    }

    fn copy_params_to(&self, out: &mut [f64]) {
        let n = self.net.param_len();
        self.net.copy_params_to(&mut out[..n]);
        out[n..].copy_from_slice(self.log_std.as_slice().expect("contiguous"));
    }

    fn load_params_from(&mut self, params: &[f64]) {
        let n = self.net.param_len();
        self.net.load_params_from(&params[..n]);
        self.log_std
            .as_slice_mut()
            .expect("contiguous")
            .copy_from_slice(&params[n..]);
    }
}

/// Policy head output for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
}

/// The two state-value estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueHeads {
    pub v_ext: f64,
    pub v_int: f64,
}

/// Runs the policy network on one observation.
pub fn forward_policy(policy: &PolicyNet, obs: &Observation) -> Result<PolicyOutput> {
    let y = policy.net.forward_single(obs, "policy")?;
    let mut mean = [0.0; ACTION_DIM];
    for (i, v) in y.iter().enumerate() {
        mean[i] = *v;
    }
    Ok(PolicyOutput { mean, log_std: policy.log_std_arr() })
}

/// Evaluates both value heads (separate networks) on one observation.
pub fn forward_values(ext: &SkipNet, int: &SkipNet, obs: &Observation) -> Result<ValueHeads> {
    let ve = ext.forward_single(obs, "value_ext")?;
    let vi = int.forward_single(obs, "value_int")?;
    Ok(ValueHeads { v_ext: ve[0], v_int: vi[0] })
}

/// Diagonal-Gaussian log density of `action` under the policy output, and
/// the (state-independent) differential entropy.
pub fn log_prob_and_entropy(out: &PolicyOutput, action: &[f64; ACTION_DIM]) -> (f64, f64) {
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let half_ln_2pi_e = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    let mut lp = 0.0;
    let mut entropy = 0.0;
    for k in 0..ACTION_DIM {
        let std = out.log_std[k].exp();
        let z = (action[k] - out.mean[k]) / std;
        lp += -0.5 * z * z - out.log_std[k] - half_ln_2pi;
        entropy += out.log_std[k] + half_ln_2pi_e;
    }
    (lp, entropy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed_obs() -> Observation {
        let mut obs = Observation::zeros(14);
        for i in 0..ODOMETRY_DIM {
            obs.odometry[i] = ((i as f64) * 0.37).sin() * 0.5;
        }
        for i in 0..14 {
            obs.aux[i] = ((i as f64) * 0.71).cos() * 0.5;
        }
        obs
    }

    #[test]
    fn zero_weights_give_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut policy = PolicyNet::new(ODOMETRY_DIM, 14, 16, 0.0, &mut rng);
        let zeros = vec![0.0; policy.param_len()];
        policy.load_params_from(&zeros);
        let out = forward_policy(&policy, &fixed_obs()).unwrap();
        assert_eq!(out.mean, [0.0; 4]);
    }

    #[test]
    fn zero_value_params_give_zero_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ext = SkipNet::new(ODOMETRY_DIM, 14, 16, 1, 1.0, &mut rng);
        let mut int = SkipNet::new(ODOMETRY_DIM, 14, 16, 1, 1.0, &mut rng);
        let ze = vec![0.0; ext.param_len()];
        ext.load_params_from(&ze);
        int.load_params_from(&ze);
        let heads = forward_values(&ext, &int, &fixed_obs()).unwrap();
        assert_eq!(heads.v_ext, 0.0);
        assert_eq!(heads.v_int, 0.0);
    }

    #[test]
    fn identical_value_heads_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ext = SkipNet::new(ODOMETRY_DIM, 14, 16, 1, 1.0, &mut rng);
        let int = ext.clone();
        let heads = forward_values(&ext, &int, &fixed_obs()).unwrap();
        assert_eq!(heads.v_ext, heads.v_int);
    }

    #[test]
    fn permuting_aux_with_matching_columns_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = SkipNet::new(ODOMETRY_DIM, 14, 16, 4, 0.01, &mut rng);
        let obs = fixed_obs();
        let base = net.forward_single(&obs, "t").unwrap();

        // Swap aux slots 2 and 9 together with columns hidden+2 and hidden+9.
        let mut permuted_net = net.clone();
        let h = net.hidden_dim();
        let col_a = net.l2.weight.column(h + 2).to_owned();
        let col_b = net.l2.weight.column(h + 9).to_owned();
        permuted_net.l2.weight.column_mut(h + 2).assign(&col_b);
        permuted_net.l2.weight.column_mut(h + 9).assign(&col_a);
        let mut permuted_obs = obs.clone();
        permuted_obs.aux.swap(2, 9);

        let swapped = permuted_net.forward_single(&permuted_obs, "t").unwrap();
        for k in 0..4 {
            assert_relative_eq!(base[k], swapped[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn single_and_batch_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = SkipNet::new(ODOMETRY_DIM, 14, 16, 4, 0.01, &mut rng);
        let obs = fixed_obs();
        let single = net.forward_single(&obs, "t").unwrap();
        let odo = Array2::from_shape_vec((1, ODOMETRY_DIM), obs.odometry.to_vec()).unwrap();
        let aux = Array2::from_shape_vec((1, 14), obs.aux.clone()).unwrap();
        let batch = net.forward_batch(&odo, &aux);
        for k in 0..4 {
            assert_relative_eq!(single[k], batch[[0, k]], epsilon = 1e-14);
        }
    }

    #[test]
    fn non_finite_observation_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = PolicyNet::new(ODOMETRY_DIM, 14, 16, 0.0, &mut rng);
        let mut obs = fixed_obs();
        obs.odometry[0] = f64::NAN;
        assert!(forward_policy(&policy, &obs).is_err());
    }

    #[test]
    fn log_prob_at_mode_with_unit_std() {
        let out = PolicyOutput { mean: [0.3, -0.1, 0.7, 0.0], log_std: [0.0; 4] };
        let (lp, _) = log_prob_and_entropy(&out, &out.mean.clone());
        let expected = -2.0 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(lp, expected, epsilon = 1e-12);
    }

    #[test]
    fn entropy_closed_form_and_shift_law() {
        let out = PolicyOutput { mean: [0.0; 4], log_std: [0.0; 4] };
        let (_, ent) = log_prob_and_entropy(&out, &[0.0; 4]);
        assert_relative_eq!(ent, 2.0 * (1.0 + (2.0 * std::f64::consts::PI).ln()), epsilon = 1e-12);
        assert_relative_eq!(ent, 5.675754132818691, epsilon = 1e-12);

        let doubled = PolicyOutput { mean: [0.0; 4], log_std: [2.0f64.ln(); 4] };
        let (_, ent2) = log_prob_and_entropy(&doubled, &[0.0; 4]);
        assert_relative_eq!(ent2 - ent, 4.0 * 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_prob_marginal_integrates_to_one() {
        // Monte-Carlo over a uniform proposal on the first action dimension.
        let out = PolicyOutput { mean: [0.4, 0.0, 0.0, 0.0], log_std: [0.3, 0.0, 0.0, 0.0] };
        let std = out.log_std[0].exp();
        let lo = out.mean[0] - 6.0 * std;
        let hi = out.mean[0] + 6.0 * std;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = rng.random_range(lo..hi);
            // Reduce the joint density to the 1-D marginal by fixing the
            // other dims at their means (their densities multiply to a known
            // constant we divide out).
            let (lp, _) = log_prob_and_entropy(&out, &[x, 0.0, 0.0, 0.0]);
            let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
            let marginal = lp + 3.0 * half_ln_2pi; // strip the three at-mode dims
            acc += marginal.exp();
        }
        let integral = acc / n as f64 * (hi - lo);
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
    }

    #[test]
    fn forward_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let policy = PolicyNet::new(ODOMETRY_DIM, 14, 32, 0.0, &mut rng);
        let a = forward_policy(&policy, &fixed_obs()).unwrap();
        let b = forward_policy(&policy, &fixed_obs()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn golden_vector_regression() {
        // Frozen from a reference forward pass of this architecture at build
        // time (seed 42, hidden 8). Guards initialization and layer wiring.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let policy = PolicyNet::new(ODOMETRY_DIM, 14, 8, 0.0, &mut rng);
        let value = SkipNet::new(ODOMETRY_DIM, 14, 8, 1, 1.0, &mut rng);
        let out = forward_policy(&policy, &fixed_obs()).unwrap();
        let v = value.forward_single(&fixed_obs(), "v").unwrap();
        let golden_mean = [
            -0.004508937735293383,
            -0.0029655633002844214,
            0.004103716513992526,
            0.0004986641373730661,
        ];
        for k in 0..4 {
            assert_relative_eq!(out.mean[k], golden_mean[k], epsilon = 1e-15);
        }
        assert_relative_eq!(v[0], -0.724989619858606, epsilon = 1e-15);
    }
}
