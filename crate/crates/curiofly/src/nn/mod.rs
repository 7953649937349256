//! Minimal feed-forward network core: dense layers with tanh hidden
//! activations, exact reverse-mode gradients, Adam, and the policy/value
//! heads used by the trainer. Everything is f64.

mod adam;
mod mlp;
mod policy;

pub use adam::{adam_step, AdamParams, AdamState};
pub use mlp::{orthogonal_init, Activation, Linear, Mlp, MlpCache, MlpGrads};
pub use policy::{
    forward_policy, forward_values, log_prob_and_entropy, PolicyNet, PolicyOutput, SkipCache,
    SkipGrads, SkipNet, ValueHeads, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN,
};

/// Networks expose their parameters as one flat vector so the optimizer,
/// checkpointing, and finite-difference checks share a single layout.
pub trait FlatParams {
    fn param_len(&self) -> usize;
    fn copy_params_to(&self, out: &mut [f64]);
    fn load_params_from(&mut self, params: &[f64]);

    fn params_flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.param_len()];
        self.copy_params_to(&mut v);
        v
    }
}
