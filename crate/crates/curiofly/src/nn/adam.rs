//! Bias-corrected Adam over flat parameter vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators plus the step counter. The moment
/// vectors mirror the flat parameter layout of the network they optimize.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    hp: &AdamParams,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam_step: params {} vs grads {} vs moments {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - hp.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hp.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_leaves_params_unchanged_and_decays_moments() {
        let mut params = vec![1.0, -2.0];
        let mut state = AdamState::new(2);
        state.m = vec![0.5, 0.5];
        state.v = vec![0.25, 0.25];
        adam_step(&mut params, &[0.0, 0.0], &mut state, 0.1, &AdamParams::default()).unwrap();
        // m decays toward zero but params moved by the residual momentum;
        // with zero *initial* moments nothing moves at all.
        let mut p2 = vec![1.0, -2.0];
        let mut s2 = AdamState::new(2);
        adam_step(&mut p2, &[0.0, 0.0], &mut s2, 0.1, &AdamParams::default()).unwrap();
        assert_eq!(p2, vec![1.0, -2.0]);
        assert_eq!(s2.m, vec![0.0, 0.0]);
        assert_relative_eq!(state.m[0], 0.45);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // Single parameter p=1, gradient g=0.4, lr=0.01:
        //   m = 0.1*0.4? no: m = (1-b1) g = 0.04 ; v = (1-b2) g^2 = 0.00016
        //   m_hat = m / (1-b1) = 0.4 ; v_hat = v / (1-b2) = 0.16
        //   p' = 1 - 0.01 * 0.4 / (sqrt(0.16) + 1e-8)
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[0.4], &mut s, 0.01, &AdamParams::default()).unwrap();
        let expected = 1.0 - 0.01 * 0.4 / (0.16f64.sqrt() + 1e-8);
        assert_relative_eq!(p[0], expected, epsilon = 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn identical_tensors_with_identical_gradients_stay_identical() {
        let mut a = vec![0.3, -0.7, 1.1];
        let mut b = a.clone();
        let mut sa = AdamState::new(3);
        let mut sb = AdamState::new(3);
        for step in 0..25 {
            let g: Vec<f64> = (0..3).map(|i| ((step * 3 + i) as f64 * 0.37).sin()).collect();
            adam_step(&mut a, &g, &mut sa, 3e-3, &AdamParams::default()).unwrap();
            adam_step(&mut b, &g, &mut sb, 3e-3, &AdamParams::default()).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        let err = adam_step(&mut p, &[1.0; 2], &mut s, 0.1, &AdamParams::default()).unwrap_err();
        assert!(matches!(err, crate::Error::Shape(_)));
    }
}
