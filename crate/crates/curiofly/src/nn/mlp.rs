//! Dense layers and plain multi-layer perceptrons with cached-activation
//! backprop. Batched paths operate on `(batch, dim)` matrices so minibatch
//! work runs through real matrix products.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::FlatParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }

    fn apply1(self, z: &mut Array1<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }
}

/// Orthogonal-ish initialization: a Gaussian matrix with its shorter
/// dimension orthonormalized (modified Gram-Schmidt), scaled by `gain`.
pub fn orthogonal_init(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal));
    if rows <= cols {
        gram_schmidt_rows(&mut m);
    } else {
        let mut t = m.t().to_owned();
        gram_schmidt_rows(&mut t);
        m = t.t().to_owned();
    }
    m * gain
}

fn gram_schmidt_rows(m: &mut Array2<f64>) {
    let rows = m.nrows();
    for i in 0..rows {
        for j in 0..i {
            let dot = m.row(i).dot(&m.row(j));
            let prev = m.row(j).to_owned();
            m.row_mut(i).zip_mut_with(&prev, |a, b| *a -= dot * b);
        }
        let norm = m.row(i).dot(&m.row(i)).sqrt().max(1e-12);
        m.row_mut(i).mapv_inplace(|v| v / norm);
    }
}

/// One dense layer: y = x W^T + b, weight shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, gain: f64, rng: &mut impl Rng) -> Self {
        Self {
            weight: orthogonal_init(out_dim, in_dim, gain, rng),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    pub fn forward1(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(x) + &self.bias
    }

    fn param_len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn copy_params_to(&self, out: &mut [f64]) {
        let nw = self.weight.len();
        out[..nw].copy_from_slice(self.weight.as_slice().expect("contiguous"));
        out[nw..].copy_from_slice(self.bias.as_slice().expect("contiguous"));
    }

    fn load_params_from(&mut self, params: &[f64]) {
        let nw = self.weight.len();
        self.weight
            .as_slice_mut()
            .expect("contiguous")
            .copy_from_slice(&params[..nw]);
        self.bias
            .as_slice_mut()
            .expect("contiguous")
            .copy_from_slice(&params[nw..]);
    }
}

/// Gradient of one dense layer, same shapes as the layer itself.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

impl LayerGrads {
    pub fn len(&self) -> usize {
        self.dw.len() + self.db.len()
    }

    pub fn copy_to(&self, out: &mut [f64]) {
        let nw = self.dw.len();
        out[..nw].copy_from_slice(self.dw.as_slice().expect("contiguous"));
        out[nw..].copy_from_slice(self.db.as_slice().expect("contiguous"));
    }
}

/// Gradient through one dense layer + activation.
///
/// `x` is the layer input, `y` the post-activation output, `grad_out` the
/// loss gradient at `y`. Returns the layer gradients and the gradient at `x`.
pub(crate) fn linear_backward(
    layer: &Linear,
    act: Activation,
    x: &Array2<f64>,
    y: &Array2<f64>,
    grad_out: &Array2<f64>,
) -> (LayerGrads, Array2<f64>) {
    let gz = match act {
        Activation::Tanh => grad_out * &y.mapv(|v| 1.0 - v * v),
        Activation::Linear => grad_out.clone(),
    };
    let dw = gz.t().dot(x);
    let db = gz.sum_axis(Axis(0));
    let gx = gz.dot(&layer.weight);
    (LayerGrads { dw, db }, gx)
}

/// Plain MLP: tanh hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub acts: Vec<Activation>,
}

/// Cached activations from `forward_cached`; `xs[i]`/`ys[i]` are the input
/// and post-activation output of layer `i`.
#[derive(Debug, Clone)]
pub struct MlpCache {
    xs: Vec<Array2<f64>>,
    ys: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn flat_len(&self) -> usize {
        self.layers.iter().map(LayerGrads::len).sum()
    }

    pub fn copy_to(&self, out: &mut [f64]) {
        let mut off = 0;
        for l in &self.layers {
            l.copy_to(&mut out[off..off + l.len()]);
            off += l.len();
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.flat_len()];
        self.copy_to(&mut v);
        v
    }
}

impl Mlp {
    /// Builds an MLP over `dims` (input, hidden..., output); hidden layers
    /// use tanh with gain 1.0, the output layer is linear with `out_gain`.
    pub fn new(dims: &[usize], out_gain: f64, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut layers = Vec::new();
        let mut acts = Vec::new();
        for i in 0..dims.len() - 1 {
            let last = i == dims.len() - 2;
            let gain = if last { out_gain } else { 1.0 };
            layers.push(Linear::new(dims[i], dims[i + 1], gain, rng));
            acts.push(if last { Activation::Linear } else { Activation::Tanh });
        }
        Self { layers, acts }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.acts) {
            h = layer.forward(&h);
            act.apply(&mut h);
        }
        h
    }

    pub fn forward1(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut h = x.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.acts) {
            h = layer.forward1(&h);
            act.apply1(&mut h);
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut xs = Vec::with_capacity(self.layers.len());
        let mut ys = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.acts) {
            xs.push(h.clone());
            h = layer.forward(&h);
            act.apply(&mut h);
            ys.push(h.clone());
        }
        (h, MlpCache { xs, ys })
    }

    /// Exact reverse-mode gradients for every parameter given the loss
    /// gradient at the output; also returns the gradient at the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        assert_eq!(cache.xs.len(), self.layers.len(), "cache/net layer mismatch");
        let mut g = grad_out.clone();
        let mut grads = vec![None; self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let (lg, gx) = linear_backward(&self.layers[i], self.acts[i], &cache.xs[i], &cache.ys[i], &g);
            grads[i] = Some(lg);
            g = gx;
        }
        (
            MlpGrads {
                layers: grads.into_iter().map(|g| g.expect("filled")).collect(),
            },
            g,
        )
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} layer {i} parameters")));
            }
        }
        Ok(())
    }

    /// Named parameter tensors (for checkpoints): `(suffix, shape, data)`.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((
                format!("l{i}/w"),
                vec![l.weight.nrows(), l.weight.ncols()],
                l.weight.iter().copied().collect(),
            ));
            out.push((format!("l{i}/b"), vec![l.bias.len()], l.bias.to_vec()));
        }
        out
    }
}

impl FlatParams for Mlp {
    fn param_len(&self) -> usize {
        self.layers.iter().map(Linear::param_len).sum()
    }

    fn copy_params_to(&self, out: &mut [f64]) {
        let mut off = 0;
        for l in &self.layers {
            l.copy_params_to(&mut out[off..off + l.param_len()]);
            off += l.param_len();
        }
    }

    fn load_params_from(&mut self, params: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.param_len();
            l.load_params_from(&params[off..off + n]);
            off += n;
        }
    }
}

/// Scales every gradient tensor in place.
pub(crate) fn scale_grads(grads: &mut MlpGrads, factor: f64) {
    for l in &mut grads.layers {
        l.dw.mapv_inplace(|v| v * factor);
        l.db.mapv_inplace(|v| v * factor);
    }
}

#[allow(unused)]
pub(crate) fn slice_rows(m: &Array2<f64>, lo: usize, hi: usize) -> Array2<f64> {
    m.slice(s![lo..hi, ..]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selftest::finite_difference_gradient;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_init_preserves_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = orthogonal_init(64, 8, 1.0, &mut rng);
        // Columns orthonormal when out > in.
        for i in 0..8 {
            assert_relative_eq!(w.column(i).dot(&w.column(i)), 1.0, epsilon = 1e-10);
            for j in 0..i {
                assert!(w.column(i).dot(&w.column(j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_single_and_batch_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[5, 7, 3], 1.0, &mut rng);
        let x = Array1::from_shape_fn(5, |i| 0.3 * i as f64 - 0.7);
        let single = net.forward1(&x);
        let batch = net.forward(&x.clone().insert_axis(ndarray::Axis(0)));
        for k in 0..3 {
            assert_relative_eq!(single[k], batch[[0, k]], epsilon = 1e-14);
        }
    }

    #[test]
    fn gradient_of_linear_net_is_outer_product() {
        // Single linear layer, loss = sum(upstream * y): dW = outer(upstream, x).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 2], 1.0, &mut rng);
        let x = array![[1.0, -2.0, 0.5]];
        let upstream = array![[0.7, -0.3]];
        let (_, cache) = net.forward_cached(&x);
        let (grads, _) = net.backward(&cache, &upstream);
        for r in 0..2 {
            for c in 0..3 {
                assert_relative_eq!(grads.layers[0].dw[[r, c]], upstream[[0, r]] * x[[0, c]]);
            }
        }
        assert_relative_eq!(grads.layers[0].db[0], 0.7);
        assert_relative_eq!(grads.layers[0].db[1], -0.3);
    }

    #[test]
    fn gradient_of_constant_loss_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 6, 2], 1.0, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64 * 0.1);
        let (y, cache) = net.forward_cached(&x);
        let (grads, gx) = net.backward(&cache, &Array2::zeros(y.dim()));
        assert!(grads.flat().iter().all(|v| *v == 0.0));
        assert!(gx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Mlp::new(&[4, 8, 8, 3], 1.0, &mut rng);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| ((i * 7 + j) as f64 * 0.13).sin());
        let target = Array2::from_shape_fn((5, 3), |(i, j)| ((i + j) as f64 * 0.29).cos());

        // loss = 0.5 * sum((y - t)^2) / B
        let (y, cache) = net.forward_cached(&x);
        let b = x.nrows() as f64;
        let grad_out = (&y - &target) / b;
        let (grads, _) = net.backward(&cache, &grad_out);

        let x0 = net.params_flat();
        let analytic = grads.flat();
        let fd = finite_difference_gradient(
            |p| {
                net.load_params_from(p);
                let y = net.forward(&x);
                0.5 * (&y - &target).mapv(|v| v * v).sum() / b
            },
            &x0,
            1e-5,
        );
        for (a, f) in analytic.iter().zip(fd.iter()) {
            let denom = a.abs().max(f.abs()).max(1e-6);
            assert!((a - f).abs() / denom < 1e-4, "analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn param_roundtrip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[3, 5, 2], 0.01, &mut rng);
        let flat = net.params_flat();
        let mut other = Mlp::new(&[3, 5, 2], 0.01, &mut ChaCha8Rng::seed_from_u64(99));
        other.load_params_from(&flat);
        assert_eq!(net, other);
    }
}
