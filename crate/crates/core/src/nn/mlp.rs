use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::Params;

/// Final-layer weights are drawn from `U(-OUTPUT_INIT, OUTPUT_INIT)`.
pub const OUTPUT_INIT: f32 = 3e-3;

/// Dense layer `y = x W + b`, `W` stored input-major (`in × out`).
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: Array2<f32>,
    pub b: Array1<f32>,
}

impl Linear {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Linear { w: Array2::zeros((n_in, n_out)), b: Array1::zeros(n_out) }
    }

    pub fn uniform(n_in: usize, n_out: usize, bound: f32, rng: &mut impl Rng) -> Self {
        let w = Array2::from_shape_simple_fn((n_in, n_out), || rng.random_range(-bound..=bound));
        Linear { w, b: Array1::zeros(n_out) }
    }

    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        x.dot(&self.w) + &self.b
    }
}

/// Multi-layer perceptron: ReLU between layers, linear output unless
/// `relu_output` is set (encoders).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub relu_output: bool,
}

/// Activations saved by `forward_cached` for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f32>>,
    output: Array2<f32>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f32> {
        &self.output
    }

    pub fn input(&self) -> &Array2<f32> {
        &self.inputs[0]
    }
}

fn relu_inplace(a: &mut Array2<f32>) {
    a.mapv_inplace(|v| v.max(0.0));
}

impl Mlp {
    /// He-uniform hidden layers; the last layer is He-uniform too when it is
    /// followed by a ReLU, otherwise `U(±OUTPUT_INIT)`. Biases start at zero.
    pub fn new(sizes: &[usize], relu_output: bool, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let last = i + 1 == n;
                let bound = if last && !relu_output { OUTPUT_INIT } else { (6.0 / sizes[i] as f32).sqrt() };
                Linear::uniform(sizes[i], sizes[i + 1], bound, rng)
            })
            .collect();
        Mlp { layers, relu_output }
    }

    pub fn zeros(sizes: &[usize], relu_output: bool) -> Self {
        let layers = sizes.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect();
        Mlp { layers, relu_output }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    fn activate(&self, i: usize) -> bool {
        i + 1 < self.layers.len() || self.relu_output
    }

    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h);
            if self.activate(i) {
                relu_inplace(&mut h);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f32>) -> MlpCache {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let next = {
                let mut y = l.forward(&h);
                if self.activate(i) {
                    relu_inplace(&mut y);
                }
                y
            };
            inputs.push(h);
            h = next;
        }
        MlpCache { inputs, output: h }
    }

    /// Accumulate parameter gradients into `grads` and return the gradient
    /// with respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Array2<f32>, grads: &mut Mlp) -> Array2<f32> {
        let mut g = grad_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            if self.activate(i) {
                let out = if i + 1 == self.layers.len() { &cache.output } else { &cache.inputs[i + 1] };
                ndarray::Zip::from(&mut g).and(out).for_each(|g, &o| {
                    if o <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            let x = &cache.inputs[i];
            grads.layers[i].w += &x.t().dot(&g);
            grads.layers[i].b += &g.sum_axis(Axis(0));
            g = g.dot(&self.layers[i].w.t());
        }
        g
    }
}

impl Params for Mlp {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        for l in &self.layers {
            f(l.w.as_slice().expect("standard layout"));
            f(l.b.as_slice().expect("standard layout"));
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        for l in &mut self.layers {
            f(l.w.as_slice_mut().expect("standard layout"));
            f(l.b.as_slice_mut().expect("standard layout"));
        }
    }
}
