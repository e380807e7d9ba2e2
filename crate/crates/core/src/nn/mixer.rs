use ndarray::{Array1, Array2};
use rand::Rng;

use super::{Mlp, MlpCache, Params};

/// Monotonic mixing network in the QMIX style. State-conditioned
/// hypernetworks emit the mixing weights, which pass through `abs`, and the
/// hidden activation is ELU, so `∂Q_tot/∂q_i ≥ 0` for every input.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixer {
    pub n_inputs: usize,
    pub embed: usize,
    pub hyper_w1: Mlp,
    pub hyper_b1: Mlp,
    pub hyper_w2: Mlp,
    pub hyper_b2: Mlp,
}

pub struct MixerCache {
    q: Array2<f32>,
    w1: MlpCache,
    b1: MlpCache,
    w2: MlpCache,
    b2: MlpCache,
    pre: Array2<f32>,
    hidden: Array2<f32>,
}

fn elu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of `abs`, taking 0 at 0.
fn sign(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn elu_grad(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

impl Mixer {
    pub fn new(state_dim: usize, n_inputs: usize, embed: usize, hyper_hidden: usize, rng: &mut impl Rng) -> Self {
        Mixer {
            n_inputs,
            embed,
            hyper_w1: Mlp::new(&[state_dim, hyper_hidden, n_inputs * embed], false, rng),
            hyper_b1: Mlp::new(&[state_dim, embed], false, rng),
            hyper_w2: Mlp::new(&[state_dim, hyper_hidden, embed], false, rng),
            hyper_b2: Mlp::new(&[state_dim, hyper_hidden, 1], false, rng),
        }
    }

    pub fn zeros(state_dim: usize, n_inputs: usize, embed: usize, hyper_hidden: usize) -> Self {
        Mixer {
            n_inputs,
            embed,
            hyper_w1: Mlp::zeros(&[state_dim, hyper_hidden, n_inputs * embed], false),
            hyper_b1: Mlp::zeros(&[state_dim, embed], false),
            hyper_w2: Mlp::zeros(&[state_dim, hyper_hidden, embed], false),
            hyper_b2: Mlp::zeros(&[state_dim, hyper_hidden, 1], false),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.hyper_b1.input_dim()
    }

    pub fn forward(&self, state: &Array2<f32>, q: &Array2<f32>) -> Array1<f32> {
        self.forward_cached(state, q).0
    }

    pub fn forward_cached(&self, state: &Array2<f32>, q: &Array2<f32>) -> (Array1<f32>, MixerCache) {
        let (b, n, e) = (q.nrows(), self.n_inputs, self.embed);
        assert_eq!(q.ncols(), n, "mixer input width mismatch");
        let w1 = self.hyper_w1.forward_cached(state);
        let b1 = self.hyper_b1.forward_cached(state);
        let w2 = self.hyper_w2.forward_cached(state);
        let b2 = self.hyper_b2.forward_cached(state);
        let mut pre = Array2::<f32>::zeros((b, e));
        let mut hidden = Array2::<f32>::zeros((b, e));
        let mut out = Array1::<f32>::zeros(b);
        for r in 0..b {
            let (w1r, b1r, w2r) = (w1.output().row(r), b1.output().row(r), w2.output().row(r));
            let mut acc = b2.output()[[r, 0]] as f64;
            for k in 0..e {
                let mut s = b1r[k] as f64;
                for i in 0..n {
                    s += (q[[r, i]] * w1r[i * e + k].abs()) as f64;
                }
                pre[[r, k]] = s as f32;
                let h = elu(s as f32);
                hidden[[r, k]] = h;
                acc += (h * w2r[k].abs()) as f64;
            }
            out[r] = acc as f32;
        }
        (out, MixerCache { q: q.to_owned(), w1, b1, w2, b2, pre, hidden })
    }

    /// Accumulates hypernetwork gradients into `grads`; returns `∂L/∂q`.
    pub fn backward(&self, cache: &MixerCache, d_out: &[f32], grads: &mut Mixer) -> Array2<f32> {
        let (b, n, e) = (cache.q.nrows(), self.n_inputs, self.embed);
        let mut dq = Array2::<f32>::zeros((b, n));
        let mut dw1 = Array2::<f32>::zeros((b, n * e));
        let mut db1 = Array2::<f32>::zeros((b, e));
        let mut dw2 = Array2::<f32>::zeros((b, e));
        let mut db2 = Array2::<f32>::zeros((b, 1));
        for r in 0..b {
            let dy = d_out[r];
            db2[[r, 0]] = dy;
            let (w1r, w2r) = (cache.w1.output().row(r), cache.w2.output().row(r));
            for k in 0..e {
                let w2 = w2r[k];
                dw2[[r, k]] = cache.hidden[[r, k]] * dy * sign(w2);
                let dpre = dy * w2.abs() * elu_grad(cache.pre[[r, k]]);
                db1[[r, k]] = dpre;
                for i in 0..n {
                    let w = w1r[i * e + k];
                    dq[[r, i]] += w.abs() * dpre;
                    dw1[[r, i * e + k]] = cache.q[[r, i]] * dpre * sign(w);
                }
            }
        }
        self.hyper_w1.backward(&cache.w1, &dw1, &mut grads.hyper_w1);
        self.hyper_b1.backward(&cache.b1, &db1, &mut grads.hyper_b1);
        self.hyper_w2.backward(&cache.w2, &dw2, &mut grads.hyper_w2);
        self.hyper_b2.backward(&cache.b2, &db2, &mut grads.hyper_b2);
        dq
    }
}

impl Params for Mixer {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        self.hyper_w1.visit(f);
        self.hyper_b1.visit(f);
        self.hyper_w2.visit(f);
        self.hyper_b2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        self.hyper_w1.visit_mut(f);
        self.hyper_b1.visit_mut(f);
        self.hyper_w2.visit_mut(f);
        self.hyper_b2.visit_mut(f);
    }
}
