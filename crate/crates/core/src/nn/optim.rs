use serde::{Deserialize, Serialize};

/// Anything made of `f32` parameter tensors, visited in a fixed order.
pub trait Params {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32]));

    fn slices(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        self.visit(&mut |s| out.push(s));
        out
    }

    fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn fill(&mut self, v: f32) {
        self.visit_mut(&mut |s| s.fill(v));
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn flat(&self) -> Vec<f32> {
        self.slices().concat()
    }
}

impl<T: Params> Params for Vec<T> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        for p in self {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        for p in self {
            p.visit_mut(f);
        }
    }
}

impl<T: Params> Params for Option<T> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a [f32])) {
        if let Some(p) = self {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f32])) {
        if let Some(p) = self {
            p.visit_mut(f);
        }
    }
}

/// A copy of `p` with every parameter set to zero, for gradient accumulation.
pub fn zeros_like<P: Params + Clone>(p: &P) -> P {
    let mut g = p.clone();
    g.fill(0.0);
    g
}

/// Copy every parameter of `src` into `dst` (same architecture).
pub fn copy_params<P: Params>(dst: &mut P, src: &P) {
    let s = src.slices();
    let mut i = 0;
    dst.visit_mut(&mut |d| {
        d.copy_from_slice(s[i]);
        i += 1;
    });
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub t: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One bias-corrected Adam update of `params` with gradients `grads`.
    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P) {
        let g = grads.slices();
        if self.m.is_empty() {
            self.m = g.iter().map(|s| vec![0.0; s.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(g.len(), self.m.len(), "gradient layout changed between steps");
        self.t += 1;
        let c1 = 1.0 - (self.beta1 as f64).powi(self.t as i32);
        let c2 = 1.0 - (self.beta2 as f64).powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let (c1, c2) = (c1 as f32, c2 as f32);
        let mut i = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        params.visit_mut(&mut |p| {
            let (m, v, g) = (&mut ms[i], &mut vs[i], g[i]);
            assert_eq!(p.len(), g.len(), "parameter and gradient shapes differ");
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= lr * mh / (vh.sqrt() + eps);
            }
            i += 1;
        });
    }

    pub fn moments(&self) -> (&[Vec<f32>], &[Vec<f32>]) {
        (&self.m, &self.v)
    }

    pub fn set_moments(&mut self, m: Vec<Vec<f32>>, v: Vec<Vec<f32>>) {
        self.m = m;
        self.v = v;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetUpdate {
    Soft { tau: f32 },
    Hard { period: u64 },
}

/// Online parameters plus a lagged target copy.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetPair<P> {
    pub online: P,
    pub target: P,
    pub mode: TargetUpdate,
    pub updates: u64,
}

impl<P: Params + Clone> TargetPair<P> {
    pub fn new(online: P, mode: TargetUpdate) -> Self {
        TargetPair { target: online.clone(), online, mode, updates: 0 }
    }

    /// Advance the update counter; soft mode blends every call, hard mode
    /// copies on every `period`-th call. Returns whether the target changed.
    pub fn update(&mut self) -> bool {
        self.updates += 1;
        match self.mode {
            TargetUpdate::Soft { tau } => {
                soft_update(&mut self.target, &self.online, tau);
                true
            }
            TargetUpdate::Hard { period } => {
                let fire = period > 0 && self.updates.is_multiple_of(period);
                if fire {
                    copy_params(&mut self.target, &self.online);
                }
                fire
            }
        }
    }
}

/// `target = (1 - tau) * target + tau * online`. `tau` of exactly 0 or 1
/// leaves the target or copies the online values bit for bit.
pub fn soft_update<P: Params>(target: &mut P, online: &P, tau: f32) {
    let s = online.slices();
    let mut i = 0;
    target.visit_mut(&mut |t| {
        for (t, &o) in t.iter_mut().zip(s[i]) {
            *t = if tau == 1.0 {
                o
            } else if tau == 0.0 {
                *t
            } else {
                (1.0 - tau) * *t + tau * o
            };
        }
        i += 1;
    });
}
